"""Gradient walk from seed gain vectors toward/across the stability boundary.

Each seed is labeled, assigned a walk direction (auto: push stable seeds
toward instability and vice versa), then updated with the surgery-aggregated
search gradient until the sampling rule is met or the iteration budget runs
out. Samples are independent; mini-batches only group the processing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .criteria import CRITERIA, DEFAULT_ENABLED, StabilityReport, critical_times, evaluate
from .dynamics import GainVector, SystemParams, validate_gains
from .engine import integrate
from .errors import FreqwalkError, InfeasibleGain
from .sensitivity import extract_gradients
from .surgery import SurgeryConfig, surgery

RULES = ("flip", "margin")
DIRECTION_POLICIES = ("auto", "stabilize", "destabilize")


@dataclass
class SamplerConfig:
    """Walk settings.

    alpha is the raw-gradient step size. Search gradients of this model are
    O(1e-4) for sigma-50 seeds while boundary distances are O(10) in gain
    space, so the default is sized to cross within max_iter; override per run.
    """

    alpha: float = 1e4
    max_iter: int = 200
    batch_size: int = 20
    rule: str = "flip"
    margin_delta: float = 0.05
    direction_policy: str = "auto"
    enabled: tuple = DEFAULT_ENABLED
    normalize_step: bool = False
    violated_only: bool = False
    backtrack_limit: int = 20
    seed: int = 42
    n_seeds: int = 100
    mean: float = 0.0
    std: float = 50.0
    method: str = "euler"

    def validate(self):
        if not self.alpha >= 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.rule == "margin" and not self.margin_delta > 0.0:
            raise ValueError("margin delta must be positive")
        if self.direction_policy not in DIRECTION_POLICIES:
            raise ValueError(f"unknown direction policy {self.direction_policy!r}")
        for c in self.enabled:
            if c not in CRITERIA:
                raise ValueError(f"unknown criterion {c!r}")
        if self.backtrack_limit < 0:
            raise ValueError("backtrack_limit must be >= 0")
        if self.n_seeds < 0 or self.std < 0:
            raise ValueError("n_seeds and std must be nonnegative")


@dataclass
class SampleRecord:
    theta_initial: GainVector
    theta_final: GainVector
    label_initial: Union[int, str]          # 0 | 1 | "invalid"
    label_final: Union[int, str]
    report_final: Optional[StabilityReport]
    converged: bool
    iterations: int                          # gradient updates actually applied
    direction: Optional[str] = None
    theta_prev: Optional[GainVector] = None  # iterate before the last update
    failure: Optional[str] = None


@dataclass
class Dataset:
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def params_fingerprint(p: SystemParams, cfg: SamplerConfig) -> str:
    """Stable hash of the physical parameters and walk settings."""
    doc = {"system": asdict(p), "sampler": asdict(cfg)}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def generate_initial(n: int, p: SystemParams, mean: float = 0.0, std: float = 50.0, seed=None):
    """n i.i.d. Normal(mean, std^2) gain vectors, redrawing infeasible ones.

    Returns (list of GainVector, redraw count).
    """
    rng = np.random.default_rng(seed)
    out = np.empty((n, 4))
    redraws = 0
    pending = n
    filled = 0
    while pending > 0:
        draw = rng.normal(mean, std, size=(pending, 4))
        ok = p.m0 * p.m0 - 4.0 * draw[:, 1] * p.delta_p >= 0.0
        good = draw[ok]
        out[filled : filled + len(good)] = good
        filled += len(good)
        redraws += pending - len(good)
        pending -= len(good)
    return [GainVector.from_array(row) for row in out], redraws


def rule_satisfied(report: StabilityReport, label_initial: int, direction: str,
                   cfg: SamplerConfig, p: SystemParams) -> bool:
    """Whether the walk may stop at this report. Invalid samples never satisfy."""
    if cfg.rule == "flip":
        return report.label != label_initial
    # margin: every enabled criterion within delta*threshold of its threshold
    # or already past it in the walk direction
    delta = cfg.margin_delta
    th = {"rocof": p.thresholds.rocof, "nadir": p.thresholds.nadir, "ss": p.thresholds.ss}
    for c in cfg.enabled:
        v = abs(report.value(c))
        if direction == "stabilize":
            if v > (1.0 + delta) * th[c]:
                return False
        else:
            if v < (1.0 - delta) * th[c]:
                return False
    return True


def _walk_direction(policy: str, label_initial: int) -> str:
    if policy == "auto":
        return "destabilize" if label_initial == 0 else "stabilize"
    return policy


def _gradient_list(run, cfg: SamplerConfig, direction: str, report: StabilityReport):
    gset = extract_gradients(run, critical_times(run), direction)
    grads = []
    for c in cfg.enabled:
        if cfg.violated_only:
            # stabilizing: only criteria still violated pull; destabilizing:
            # only criteria not yet violated push
            violated = not report.passed(c)
            if direction == "stabilize" and not violated:
                continue
            if direction == "destabilize" and violated:
                continue
        grads.append(gset.get(c))
    return grads


def _walk_one(theta0: GainVector, p: SystemParams, cfg: SamplerConfig) -> SampleRecord:
    try:
        run = integrate(theta0, p, with_tangents=True, storage="streaming", method=cfg.method)
    except FreqwalkError as exc:
        return SampleRecord(
            theta_initial=theta0, theta_final=theta0,
            label_initial="invalid", label_final="invalid",
            report_final=None, converged=False, iterations=0,
            failure=type(exc).__name__,
        )
    report = evaluate(run, p, cfg.enabled)
    label0 = report.label
    direction = _walk_direction(cfg.direction_policy, label0)

    theta = theta0
    theta_prev = None
    converged = False
    updates = 0
    failure = None

    if cfg.max_iter >= 1:
        while updates < cfg.max_iter:
            if rule_satisfied(report, label0, direction, cfg, p):
                converged = True
                break
            grads = _gradient_list(run, cfg, direction, report)
            if grads:
                step = cfg.alpha * surgery(grads, SurgeryConfig())
                if cfg.normalize_step:
                    norm = float(np.linalg.norm(step))
                    step = step / norm * cfg.alpha if norm > 0.0 else step
            else:
                step = np.zeros(4)

            accepted = None
            trial = step
            for _ in range(cfg.backtrack_limit + 1):
                cand = GainVector.from_array(theta.as_array() + trial)
                try:
                    if not validate_gains(cand, p).feasible:
                        raise InfeasibleGain("update left the feasible gain region")
                    cand_run = integrate(cand, p, with_tangents=True,
                                         storage="streaming", method=cfg.method)
                    accepted = (cand, cand_run)
                    break
                except FreqwalkError:
                    trial = trial / 2.0
            if accepted is None:
                failure = "backtrack_exhausted"
                break
            theta_prev = theta
            theta, run = accepted
            report = evaluate(run, p, cfg.enabled)
            updates += 1
        else:
            # budget exhausted; the state after the last update still counts
            converged = rule_satisfied(report, label0, direction, cfg, p)

    return SampleRecord(
        theta_initial=theta0,
        theta_final=theta,
        label_initial=label0,
        label_final=report.label,
        report_final=report,
        converged=converged,
        iterations=updates,
        direction=direction,
        theta_prev=theta_prev,
        failure=failure,
    )


def augment(seeds, p: SystemParams, cfg: SamplerConfig) -> Dataset:
    """Walk every seed; returns one record per seed in input order."""
    cfg.validate()
    records = []
    b = cfg.batch_size
    for start in range(0, len(seeds), b):
        for theta0 in seeds[start : start + b]:
            records.append(_walk_one(theta0, p, cfg))
    meta = {
        "params_hash": params_fingerprint(p, cfg),
        "seed": cfg.seed,
        "config": {"system": asdict(p), "sampler": asdict(cfg)},
    }
    return Dataset(records=records, metadata=meta)
