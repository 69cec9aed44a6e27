"""Search gradients from trajectory tangents, finite-difference baselines,
and the method-comparison harness (accuracy, wall time, peak memory)."""

from __future__ import annotations

import gc
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import psutil

from .criteria import CriticalTimes, critical_times
from .dynamics import GainVector, SystemParams, validate_gains
from .engine import StreamSummary, Trajectory, integrate
from .errors import FreqwalkError, InfeasiblePerturbation, MissingTangents

DIRECTIONS = ("stabilize", "destabilize")

# denominator floor for percentage errors on near-zero components
PCT_FLOOR = 1e-12


@dataclass
class GradientSet:
    """Signed search gradients d|criterion|/d(theta) with direction applied.

    destabilize keeps the raw ascent direction of each |criterion|;
    stabilize negates it.
    """

    g_rocof: np.ndarray
    g_nadir: np.ndarray
    g_ss: np.ndarray
    direction: str

    def get(self, criterion: str) -> np.ndarray:
        return {"rocof": self.g_rocof, "nadir": self.g_nadir, "ss": self.g_ss}[criterion]


@dataclass(frozen=True)
class ComponentFailure:
    index: int
    kind: str
    message: str


def _dir_sign(direction: str) -> float:
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    return -1.0 if direction == "stabilize" else 1.0


def extract_gradients(
    traj: Union[Trajectory, StreamSummary],
    crit: CriticalTimes,
    direction: str = "destabilize",
) -> GradientSet:
    """Gradients of |x2(t_rocof)|, |x1(t_nadir)|, |x1(t_ss)| from stored tangents.

    Each gradient is sign(state value) times the matching tangent row; a zero
    state value contributes a zero gradient.
    """
    s = _dir_sign(direction)
    if isinstance(traj, StreamSummary):
        if traj.final_tangents is None:
            raise MissingTangents("streaming summary was built without tangents")
        rows = {
            "rocof": (traj.peak_x2, traj.tangents_at_peak_x2[1]),
            "nadir": (traj.peak_x1, traj.tangents_at_peak_x1[0]),
            "ss": (float(traj.final_state[0]), traj.final_tangents[0]),
        }
    else:
        if traj.tangents is None:
            raise MissingTangents("trajectory was integrated without tangents")
        rows = {
            "rocof": (float(traj.states[crit.idx_rocof, 1]), traj.tangents[crit.idx_rocof, 1]),
            "nadir": (float(traj.states[crit.idx_nadir, 0]), traj.tangents[crit.idx_nadir, 0]),
            "ss": (float(traj.states[crit.idx_ss, 0]), traj.tangents[crit.idx_ss, 0]),
        }
    g = {c: s * np.sign(v) * row for c, (v, row) in rows.items()}
    return GradientSet(g_rocof=g["rocof"], g_nadir=g["nadir"], g_ss=g["ss"], direction=direction)


def finite_diff_gradients(
    theta: GainVector,
    p: SystemParams,
    eps: float = 1e-6,
    scheme: str = "central",
    relative: bool = True,
    direction: str = "destabilize",
    method: str = "euler",
):
    """Finite-difference counterpart of extract_gradients.

    Perturbed runs are evaluated at the reference run's critical times, so the
    quotient differences the same smooth quantity the tangents differentiate.
    relative=True scales eps per component to eps * max(1, |theta_i|).

    Returns (GradientSet, [ComponentFailure]); failed components are NaN.
    """
    if scheme not in ("forward", "central"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if not eps > 0.0:
        raise ValueError("perturbation eps must be positive")
    s = _dir_sign(direction)

    ref = integrate(theta, p, with_tangents=False, storage="streaming", method=method)
    caps = (ref.idx_peak_x1, ref.idx_peak_x2)
    ref_q = np.array([ref.peak_x2, ref.peak_x1, float(ref.final_state[0])])
    signs = np.sign(ref_q)

    base = theta.as_array()
    diffs = np.full((3, 4), np.nan)
    failures = []
    for i in range(4):
        eps_i = eps * max(1.0, abs(base[i])) if relative else eps

        def probe(delta):
            t = base.copy()
            t[i] += delta
            cand = GainVector.from_array(t)
            if not validate_gains(cand, p).feasible:
                raise InfeasiblePerturbation(
                    f"component {i}: theta_{i} {'+' if delta > 0 else '-'} eps leaves the feasible region"
                )
            run = integrate(cand, p, with_tangents=False, storage="streaming",
                            method=method, capture_indices=caps)
            return np.array([run.x2_at_capture, run.x1_at_capture, float(run.final_state[0])])

        try:
            if scheme == "central":
                q_plus = probe(eps_i)
                q_minus = probe(-eps_i)
                diffs[:, i] = (q_plus - q_minus) / (2.0 * eps_i)
            else:
                diffs[:, i] = (probe(eps_i) - ref_q) / eps_i
        except FreqwalkError as exc:
            failures.append(ComponentFailure(index=i, kind=type(exc).__name__, message=str(exc)))

    g_rocof = s * signs[0] * diffs[0]
    g_nadir = s * signs[1] * diffs[1]
    g_ss = s * signs[2] * diffs[2]
    return GradientSet(g_rocof=g_rocof, g_nadir=g_nadir, g_ss=g_ss, direction=direction), failures


# ---------------------------------------------------------------------------
# method comparison harness


@dataclass
class MethodStats:
    time_s: float
    memory_bytes: int
    err_x_tss: float
    err_x_tnadir: float
    err_x_trocof: float
    err_g_nadir: float
    err_g_rocof: float
    err_g_ss: float


@dataclass
class ComparisonReport:
    reference: str
    batch_size: int
    runs: int
    methods: dict = field(default_factory=dict)       # name -> MethodStats
    gss_ratio: float = float("nan")                   # ||g_ss||_inf / max(||g_rocof||_inf, ||g_nadir||_inf)
    ss_exact_spread: float = float("nan")             # relative spread of the exact equilibrium over the batch


@dataclass
class _Quantities:
    """Per-sample values every method must produce for comparison."""

    x_tss: float
    x_tnadir: float
    x_trocof: float
    g_nadir: np.ndarray
    g_rocof: np.ndarray
    g_ss: np.ndarray


class _RssPeak(threading.Thread):
    """Samples the process resident set at a fixed cadence; records the max."""

    def __init__(self, interval: float = 1e-3):
        super().__init__(daemon=True)
        self.interval = interval
        self.peak = 0
        self._halt = threading.Event()
        self._proc = psutil.Process()

    def run(self):
        while not self._halt.is_set():
            rss = self._proc.memory_info().rss
            if rss > self.peak:
                self.peak = rss
            time.sleep(self.interval)

    def stop(self) -> int:
        self._halt.set()
        self.join()
        return self.peak


def _collect_fmad(thetas, p, storage, method):
    if storage == "full":
        # hold the whole batch in memory before extracting, like a consumer
        # that post-processes stored trajectories would
        trajs = [integrate(t, p, with_tangents=True, storage="full", method=method) for t in thetas]
        out = []
        for traj in trajs:
            crit = critical_times(traj)
            g = extract_gradients(traj, crit, "destabilize")
            out.append(
                _Quantities(
                    x_tss=float(traj.states[-1, 0]),
                    x_tnadir=float(traj.states[crit.idx_nadir, 0]),
                    x_trocof=float(traj.states[crit.idx_rocof, 1]),
                    g_nadir=g.g_nadir,
                    g_rocof=g.g_rocof,
                    g_ss=g.g_ss,
                )
            )
        return out
    out = []
    for t in thetas:
        summ = integrate(t, p, with_tangents=True, storage="streaming", method=method)
        crit = critical_times(summ)
        g = extract_gradients(summ, crit, "destabilize")
        out.append(
            _Quantities(
                x_tss=float(summ.final_state[0]),
                x_tnadir=summ.peak_x1,
                x_trocof=summ.peak_x2,
                g_nadir=g.g_nadir,
                g_rocof=g.g_rocof,
                g_ss=g.g_ss,
            )
        )
    return out


def _collect_fd(thetas, p, scheme, eps, relative, method):
    out = []
    for t in thetas:
        ref = integrate(t, p, with_tangents=False, storage="streaming", method=method)
        g, _failures = finite_diff_gradients(
            t, p, eps=eps, scheme=scheme, relative=relative, direction="destabilize", method=method
        )
        out.append(
            _Quantities(
                x_tss=float(ref.final_state[0]),
                x_tnadir=ref.peak_x1,
                x_trocof=ref.peak_x2,
                g_nadir=g.g_nadir,
                g_rocof=g.g_rocof,
                g_ss=g.g_ss,
            )
        )
    return out


def _max_pct_error(values, refs) -> float:
    """Max over batch and components of |a - b| / max(|b|, floor), in percent."""
    worst = 0.0
    for a, b in zip(values, refs):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        den = np.maximum(np.abs(b), PCT_FLOOR)
        err = float(np.max(np.abs(a - b) / den)) * 100.0
        if np.isnan(err) or err > worst:
            worst = err
    return worst


def _method_runner(name, thetas, p, eps_central, eps_forward, method):
    if name == "fmad":
        return lambda: _collect_fmad(thetas, p, "full", method)
    if name == "fmad-stream":
        return lambda: _collect_fmad(thetas, p, "streaming", method)
    if name == "fd-central":
        return lambda: _collect_fd(thetas, p, "central", eps_central, True, method)
    if name == "fd-forward":
        return lambda: _collect_fd(thetas, p, "forward", eps_forward, False, method)
    raise ValueError(f"unknown comparison method {name!r}")


def compare_methods(
    thetas,
    p: SystemParams,
    methods=("fmad-stream", "fd-central", "fd-forward"),
    reference: str = "fmad",
    runs: int = 5,
    eps_central: float = 1e-6,
    eps_forward: float = 1e-14,
    method: str = "euler",
    mem_interval: float = 1e-3,
) -> ComparisonReport:
    """Accuracy / wall-time / peak-RSS comparison of gradient methods.

    The central scheme uses a per-component relative step; the forward scheme
    uses the absolute eps_forward, whose round-off blow-up is the point of
    including it. Wall time is the mean over `runs` repetitions; memory is the
    peak resident-set delta at mem_interval cadence across those repetitions.
    """
    report = ComparisonReport(reference=reference, batch_size=len(thetas), runs=runs)

    ref_runner = _method_runner(reference, thetas, p, eps_central, eps_forward, method)
    ref_q = ref_runner()

    gn = max(float(np.max(np.abs(q.g_nadir))) for q in ref_q)
    gr = max(float(np.max(np.abs(q.g_rocof))) for q in ref_q)
    gs = max(float(np.max(np.abs(q.g_ss))) for q in ref_q)
    report.gss_ratio = gs / max(gn, gr) if max(gn, gr) > 0 else float("nan")

    from .dynamics import steady_state_exact

    ss_vals = np.array([steady_state_exact(t, p) for t in thetas])
    mean = float(np.mean(ss_vals))
    if mean != 0.0:
        report.ss_exact_spread = float((ss_vals.max() - ss_vals.min()) / abs(mean))

    for name in list(methods) + ([reference] if reference not in methods else []):
        runner = _method_runner(name, thetas, p, eps_central, eps_forward, method)
        runner()  # warm compile paths outside the timed region
        gc.collect()
        sampler = _RssPeak(interval=mem_interval)
        baseline = psutil.Process().memory_info().rss
        sampler.start()
        t_total = 0.0
        result = None
        for _ in range(runs):
            t0 = time.perf_counter()
            result = runner()
            t_total += time.perf_counter() - t0
        peak = sampler.stop()
        mem_delta = max(0, peak - baseline)

        report.methods[name] = MethodStats(
            time_s=t_total / runs,
            memory_bytes=int(mem_delta),
            err_x_tss=_max_pct_error([q.x_tss for q in result], [q.x_tss for q in ref_q]),
            err_x_tnadir=_max_pct_error([q.x_tnadir for q in result], [q.x_tnadir for q in ref_q]),
            err_x_trocof=_max_pct_error([q.x_trocof for q in result], [q.x_trocof for q in ref_q]),
            err_g_nadir=_max_pct_error([q.g_nadir for q in result], [q.g_nadir for q in ref_q]),
            err_g_rocof=_max_pct_error([q.g_rocof for q in result], [q.g_rocof for q in ref_q]),
            err_g_ss=_max_pct_error([q.g_ss for q in result], [q.g_ss for q in ref_q]),
        )
    return report
