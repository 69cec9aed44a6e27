"""Run configuration: one JSON document with sections
{system, solver, criteria, sampler, bench, output}.

Parsing is strict: unknown keys anywhere are rejected so typos cannot
silently fall back to defaults. A config re-serializes losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .dynamics import SystemParams, Thresholds
from .errors import ConfigError
from .sampler import SamplerConfig


@dataclass
class BenchSettings:
    n_thetas: int = 20
    runs: int = 5
    eps_central: float = 1e-6        # relative, per component
    eps_forward: float = 1e-14       # absolute; chosen to sit in the round-off regime
    methods: tuple = ("fmad-stream", "fd-central", "fd-forward")
    reference: str = "fmad"
    seed: int = 42


@dataclass
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    bench: BenchSettings = field(default_factory=BenchSettings)
    timestamp: bool = True

    @property
    def solver_method(self) -> str:
        return self.sampler.method


def _take(section: dict, key: str, default):
    if key in section:
        return section.pop(key)
    return default


def _reject_leftovers(section: dict, where: str):
    if section:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(section))}")


def _section(doc: dict, name: str) -> dict:
    sec = doc.pop(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be an object")
    return dict(sec)


def from_dict(doc: dict) -> RunConfig:
    doc = dict(doc)
    defaults = RunConfig()
    dp, ds, db = defaults.params, defaults.sampler, defaults.bench

    system = _section(doc, "system")
    solver = _section(doc, "solver")
    criteria = _section(doc, "criteria")
    sampler = _section(doc, "sampler")
    bench = _section(doc, "bench")
    output = _section(doc, "output")
    if doc:
        raise ConfigError(f"unknown top-level section(s): {', '.join(sorted(doc))}")

    thr_doc = criteria.pop("thresholds", None)
    if thr_doc is None:
        thresholds = dp.thresholds
    else:
        thr_doc = dict(thr_doc)
        thresholds = Thresholds(
            ss=float(_take(thr_doc, "ss", dp.thresholds.ss)),
            nadir=float(_take(thr_doc, "nadir", dp.thresholds.nadir)),
            rocof=float(_take(thr_doc, "rocof", dp.thresholds.rocof)),
        )
        _reject_leftovers(thr_doc, "criteria.thresholds")

    try:
        params = SystemParams(
            r=float(_take(system, "r", dp.r)),
            tau=float(_take(system, "tau", dp.tau)),
            m0=float(_take(system, "m0", dp.m0)),
            d0=float(_take(system, "d0", dp.d0)),
            delta_p=float(_take(system, "delta_p", dp.delta_p)),
            f_base=float(_take(criteria, "f_base", dp.f_base)),
            thresholds=thresholds,
            horizon_t=float(_take(solver, "horizon_t", dp.horizon_t)),
            dt=float(_take(solver, "dt", dp.dt)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _reject_leftovers(system, "system")

    method = str(_take(solver, "method", ds.method))
    _reject_leftovers(solver, "solver")

    enabled = tuple(_take(criteria, "enabled", list(ds.enabled)))
    _reject_leftovers(criteria, "criteria")

    samp = SamplerConfig(
        alpha=float(_take(sampler, "alpha", ds.alpha)),
        max_iter=int(_take(sampler, "max_iter", ds.max_iter)),
        batch_size=int(_take(sampler, "batch_size", ds.batch_size)),
        rule=str(_take(sampler, "rule", ds.rule)),
        margin_delta=float(_take(sampler, "margin_delta", ds.margin_delta)),
        direction_policy=str(_take(sampler, "direction", ds.direction_policy)),
        enabled=enabled,
        normalize_step=bool(_take(sampler, "normalize_step", ds.normalize_step)),
        violated_only=bool(_take(sampler, "violated_only", ds.violated_only)),
        backtrack_limit=int(_take(sampler, "backtrack_limit", ds.backtrack_limit)),
        seed=int(_take(sampler, "seed", ds.seed)),
        n_seeds=int(_take(sampler, "n_seeds", ds.n_seeds)),
        mean=float(_take(sampler, "mean", ds.mean)),
        std=float(_take(sampler, "std", ds.std)),
        method=method,
    )
    _reject_leftovers(sampler, "sampler")
    try:
        samp.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    bench_cfg = BenchSettings(
        n_thetas=int(_take(bench, "n_thetas", db.n_thetas)),
        runs=int(_take(bench, "runs", db.runs)),
        eps_central=float(_take(bench, "eps_central", db.eps_central)),
        eps_forward=float(_take(bench, "eps_forward", db.eps_forward)),
        methods=tuple(_take(bench, "methods", list(db.methods))),
        reference=str(_take(bench, "reference", db.reference)),
        seed=int(_take(bench, "seed", db.seed)),
    )
    _reject_leftovers(bench, "bench")

    timestamp = bool(_take(output, "timestamp", True))
    _reject_leftovers(output, "output")

    return RunConfig(params=params, sampler=samp, bench=bench_cfg, timestamp=timestamp)


def to_dict(cfg: RunConfig) -> dict:
    p, s, b = cfg.params, cfg.sampler, cfg.bench
    return {
        "system": {"r": p.r, "tau": p.tau, "m0": p.m0, "d0": p.d0, "delta_p": p.delta_p},
        "solver": {"dt": p.dt, "horizon_t": p.horizon_t, "method": s.method},
        "criteria": {
            "f_base": p.f_base,
            "enabled": list(s.enabled),
            "thresholds": {
                "ss": p.thresholds.ss,
                "nadir": p.thresholds.nadir,
                "rocof": p.thresholds.rocof,
            },
        },
        "sampler": {
            "alpha": s.alpha,
            "max_iter": s.max_iter,
            "batch_size": s.batch_size,
            "rule": s.rule,
            "margin_delta": s.margin_delta,
            "direction": s.direction_policy,
            "normalize_step": s.normalize_step,
            "violated_only": s.violated_only,
            "backtrack_limit": s.backtrack_limit,
            "seed": s.seed,
            "n_seeds": s.n_seeds,
            "mean": s.mean,
            "std": s.std,
        },
        "bench": {
            "n_thetas": b.n_thetas,
            "runs": b.runs,
            "eps_central": b.eps_central,
            "eps_forward": b.eps_forward,
            "methods": list(b.methods),
            "reference": b.reference,
            "seed": b.seed,
        },
        "output": {"timestamp": cfg.timestamp},
    }


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return from_dict(doc)


def save_config(cfg: RunConfig, path):
    with open(path, "w") as fh:
        json.dump(to_dict(cfg), fh, indent=2)
        fh.write("\n")
