"""Stability criteria: critical times, Hz-valued metrics, and the 0/1 label."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .dynamics import GainVector, SystemParams
from .engine import ErrorRecord, StreamSummary, Trajectory, integrate_batch

# canonical criterion order
CRITERIA = ("rocof", "nadir", "ss")
DEFAULT_ENABLED = ("rocof", "nadir")


@dataclass(frozen=True)
class CriticalTimes:
    """Grid times of the worst RoCoF, the nadir, and the horizon end."""

    t_rocof: float
    t_nadir: float
    t_ss: float
    idx_rocof: int
    idx_nadir: int
    idx_ss: int


@dataclass(frozen=True)
class StabilityReport:
    critical: CriticalTimes
    rocof_hz_s: float
    nadir_hz: float
    ss_hz: float
    pass_rocof: bool
    pass_nadir: bool
    pass_ss: bool
    label: int                     # 0 stable, 1 unstable (enabled criteria only)
    enabled: tuple

    def value(self, criterion: str) -> float:
        return {"rocof": self.rocof_hz_s, "nadir": self.nadir_hz, "ss": self.ss_hz}[criterion]

    def passed(self, criterion: str) -> bool:
        return {"rocof": self.pass_rocof, "nadir": self.pass_nadir, "ss": self.pass_ss}[criterion]


@dataclass(frozen=True)
class InvalidSample:
    """Marker for samples that cannot be labeled (infeasible or failed run)."""

    theta: GainVector
    kind: str
    message: str


LabelOutcome = Union[StabilityReport, InvalidSample]


def _check_enabled(enabled) -> tuple:
    enabled = tuple(enabled)
    for c in enabled:
        if c not in CRITERIA:
            raise ValueError(f"unknown criterion {c!r}")
    if not enabled:
        raise ValueError("need at least one enabled criterion")
    return enabled


def critical_times(traj: Union[Trajectory, StreamSummary]) -> CriticalTimes:
    """Argmax times of |x2| and |x1| over the grid (t = 0 included, earliest tie)."""
    if isinstance(traj, StreamSummary):
        i2, i1, i_ss = traj.idx_peak_x2, traj.idx_peak_x1, traj.n_steps
        dt = traj.dt
        return CriticalTimes(i2 * dt, i1 * dt, i_ss * dt, i2, i1, i_ss)
    # np.argmax returns the first occurrence, which is the earliest grid time
    i2 = int(np.argmax(np.abs(traj.states[:, 1])))
    i1 = int(np.argmax(np.abs(traj.states[:, 0])))
    i_ss = len(traj.times) - 1
    return CriticalTimes(
        float(traj.times[i2]), float(traj.times[i1]), float(traj.times[i_ss]), i2, i1, i_ss
    )


def evaluate(
    traj: Union[Trajectory, StreamSummary],
    p: SystemParams,
    enabled=DEFAULT_ENABLED,
) -> StabilityReport:
    """Hz-valued criteria at the critical times and the resulting label.

    Pass is non-strict (|value| <= threshold), so boundary cases count stable.
    Disabled criteria are still reported but do not enter the label.
    """
    enabled = _check_enabled(enabled)
    crit = critical_times(traj)
    if isinstance(traj, StreamSummary):
        rocof_pu, nadir_pu, ss_pu = traj.peak_x2, traj.peak_x1, float(traj.final_state[0])
    else:
        rocof_pu = float(traj.states[crit.idx_rocof, 1])
        nadir_pu = float(traj.states[crit.idx_nadir, 0])
        ss_pu = float(traj.states[-1, 0])

    rocof = rocof_pu * p.f_base
    nadir = nadir_pu * p.f_base
    ss = ss_pu * p.f_base
    th = p.thresholds
    ok = {
        "rocof": abs(rocof) <= th.rocof,
        "nadir": abs(nadir) <= th.nadir,
        "ss": abs(ss) <= th.ss,
    }
    label = 0 if all(ok[c] for c in enabled) else 1
    return StabilityReport(
        critical=crit,
        rocof_hz_s=rocof,
        nadir_hz=nadir,
        ss_hz=ss,
        pass_rocof=ok["rocof"],
        pass_nadir=ok["nadir"],
        pass_ss=ok["ss"],
        label=label,
        enabled=enabled,
    )


def label_dataset(thetas, p: SystemParams, enabled=DEFAULT_ENABLED, method: str = "euler"):
    """One labeling outcome per gain vector; failures become InvalidSample markers."""
    enabled = _check_enabled(enabled)
    results = integrate_batch(thetas, p, with_tangents=False, storage="streaming", method=method)
    out = []
    for theta, res in zip(thetas, results):
        if isinstance(res, ErrorRecord):
            out.append(InvalidSample(theta=theta, kind=res.kind, message=res.message))
        else:
            out.append(evaluate(res, p, enabled))
    return out
