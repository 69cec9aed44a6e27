"""Fixed-step integration of the closed loop and its parameter tangents.

Two storage modes: "full" materializes the whole trajectory (states and,
optionally, the 2x4 tangent block per grid point); "streaming" keeps O(1)
state and only the running peaks, terminal values, and tangent snapshots the
downstream criteria need.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .dynamics import GainVector, SystemParams, initial_state, initial_tangents, validate_gains
from .errors import FreqwalkError, InfeasibleGain, NonFiniteState, NonPhysicalState

METHODS = {"euler": _kernels.EULER, "rk4": _kernels.RK4}


@dataclass
class Trajectory:
    """Uniform-grid solution; tangents[k] is d(state_k)/d(theta) when present."""

    times: np.ndarray            # (n+1,)
    states: np.ndarray           # (n+1, 2) columns [omega, omega_dot]
    tangents: Optional[np.ndarray] = None   # (n+1, 2, 4)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass
class StreamSummary:
    """O(1) reduction of a run: peaks, terminal values, optional captures."""

    n_steps: int
    dt: float
    idx_peak_x1: int             # grid argmax of |x1|, earliest on ties
    peak_x1: float               # signed x1 at that index
    idx_peak_x2: int
    peak_x2: float
    final_state: np.ndarray      # (2,)
    final_tangents: Optional[np.ndarray] = None    # (2, 4)
    tangents_at_peak_x1: Optional[np.ndarray] = None
    tangents_at_peak_x2: Optional[np.ndarray] = None
    x1_at_capture: float = float("nan")
    x2_at_capture: float = float("nan")

    @property
    def horizon_t(self) -> float:
        return self.n_steps * self.dt


@dataclass
class ErrorRecord:
    """Per-sample failure inside a batch; batches never abort as a whole."""

    kind: str
    message: str
    theta: GainVector
    time: Optional[float] = None
    step: Optional[int] = None

    @classmethod
    def from_exception(cls, exc: FreqwalkError, theta: GainVector) -> "ErrorRecord":
        return cls(
            kind=type(exc).__name__,
            message=str(exc),
            theta=theta,
            time=getattr(exc, "time", None),
            step=getattr(exc, "step", None),
        )


def n_steps_for(p: SystemParams) -> int:
    """Grid size; dt must divide horizon_t within 1e-9."""
    n_real = p.horizon_t / p.dt
    n = int(round(n_real))
    if n < 1 or abs(n_real - n) > 1e-9:
        raise ValueError(f"dt = {p.dt} does not divide horizon_t = {p.horizon_t}")
    return n


def _raise_for_status(status: int, step: int, dt: float):
    if status == 1:
        t = step * dt
        raise NonPhysicalState(
            f"effective inertia collapsed at t = {t:.6g} s", time=t, step=step
        )
    if status == 2:
        t = step * dt
        raise NonFiniteState(f"state overflowed at t = {t:.6g} s", time=t, step=step)


def integrate(
    theta: GainVector,
    p: SystemParams,
    with_tangents: bool = False,
    storage: str = "full",
    method: str = "euler",
    capture_indices: Optional[tuple] = None,
):
    """Integrate one sample from its post-disturbance initial condition.

    capture_indices = (i1, i2) additionally records x1 at grid index i1 and
    x2 at grid index i2 in streaming mode (used by frozen-time differencing).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    verdict = validate_gains(theta, p)
    if not verdict.feasible:
        raise InfeasibleGain(
            f"gains infeasible: discriminant = {verdict.discriminant:.6g} < 0"
        )
    n = n_steps_for(p)
    x0 = initial_state(theta, p)
    tan0 = initial_tangents(theta, p) if with_tangents else np.zeros((2, 4))
    kv = theta.as_array()
    args = (kv, 1.0 / p.r, p.tau, p.m0, p.d0, p.delta_p, p.dt, n, with_tangents, METHODS[method], x0, tan0)

    if storage == "full":
        states = np.empty((n + 1, 2))
        tangents = np.empty((n + 1, 2, 4)) if with_tangents else np.empty((1, 2, 4))
        status, step = _kernels.integrate_full(*args, states, tangents)
        _raise_for_status(status, step, p.dt)
        times = np.arange(n + 1) * p.dt
        return Trajectory(times=times, states=states, tangents=tangents if with_tangents else None)

    if storage == "streaming":
        cap1, cap2 = capture_indices if capture_indices is not None else (-1, -1)
        (status, step, i1, v1, i2, v2, x_t, tan_t, tan1, tan2, x1c, x2c) = _kernels.integrate_stream(
            *args, cap1, cap2
        )
        _raise_for_status(status, step, p.dt)
        return StreamSummary(
            n_steps=n,
            dt=p.dt,
            idx_peak_x1=int(i1),
            peak_x1=float(v1),
            idx_peak_x2=int(i2),
            peak_x2=float(v2),
            final_state=x_t.copy(),
            final_tangents=tan_t.copy() if with_tangents else None,
            tangents_at_peak_x1=tan1.copy() if with_tangents else None,
            tangents_at_peak_x2=tan2.copy() if with_tangents else None,
            x1_at_capture=float(x1c),
            x2_at_capture=float(x2c),
        )

    raise ValueError(f"unknown storage mode {storage!r}")


def integrate_directional(theta: GainVector, p: SystemParams, v) -> Trajectory:
    """Euler run carrying a single tangent seeded along direction v in gain space.

    The returned Trajectory has tangents of shape (n+1, 2): the directional
    sensitivity d(state)/d(epsilon) for theta + epsilon*v.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (4,):
        raise ValueError("direction must have shape (4,)")
    verdict = validate_gains(theta, p)
    if not verdict.feasible:
        raise InfeasibleGain(
            f"gains infeasible: discriminant = {verdict.discriminant:.6g} < 0"
        )
    n = n_steps_for(p)
    x0 = initial_state(theta, p)
    s0 = initial_tangents(theta, p) @ v
    states = np.empty((n + 1, 2))
    dir_tan = np.empty((n + 1, 2))
    status, step = _kernels.integrate_full_directional(
        theta.as_array(), 1.0 / p.r, p.tau, p.m0, p.d0, p.delta_p, p.dt, n, x0, s0, v, states, dir_tan
    )
    _raise_for_status(status, step, p.dt)
    return Trajectory(times=np.arange(n + 1) * p.dt, states=states, tangents=dir_tan)


def integrate_batch(
    thetas,
    p: SystemParams,
    with_tangents: bool = False,
    storage: str = "full",
    method: str = "euler",
    capture_indices_per_theta=None,
):
    """Per-sample integrate over a batch; output order matches input order.

    Failures become ErrorRecord entries instead of aborting the batch.
    """
    out = []
    for i, theta in enumerate(thetas):
        caps = None
        if capture_indices_per_theta is not None:
            caps = capture_indices_per_theta[i]
        try:
            out.append(
                integrate(theta, p, with_tangents=with_tangents, storage=storage,
                          method=method, capture_indices=caps)
            )
        except FreqwalkError as exc:
            out.append(ErrorRecord.from_exception(exc, theta))
    return out


@dataclass
class ConvergenceProbe:
    dts: list
    max_errors: list
    order: Optional[float]


def convergence_probe(p: SystemParams, dts, state_row: int = 0) -> ConvergenceProbe:
    """Observed order of the integrator against the closed-form zero-gain solution.

    Fits log(max abs error on the chosen state row) against log(dt); a single
    dt yields the error but no order.
    """
    from .dynamics import analytic_solution_k0

    theta0 = GainVector()
    errs = []
    for dt in dts:
        p_dt = replace(p, dt=float(dt))
        traj = integrate(theta0, p_dt, with_tangents=False, storage="full")
        exact = analytic_solution_k0(traj.times, p_dt)
        errs.append(float(np.max(np.abs(traj.states[:, state_row] - exact[:, state_row]))))
    order = None
    if len(dts) >= 2:
        slope, _ = np.polyfit(np.log(np.asarray(dts, dtype=float)), np.log(errs), 1)
        order = float(slope)
    return ConvergenceProbe(dts=list(dts), max_errors=errs, order=order)
