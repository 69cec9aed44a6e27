"""Closed-loop frequency dynamics of a grid-forming converter under state feedback.

State is x = [omega, omega_dot] in per unit. The controller feeds both states
back into the effective inertia and damping:

    M(x) = m0 - k11*x1 - k12*x2
    D(x) = d0 - k21*x1 - k22*x2

which makes the closed loop a nonlinear second-order ODE in omega. All
operations here are pure functions; the time stepping lives in `engine`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InfeasibleGain,
    NoEquilibrium,
    NonPhysicalState,
    SingularInitialTangent,
)

# Below this effective inertia the model is treated as non-physical rather
# than integrated through the 1/M blow-up. Damping is left unconstrained.
M_MIN = 1e-6


@dataclass(frozen=True)
class Thresholds:
    """Admissible magnitudes for the three stability criteria.

    ss and nadir are in Hz, rocof in Hz/s.
    """

    ss: float = 0.5
    nadir: float = 0.8
    rocof: float = 1.0

    def __post_init__(self):
        if not (self.ss > 0 and self.nadir > 0 and self.rocof > 0):
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True)
class SystemParams:
    """Physical constants, disturbance, and run geometry.

    r: governor droop gain (p.u.)
    tau: governor time constant (s)
    m0: nominal inertia constant (s)
    d0: nominal damping (p.u.)
    delta_p: step power disturbance (p.u.)
    f_base: base frequency for p.u. -> Hz conversion (Hz)
    thresholds: stability limits, see Thresholds
    horizon_t: simulation end time (s)
    dt: integration step (s)
    """

    r: float = 0.06
    tau: float = 10.0
    m0: float = 6.0
    d0: float = 5.0
    delta_p: float = -0.12
    f_base: float = 50.0
    thresholds: Thresholds = field(default_factory=Thresholds)
    horizon_t: float = 60.0
    dt: float = 1e-3

    def __post_init__(self):
        if not (self.r > 0 and self.tau > 0 and self.m0 > 0):
            raise ValueError("r, tau, m0 must be positive")
        if not (self.dt > 0 and self.horizon_t >= self.dt):
            raise ValueError("need dt > 0 and horizon_t >= dt")
        if not self.f_base > 0:
            raise ValueError("f_base must be positive")


@dataclass(frozen=True)
class GainVector:
    """Feedback gains theta = [k11, k12, k21, k22] (dimensionless)."""

    k11: float = 0.0
    k12: float = 0.0
    k21: float = 0.0
    k22: float = 0.0

    @classmethod
    def from_array(cls, a) -> "GainVector":
        a = np.asarray(a, dtype=float)
        if a.shape != (4,):
            raise ValueError("gain array must have shape (4,)")
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.k11, self.k12, self.k21, self.k22])


@dataclass(frozen=True)
class GainValidity:
    feasible: bool
    discriminant: float


def _m_of(x, theta: GainVector, p: SystemParams) -> float:
    return p.m0 - theta.k11 * x[0] - theta.k12 * x[1]


def _check_inertia(x, theta: GainVector, p: SystemParams) -> float:
    m = _m_of(x, theta, p)
    if m <= M_MIN:
        raise NonPhysicalState(f"effective inertia collapsed: M(x) = {m:.6g} <= {M_MIN}")
    return m


def rhs(x, theta: GainVector, p: SystemParams) -> np.ndarray:
    """Time derivative [x1_dot, x2_dot] of the closed-loop state."""
    m = _check_inertia(x, theta, p)
    x1, x2 = float(x[0]), float(x[1])
    c = 1.0 / p.r
    d = p.d0 - theta.k21 * x1 - theta.k22 * x2
    n = p.delta_p - (c + d) * x1 - p.tau * d * x2
    return np.array([x2, n / (p.tau * m) - x2 / p.tau])


def jac_x(x, theta: GainVector, p: SystemParams) -> np.ndarray:
    """Exact 2x2 state Jacobian of rhs, chain terms through M(x), D(x) included."""
    m = _check_inertia(x, theta, p)
    x1, x2 = float(x[0]), float(x[1])
    c = 1.0 / p.r
    d = p.d0 - theta.k21 * x1 - theta.k22 * x2
    n = p.delta_p - (c + d) * x1 - p.tau * d * x2
    tm = p.tau * m
    s = x1 + p.tau * x2
    j21 = (-(c + d) + theta.k21 * s) / tm + n * theta.k11 / (tm * m)
    j22 = (theta.k22 * s - p.tau * d) / tm + n * theta.k12 / (tm * m) - 1.0 / p.tau
    return np.array([[0.0, 1.0], [j21, j22]])


def jac_theta(x, theta: GainVector, p: SystemParams) -> np.ndarray:
    """Exact 2x4 gain Jacobian of rhs; row 1 is identically zero."""
    m = _check_inertia(x, theta, p)
    x1, x2 = float(x[0]), float(x[1])
    c = 1.0 / p.r
    d = p.d0 - theta.k21 * x1 - theta.k22 * x2
    n = p.delta_p - (c + d) * x1 - p.tau * d * x2
    tm = p.tau * m
    s = x1 + p.tau * x2
    return np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [n * x1 / (tm * m), n * x2 / (tm * m), x1 * s / tm, x2 * s / tm],
        ]
    )


def validate_gains(theta: GainVector, p: SystemParams) -> GainValidity:
    """Feasibility of the post-disturbance initial condition for these gains."""
    disc = p.m0 * p.m0 - 4.0 * theta.k12 * p.delta_p
    return GainValidity(feasible=disc >= 0.0, discriminant=disc)


def initial_state(theta: GainVector, p: SystemParams) -> np.ndarray:
    """State [0, omega_dot(0+)] immediately after the step disturbance.

    omega_dot(0+) is the root of k12*v^2 - m0*v + delta_p = 0 that stays
    bounded as k12 -> 0, written in the rationalized form
    2*delta_p / (m0 + sqrt(disc)) so it is exact at k12 = 0 and free of
    cancellation for small k12.
    """
    disc = p.m0 * p.m0 - 4.0 * theta.k12 * p.delta_p
    if disc < 0.0:
        raise InfeasibleGain(f"no real post-step derivative: discriminant = {disc:.6g} < 0")
    v0 = 2.0 * p.delta_p / (p.m0 + math.sqrt(disc))
    return np.array([0.0, v0])


def initial_tangents(theta: GainVector, p: SystemParams) -> np.ndarray:
    """2x4 matrix of d(initial_state)/d(theta_i) as columns.

    Only the k12 column is nonzero; its second entry is v0^2 / sqrt(disc)
    (implicit derivative of the defining quadratic), which tends to
    delta_p^2 / m0^3 as k12 -> 0.
    """
    disc = p.m0 * p.m0 - 4.0 * theta.k12 * p.delta_p
    if disc < 0.0:
        raise InfeasibleGain(f"no real post-step derivative: discriminant = {disc:.6g} < 0")
    if disc == 0.0:
        raise SingularInitialTangent("initial-condition derivative diverges at zero discriminant")
    sq = math.sqrt(disc)
    v0 = 2.0 * p.delta_p / (p.m0 + sq)
    out = np.zeros((2, 4))
    out[1, 1] = v0 * v0 / sq
    return out


def analytic_solution_k0(t, p: SystemParams) -> np.ndarray:
    """Closed-form [omega, omega_dot] at time(s) t for theta = 0.

    With zero feedback the loop is linear second order; only the underdamped
    branch is implemented. Scalar or array t; array t yields shape (len(t), 2).
    """
    c = 1.0 / p.r
    wn2 = (c + p.d0) / (p.tau * p.m0)
    wn = math.sqrt(wn2)
    zeta = (p.d0 / p.m0 + 1.0 / p.tau) / (2.0 * wn)
    if zeta >= 1.0:
        raise ValueError(f"overdamped parameterization (zeta = {zeta:.4g}) not supported")
    w_ss = p.delta_p / (c + p.d0)
    wd = wn * math.sqrt(1.0 - zeta * zeta)

    y0 = -w_ss
    v0 = p.delta_p / p.m0
    a = y0
    b = (v0 + zeta * wn * y0) / wd

    t = np.asarray(t, dtype=float)
    env = np.exp(-zeta * wn * t)
    cos_, sin_ = np.cos(wd * t), np.sin(wd * t)
    y = env * (a * cos_ + b * sin_)
    ydot = env * ((wd * b - zeta * wn * a) * cos_ - (wd * a + zeta * wn * b) * sin_)
    return np.stack([w_ss + y, ydot], axis=-1)


def steady_state_exact(theta: GainVector, p: SystemParams) -> float:
    """Equilibrium frequency deviation: root of (1/r + d0)*x - k21*x^2 = delta_p.

    Selects the root continuous with delta_p / (1/r + d0) at k21 = 0, again in
    rationalized form. Only k21 enters; the other gains multiply x2 = 0 or
    shift M, which does not move the equilibrium.
    """
    c = 1.0 / p.r + p.d0
    disc = c * c - 4.0 * theta.k21 * p.delta_p
    if disc < 0.0:
        raise NoEquilibrium(f"no real equilibrium: discriminant = {disc:.6g} < 0")
    return 2.0 * p.delta_p / (c + math.sqrt(disc))
