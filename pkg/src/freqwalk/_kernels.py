"""Compiled fixed-step integration kernels.

Each kernel advances one sample; batching is a plain loop in `engine`, which
keeps batch results bitwise identical to sequential runs by construction.
Kernels release the GIL so a memory-sampling thread can observe them.

Status codes returned by kernels: 0 ok, 1 inertia collapse at the reported
step, 2 non-finite value at the reported step.
"""

import math

import numpy as np
from numba import njit

M_MIN = 1e-6

EULER = 0
RK4 = 1


@njit(cache=True, nogil=True)
def _deriv(x1, x2, tan, with_tan, kv, c, tau, m0, d0, dp, out_tan):
    """Augmented time derivative at one point.

    Returns (ok, f1, f2); writes d(tan)/dt into out_tan when with_tan.
    ok = False signals inertia collapse.
    """
    m = m0 - kv[0] * x1 - kv[1] * x2
    if m <= M_MIN:
        return False, 0.0, 0.0
    d = d0 - kv[2] * x1 - kv[3] * x2
    n = dp - (c + d) * x1 - tau * d * x2
    tm = tau * m
    f2 = n / tm - x2 / tau
    if with_tan:
        s = x1 + tau * x2
        j21 = (-(c + d) + kv[2] * s) / tm + n * kv[0] / (tm * m)
        j22 = (kv[3] * s - tau * d) / tm + n * kv[1] / (tm * m) - 1.0 / tau
        jt0 = n * x1 / (tm * m)
        jt1 = n * x2 / (tm * m)
        jt2 = x1 * s / tm
        jt3 = x2 * s / tm
        for i in range(4):
            out_tan[0, i] = tan[1, i]
            out_tan[1, i] = j21 * tan[0, i] + j22 * tan[1, i]
        out_tan[1, 0] += jt0
        out_tan[1, 1] += jt1
        out_tan[1, 2] += jt2
        out_tan[1, 3] += jt3
    return True, x2, f2


@njit(cache=True, nogil=True)
def _step(method, xbuf, tan, with_tan, dt, kv, c, tau, m0, d0, dp, d1, d2, d3, d4, tmp):
    """Advance xbuf (2,) and tan (2,4) in place by one step. Returns ok flag."""
    x1 = xbuf[0]
    x2 = xbuf[1]
    if method == EULER:
        ok, f1, f2 = _deriv(x1, x2, tan, with_tan, kv, c, tau, m0, d0, dp, d1)
        if not ok:
            return False
        if with_tan:
            for r in range(2):
                for i in range(4):
                    tan[r, i] = tan[r, i] + dt * d1[r, i]
        xbuf[0] = x1 + dt * f1
        xbuf[1] = x2 + dt * f2
        return True

    # classic RK4 applied to the full augmented state
    ok, a1, b1 = _deriv(x1, x2, tan, with_tan, kv, c, tau, m0, d0, dp, d1)
    if not ok:
        return False
    if with_tan:
        for r in range(2):
            for i in range(4):
                tmp[r, i] = tan[r, i] + 0.5 * dt * d1[r, i]
    ok, a2, b2 = _deriv(
        x1 + 0.5 * dt * a1, x2 + 0.5 * dt * b1, tmp, with_tan, kv, c, tau, m0, d0, dp, d2
    )
    if not ok:
        return False
    if with_tan:
        for r in range(2):
            for i in range(4):
                tmp[r, i] = tan[r, i] + 0.5 * dt * d2[r, i]
    ok, a3, b3 = _deriv(
        x1 + 0.5 * dt * a2, x2 + 0.5 * dt * b2, tmp, with_tan, kv, c, tau, m0, d0, dp, d3
    )
    if not ok:
        return False
    if with_tan:
        for r in range(2):
            for i in range(4):
                tmp[r, i] = tan[r, i] + dt * d3[r, i]
    ok, a4, b4 = _deriv(
        x1 + dt * a3, x2 + dt * b3, tmp, with_tan, kv, c, tau, m0, d0, dp, d4
    )
    if not ok:
        return False
    sixth = dt / 6.0
    if with_tan:
        for r in range(2):
            for i in range(4):
                tan[r, i] = tan[r, i] + sixth * (
                    d1[r, i] + 2.0 * d2[r, i] + 2.0 * d3[r, i] + d4[r, i]
                )
    xbuf[0] = x1 + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    xbuf[1] = x2 + sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    return True


@njit(cache=True, nogil=True)
def integrate_full(kv, c, tau, m0, d0, dp, dt, n_steps, with_tan, method, x0, tan0, states, tangents):
    """Fill states (n+1, 2) and tangents (n+1, 2, 4); returns (status, step)."""
    xbuf = x0.copy()
    tan = tan0.copy()
    d1 = np.empty((2, 4))
    d2 = np.empty((2, 4))
    d3 = np.empty((2, 4))
    d4 = np.empty((2, 4))
    tmp = np.empty((2, 4))
    states[0, 0] = xbuf[0]
    states[0, 1] = xbuf[1]
    if with_tan:
        tangents[0] = tan
    for k in range(n_steps):
        ok = _step(method, xbuf, tan, with_tan, dt, kv, c, tau, m0, d0, dp, d1, d2, d3, d4, tmp)
        if not ok:
            return 1, k
        if not (math.isfinite(xbuf[0]) and math.isfinite(xbuf[1])):
            return 2, k + 1
        states[k + 1, 0] = xbuf[0]
        states[k + 1, 1] = xbuf[1]
        if with_tan:
            tangents[k + 1] = tan
    if with_tan:
        for r in range(2):
            for i in range(4):
                if not math.isfinite(tan[r, i]):
                    return 2, n_steps
    return 0, n_steps


@njit(cache=True, nogil=True)
def integrate_stream(kv, c, tau, m0, d0, dp, dt, n_steps, with_tan, method, x0, tan0, cap1, cap2):
    """One pass with O(1) memory.

    Tracks the running argmax of |x1| and |x2| (grid index, signed value,
    tangent snapshot), the terminal state/tangents, and x1/x2 captured at the
    fixed grid indices cap1/cap2 (-1 disables capture).

    Returns (status, step, i1, v1, i2, v2, xT, tanT, tan1, tan2, x1_cap, x2_cap).
    """
    xbuf = x0.copy()
    tan = tan0.copy()
    d1 = np.empty((2, 4))
    d2 = np.empty((2, 4))
    d3 = np.empty((2, 4))
    d4 = np.empty((2, 4))
    tmp = np.empty((2, 4))

    i1 = 0
    v1 = xbuf[0]
    m1 = abs(xbuf[0])
    tan1 = tan.copy()
    i2 = 0
    v2 = xbuf[1]
    m2 = abs(xbuf[1])
    tan2 = tan.copy()
    x1_cap = np.nan
    x2_cap = np.nan
    if cap1 == 0:
        x1_cap = xbuf[0]
    if cap2 == 0:
        x2_cap = xbuf[1]

    for k in range(n_steps):
        ok = _step(method, xbuf, tan, with_tan, dt, kv, c, tau, m0, d0, dp, d1, d2, d3, d4, tmp)
        if not ok:
            return 1, k, i1, v1, i2, v2, xbuf, tan, tan1, tan2, x1_cap, x2_cap
        if not (math.isfinite(xbuf[0]) and math.isfinite(xbuf[1])):
            return 2, k + 1, i1, v1, i2, v2, xbuf, tan, tan1, tan2, x1_cap, x2_cap
        idx = k + 1
        # strict > keeps the earliest index on ties
        if abs(xbuf[0]) > m1:
            m1 = abs(xbuf[0])
            v1 = xbuf[0]
            i1 = idx
            if with_tan:
                tan1[:] = tan
        if abs(xbuf[1]) > m2:
            m2 = abs(xbuf[1])
            v2 = xbuf[1]
            i2 = idx
            if with_tan:
                tan2[:] = tan
        if idx == cap1:
            x1_cap = xbuf[0]
        if idx == cap2:
            x2_cap = xbuf[1]

    if with_tan:
        for r in range(2):
            for i in range(4):
                if not math.isfinite(tan[r, i]):
                    return 2, n_steps, i1, v1, i2, v2, xbuf, tan, tan1, tan2, x1_cap, x2_cap
    return 0, n_steps, i1, v1, i2, v2, xbuf, tan, tan1, tan2, x1_cap, x2_cap


@njit(cache=True, nogil=True)
def integrate_full_directional(kv, c, tau, m0, d0, dp, dt, n_steps, x0, s0, v, states, dir_tan):
    """Single directional tangent s(t) with ds/dt = J_x s + J_theta v.

    Fills states (n+1, 2) and dir_tan (n+1, 2); returns (status, step).
    """
    xbuf = x0.copy()
    s = s0.copy()
    d1 = np.empty((2, 4))
    states[0, 0] = xbuf[0]
    states[0, 1] = xbuf[1]
    dir_tan[0, 0] = s[0]
    dir_tan[0, 1] = s[1]
    dummy = np.zeros((2, 4))
    for k in range(n_steps):
        x1 = xbuf[0]
        x2 = xbuf[1]
        ok, f1, f2 = _deriv(x1, x2, dummy, False, kv, c, tau, m0, d0, dp, d1)
        if not ok:
            return 1, k
        m = m0 - kv[0] * x1 - kv[1] * x2
        d = d0 - kv[2] * x1 - kv[3] * x2
        n = dp - (c + d) * x1 - tau * d * x2
        tm = tau * m
        ss = x1 + tau * x2
        j21 = (-(c + d) + kv[2] * ss) / tm + n * kv[0] / (tm * m)
        j22 = (kv[3] * ss - tau * d) / tm + n * kv[1] / (tm * m) - 1.0 / tau
        force = (
            (n * x1 / (tm * m)) * v[0]
            + (n * x2 / (tm * m)) * v[1]
            + (x1 * ss / tm) * v[2]
            + (x2 * ss / tm) * v[3]
        )
        ds0 = s[1]
        ds1 = j21 * s[0] + j22 * s[1] + force
        s[0] = s[0] + dt * ds0
        s[1] = s[1] + dt * ds1
        xbuf[0] = x1 + dt * f1
        xbuf[1] = x2 + dt * f2
        if not (math.isfinite(xbuf[0]) and math.isfinite(xbuf[1])):
            return 2, k + 1
        states[k + 1, 0] = xbuf[0]
        states[k + 1, 1] = xbuf[1]
        dir_tan[k + 1, 0] = s[0]
        dir_tan[k + 1, 1] = s[1]
    return 0, n_steps
