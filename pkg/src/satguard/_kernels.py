"""Hot loops: impulse propagation and the closed-loop integrator.

Everything here sticks to the numba nopython subset (scalars, contiguous
float64 arrays, explicit loops) so that ``_jit.njit`` can be a no-op.
"""

import math

import numpy as np

from ._jit import njit

SIG_CONSTANT = 0
SIG_SINUSOID = 1
SIG_PIECEWISE = 2
SIG_REPLAY = 3

REGION_MINUS = -1
REGION_ZERO = 0
REGION_PLUS = 1


@njit(cache=True)
def impulse_samples(E, b, c, n_steps):
    """c @ E**k @ b for k = 0..n_steps, with E = expm(A h)."""
    n = b.shape[0]
    x = b.copy()
    tmp = np.empty(n)
    out = np.empty(n_steps + 1)
    for k in range(n_steps + 1):
        acc = 0.0
        for i in range(n):
            acc += c[i] * x[i]
        out[k] = acc
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += E[i, j] * x[j]
            tmp[i] = s
        for i in range(n):
            x[i] = tmp[i]
    return out


@njit(cache=True)
def signal_value(kind, offset, coef, tab, t):
    if kind == SIG_CONSTANT:
        return offset
    if kind == SIG_SINUSOID:
        v = offset
        for i in range(coef.shape[0]):
            v += coef[i, 0] * math.sin(coef[i, 1] * t + coef[i, 2])
        return v
    n = tab.shape[0]
    if kind == SIG_PIECEWISE:
        if t < tab[0, 0]:
            return tab[0, 1]
        lo = 0
        hi = n - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if tab[mid, 0] <= t:
                lo = mid
            else:
                hi = mid - 1
        return tab[lo, 1]
    # replay: linear interpolation, clamped (range is checked by the caller)
    if t <= tab[0, 0]:
        return tab[0, 1]
    if t >= tab[n - 1, 0]:
        return tab[n - 1, 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tab[mid, 0] <= t:
            lo = mid
        else:
            hi = mid
    frac = (t - tab[lo, 0]) / (tab[hi, 0] - tab[lo, 0])
    return tab[lo, 1] + frac * (tab[hi, 1] - tab[lo, 1])


@njit(cache=True)
def _clamp(v, lo, hi):
    if v > hi:
        return hi
    if v < lo:
        return lo
    return v


@njit(cache=True)
def _region(s, umin, umax):
    if s >= umax:
        return REGION_PLUS
    if s <= umin:
        return REGION_MINUS
    return REGION_ZERO


@njit(cache=True)
def _closed_loop_rhs(x, dx, t, v, yd, A, B1, B2, C, alpha, lam, lamf, umin, umax,
                     g_kind, g_off, g_coef, g_tab, w_kind, w_off, w_coef, w_tab):
    n = A.shape[0]
    y = x[0]
    z = x[1]
    u = _clamp(lam * (yd - y) + z, umin, umax)
    ell = 0.0
    for i in range(n):
        ell += C[i] * x[2 + i]
    g = signal_value(g_kind, g_off, g_coef, g_tab, t)
    w = signal_value(w_kind, w_off, w_coef, w_tab, t)
    dx[0] = alpha * (u - g + ell)
    dx[1] = lamf * (u - z)
    for i in range(n):
        s = B1[i] * v + B2[i] * w
        for j in range(n):
            s += A[i, j] * x[2 + j]
        dx[2 + i] = s


@njit(cache=True)
def closed_loop(A, B1, B2, C, alpha, lam, lamf, umin, umax, window_steps,
                g_kind, g_off, g_coef, g_tab, w_kind, w_off, w_coef, w_tab,
                yd_tab, x0, h, n_steps, record_every):
    """Fixed-step RK4 of the saturated feedback loop.

    State is (y, z, eta...). The control rate is the backward difference of
    accepted-step controls; the windowed sup feeding the internal dynamics
    is held at its value from the start of each step.

    Returns (rows, n_rows, fault_step). Row layout:
    t, y, z, u, udot, udot_sup, eta..., ell, g, w, region, y_d.
    fault_step is -1 on success, else the last finite step index.
    """
    n = A.shape[0]
    nx = n + 2
    ncol = 11 + n
    n_rec = n_steps // record_every + 1
    rows = np.empty((n_rec, ncol))

    # monotone deque over step indices, values non-increasing front to back
    cap = window_steps + 2
    dq_idx = np.empty(cap, dtype=np.int64)
    dq_val = np.empty(cap)
    head = 0
    size = 0

    x = x0.copy()
    k1 = np.empty(nx)
    k2 = np.empty(nx)
    k3 = np.empty(nx)
    k4 = np.empty(nx)
    xs = np.empty(nx)

    t = 0.0
    yd = signal_value(SIG_PIECEWISE, 0.0, g_coef, yd_tab, t)
    u = _clamp(lam * (yd - x[0]) + x[1], umin, umax)
    udot = 0.0
    v = 0.0
    rec = 0
    fault = -1

    for k in range(n_steps + 1):
        if k % record_every == 0:
            r = rows[rec]
            r[0] = t
            r[1] = x[0]
            r[2] = x[1]
            r[3] = u
            r[4] = udot
            r[5] = v
            ell = 0.0
            for i in range(n):
                r[6 + i] = x[2 + i]
                ell += C[i] * x[2 + i]
            r[6 + n] = ell
            r[7 + n] = signal_value(g_kind, g_off, g_coef, g_tab, t)
            r[8 + n] = signal_value(w_kind, w_off, w_coef, w_tab, t)
            r[9 + n] = _region(x[1] - lam * (x[0] - yd), umin, umax)
            r[10 + n] = yd
            rec += 1
        if k == n_steps:
            break

        _closed_loop_rhs(x, k1, t, v, yd, A, B1, B2, C, alpha, lam, lamf, umin, umax,
                         g_kind, g_off, g_coef, g_tab, w_kind, w_off, w_coef, w_tab)
        for i in range(nx):
            xs[i] = x[i] + 0.5 * h * k1[i]
        _closed_loop_rhs(xs, k2, t + 0.5 * h, v, yd, A, B1, B2, C, alpha, lam, lamf, umin, umax,
                         g_kind, g_off, g_coef, g_tab, w_kind, w_off, w_coef, w_tab)
        for i in range(nx):
            xs[i] = x[i] + 0.5 * h * k2[i]
        _closed_loop_rhs(xs, k3, t + 0.5 * h, v, yd, A, B1, B2, C, alpha, lam, lamf, umin, umax,
                         g_kind, g_off, g_coef, g_tab, w_kind, w_off, w_coef, w_tab)
        for i in range(nx):
            xs[i] = x[i] + h * k3[i]
        _closed_loop_rhs(xs, k4, t + h, v, yd, A, B1, B2, C, alpha, lam, lamf, umin, umax,
                         g_kind, g_off, g_coef, g_tab, w_kind, w_off, w_coef, w_tab)
        finite = True
        for i in range(nx):
            xs[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not math.isfinite(xs[i]):
                finite = False
        if not finite:
            fault = k
            break
        for i in range(nx):
            x[i] = xs[i]

        t = (k + 1) * h
        yd = signal_value(SIG_PIECEWISE, 0.0, g_coef, yd_tab, t)
        u_new = _clamp(lam * (yd - x[0]) + x[1], umin, umax)
        udot = (u_new - u) / h
        u = u_new

        # push |udot| at step k+1, evict anything older than the window
        a = abs(udot)
        while size > 0 and dq_val[(head + size - 1) % cap] <= a:
            size -= 1
        dq_idx[(head + size) % cap] = k + 1
        dq_val[(head + size) % cap] = a
        size += 1
        while dq_idx[head] < k + 1 - window_steps:
            head = (head + 1) % cap
            size -= 1
        v = dq_val[head]

    return rows, rec, fault
