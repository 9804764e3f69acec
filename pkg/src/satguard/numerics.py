"""Numeric kernel: matrix exponential, response quadratures, RK4, windowed max."""

import math
import os
import warnings
from collections import deque

import numpy as np

from . import _kernels
from .errors import DimensionError, FeasibilityError, HorizonWarning, InputError, IntegrationFault, OrderingError

DEFAULT_QUAD_STEP = 1e-3
HURWITZ_MARGIN = 1e-9
# time constants of the slowest mode covered by the default quadrature horizon
HORIZON_TIME_CONSTANTS = 25.0
TAIL_TOLERANCE = 1e-8

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
         33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0),
}
# 1-norm thresholds below which degree m is accurate to unit roundoff (Higham 2005)
_THETA = ((3, 1.495585217958292e-2), (5, 2.539398330063230e-1), (7, 9.504178996162932e-1),
          (9, 2.097847961257068e0), (13, 5.371920351148152e0))


def as_matrix(a, name="matrix"):
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} has non-finite entries")
    return m


def _pade_uv(A, m):
    b = _PADE[m]
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
        return U, V
    powers = [ident, A2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ A2)
    U = np.zeros_like(A)
    V = np.zeros_like(A)
    for j in range(m, 0, -2):
        U += b[j] * powers[j // 2]
    U = A @ U
    for j in range(m - 1, -1, -2):
        V += b[j] * powers[j // 2]
    return U, V


def mat_exp(A, t=1.0):
    """exp(A t) by scaling and squaring with a diagonal Pade approximant."""
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got {A.shape}")
    if not math.isfinite(t) or t < 0:
        raise InputError(f"t must be finite and >= 0, got {t}")
    M = A * t
    norm = np.linalg.norm(M, 1)
    s = 0
    for m, theta in _THETA:
        if norm <= theta:
            break
    else:
        m = 13
        s = max(0, int(math.ceil(math.log2(norm / _THETA[-1][1]))))
        M = M / 2.0 ** s
    U, V = _pade_uv(M, m)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


def spectral_abscissa(A):
    return float(np.max(np.linalg.eigvals(as_matrix(A, "A")).real))


def check_hurwitz(A):
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got {A.shape}")
    a = spectral_abscissa(A)
    if not a < -HURWITZ_MARGIN:
        raise FeasibilityError(f"A is not Hurwitz (max real part of eigenvalues = {a:.6g})")
    return A


def default_horizon(A):
    return HORIZON_TIME_CONSTANTS / -spectral_abscissa(A)


def default_quad_step():
    raw = os.environ.get("SATGUARD_QUAD_STEP")
    if not raw:
        return DEFAULT_QUAD_STEP
    try:
        step = float(raw)
    except ValueError:
        raise InputError(f"SATGUARD_QUAD_STEP={raw!r} is not a number") from None
    if not step > 0:
        raise InputError(f"SATGUARD_QUAD_STEP must be > 0, got {step}")
    return step


def _siso(A, B, C):
    A = check_hurwitz(A)
    n = A.shape[0]
    b = as_matrix(B, "B")
    c = as_matrix(C, "C")
    if b.shape == (1, n) and n > 1:
        b = b.T
    if c.shape == (n, 1) and n > 1:
        c = c.T
    if b.shape != (n, 1) or c.shape != (1, n):
        raise DimensionError(f"C {c.shape} * B {b.shape} does not give a scalar for n={n}")
    return A, np.ascontiguousarray(b[:, 0]), np.ascontiguousarray(c[0])


def impulse_response(A, B, C, horizon=None, step=None, even=False):
    """Sample C exp(A s) B on a uniform grid over [0, horizon].

    Returns (grid step, samples). With ``even`` the number of intervals is
    rounded up to an even count (Simpson).
    """
    A, b, c = _siso(A, B, C)
    horizon = default_horizon(A) if horizon is None else float(horizon)
    step = default_quad_step() if step is None else float(step)
    if not (horizon > 0 and step > 0):
        raise InputError("horizon and step must be positive")
    n_steps = max(2, int(math.ceil(horizon / step - 1e-9)))
    if even and n_steps % 2:
        n_steps += 1
    dt = horizon / n_steps
    E = np.ascontiguousarray(mat_exp(A, dt))
    return dt, _kernels.impulse_samples(E, b, c, n_steps)


def _check_tail(samples, total):
    if total > 0 and abs(samples[-1]) > TAIL_TOLERANCE * total:
        warnings.warn(
            f"quadrature horizon too short: |response| at the horizon is {abs(samples[-1]):.3g} "
            f"against an integral of {total:.3g}",
            HorizonWarning,
            stacklevel=3,
        )


def _simpson(f, dt):
    return dt / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum())


def _abs_integral_trapezoid(f, dt):
    F = np.concatenate(([0.0], np.cumsum(0.5 * dt * (f[1:] + f[:-1]))))
    cuts = [0.0]
    for k in np.nonzero(f[:-1] * f[1:] < 0)[0]:
        r = f[k] / (f[k] - f[k + 1])
        cuts.append(F[k] + 0.5 * r * dt * f[k])
    cuts.append(F[-1])
    return float(np.sum(np.abs(np.diff(cuts))))


def _quad_panel(f0, f1, f2, dt):
    # p(x) = a + b x + c x^2 on x in [0, 2] (units of dt) through the panel samples
    a = f0
    b = (-3.0 * f0 + 4.0 * f1 - f2) / 2.0
    c = (f0 - 2.0 * f1 + f2) / 2.0
    return a, b, c


def _abs_integral_simpson(f, dt):
    """Simpson on the signed response between sign changes; roots from the panel quadratic."""
    panels = dt / 3.0 * (f[:-2:2] + 4.0 * f[1:-1:2] + f[2::2])
    F = np.concatenate(([0.0], np.cumsum(panels)))
    cuts = [0.0]
    for j in range(panels.size):
        f0, f1, f2 = f[2 * j], f[2 * j + 1], f[2 * j + 2]
        if (f0 * f1 >= 0) and (f1 * f2 >= 0):
            continue
        a, b, c = _quad_panel(f0, f1, f2, dt)
        if c == 0.0:
            roots = [-a / b] if b != 0 else []
        else:
            disc = b * b - 4 * a * c
            if disc < 0:
                continue
            sq = math.sqrt(disc)
            q = -0.5 * (b + math.copysign(sq, b))
            roots = [q / c] + ([a / q] if q != 0 else [])
        for x in sorted(r for r in roots if 0.0 < r < 2.0):
            cuts.append(F[j] + dt * (a * x + b * x * x / 2.0 + c * x ** 3 / 3.0))
    cuts.append(F[-1])
    return float(np.sum(np.abs(np.diff(cuts))))


def l1_impulse_norm(A, B, C, horizon=None, step=None, rule="simpson"):
    """Integral of |C exp(A s) B| over [0, horizon].

    This is the worst-case peak of |C * conv(exp(A .) B, w)| over all
    disturbances with |w| <= 1. The signed response is integrated between
    its zero crossings so the kinks of |.| do not cost accuracy.
    """
    if rule not in ("simpson", "trapezoid"):
        raise InputError(f"unknown quadrature rule {rule!r}")
    dt, f = impulse_response(A, B, C, horizon, step, even=(rule == "simpson"))
    total = _abs_integral_simpson(f, dt) if rule == "simpson" else _abs_integral_trapezoid(f, dt)
    _check_tail(f, total)
    return float(total)


def step_response(A, B, C, horizon=None, step=None, rule="simpson"):
    """(times, C int_0^t exp(A s) B ds). Simpson samples every other grid node."""
    if rule not in ("simpson", "trapezoid"):
        raise InputError(f"unknown quadrature rule {rule!r}")
    dt, f = impulse_response(A, B, C, horizon, step, even=(rule == "simpson"))
    if rule == "simpson":
        panels = dt / 3.0 * (f[:-2:2] + 4.0 * f[1:-1:2] + f[2::2])
        values = np.concatenate(([0.0], np.cumsum(panels)))
        times = np.arange(values.size) * 2.0 * dt
    else:
        values = np.concatenate(([0.0], np.cumsum(0.5 * dt * (f[1:] + f[:-1]))))
        times = np.arange(values.size) * dt
    _check_tail(f, float(np.max(np.abs(values))) if values.size else 0.0)
    return times, values


def step_response_sup(A, B, C, horizon=None, step=None, rule="simpson"):
    """max over t in [0, horizon] of |C int_0^t exp(A s) B ds|."""
    _, values = step_response(A, B, C, horizon, step, rule)
    a = np.abs(values)
    i = int(np.argmax(a))
    peak = float(a[i])
    if 0 < i < a.size - 1:
        # parabolic vertex through the neighbours; the grid rarely hits the peak
        y0, y1, y2 = a[i - 1], a[i], a[i + 1]
        den = y0 - 2.0 * y1 + y2
        if den < 0:
            peak = max(peak, float(y1 - (y2 - y0) ** 2 / (8.0 * den)))
    return peak


def rk4_step(f, state, t, h):
    """One classical Runge-Kutta step of x' = f(t, x)."""
    if not h > 0:
        raise InputError(f"step must be positive, got {h}")
    x = np.asarray(state, dtype=float)
    k1 = np.asarray(f(t, x), dtype=float)
    k2 = np.asarray(f(t + 0.5 * h, x + 0.5 * h * k1), dtype=float)
    k3 = np.asarray(f(t + 0.5 * h, x + 0.5 * h * k2), dtype=float)
    k4 = np.asarray(f(t + h, x + h * k3), dtype=float)
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise IntegrationFault("non-finite derivative", t)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class SlidingWindowMax:
    """Running maximum of nonnegative samples over the trailing ``tau`` seconds.

    Samples are kept in a deque with non-increasing values, so push and
    query are amortized O(1). An empty window reports 0.
    """

    def __init__(self, tau):
        if not tau > 0:
            raise InputError(f"window length must be positive, got {tau}")
        self.tau = float(tau)
        self._q = deque()
        self._t_last = -math.inf

    def __len__(self):
        return len(self._q)

    def push(self, t, v):
        if t < self._t_last:
            raise OrderingError(f"time went backwards: {t} < {self._t_last}")
        if not v >= 0:
            raise InputError(f"window values must be >= 0, got {v}")
        self._t_last = t
        q = self._q
        while q and q[-1][1] <= v:
            q.pop()
        q.append((t, v))
        self._evict(t)

    def max(self, t_now):
        if t_now < self._t_last:
            raise OrderingError(f"query time {t_now} precedes last push {self._t_last}")
        self._t_last = t_now
        self._evict(t_now)
        return self._q[0][1] if self._q else 0.0

    def _evict(self, t_now):
        q = self._q
        cutoff = t_now - self.tau
        while q and q[0][0] < cutoff:
            q.popleft()


def window_push(w, t, v):
    w.push(t, v)


def window_max(w, t_now):
    return w.max(t_now)
