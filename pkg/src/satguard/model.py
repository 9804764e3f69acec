"""Uncertain plant: scalar output channel plus linear internal dynamics.

    y'   = alpha * (u - g(t) + C eta)
    eta' = A eta + B1 * sup_window|u'| + B2 * w(t)
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import AuthorityMarginError, DimensionError, ExtrapolationError, InputError, UnsupportedSignalError
from .numerics import as_matrix, check_hurwitz

SIGNAL_KINDS = ("constant", "sinusoid_sum", "piecewise_constant", "replay")


@dataclass(frozen=True)
class UncertaintyEnvelope:
    u_min: float
    u_max: float
    g_min: float
    g_max: float
    alpha_min: float
    alpha_max: float
    g_rate_bound: float
    w_bound: float
    tau: float

    def __post_init__(self):
        for name in ("u_min", "u_max", "g_min", "g_max", "alpha_min", "alpha_max",
                     "g_rate_bound", "w_bound", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"{name} must be finite")
        if not self.u_min < self.u_max:
            raise InputError("u_min must be < u_max")
        if not self.g_min < self.g_max:
            raise InputError("g_min must be < g_max")
        if not 0 < self.alpha_min <= self.alpha_max:
            raise InputError("need 0 < alpha_min <= alpha_max")
        if self.g_rate_bound < 0 or self.w_bound < 0:
            raise InputError("g_rate_bound and w_bound must be >= 0")
        if not self.tau > 0:
            raise InputError("tau must be > 0")
        if not self.rho_plus > 0:
            raise AuthorityMarginError(f"control authority margin violated: u_max - g_max = {self.rho_plus:.9g} <= 0")
        if not self.rho_minus > 0:
            raise AuthorityMarginError(f"control authority margin violated: g_min - u_min = {self.rho_minus:.9g} <= 0")

    @property
    def rho_plus(self):
        return self.u_max - self.g_max

    @property
    def rho_minus(self):
        return self.g_min - self.u_min

    @property
    def rho_min(self):
        return min(self.rho_plus, self.rho_minus)

    @property
    def delta_u(self):
        return self.u_max - self.u_min

    @property
    def delta_g(self):
        return self.g_max - self.g_min

    @property
    def beta(self):
        return self.delta_g + max(self.rho_plus, self.rho_minus)


@dataclass(frozen=True, eq=False)
class LinearInternalDynamics:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        B1 = as_matrix(self.B1, "B1")
        B2 = as_matrix(self.B2, "B2")
        C = as_matrix(self.C, "C")
        if C.shape == (n, 1) and n > 1:
            C = C.T
        if B1.shape != (n, 1):
            raise DimensionError(f"B1 must be {n}x1, got {B1.shape}")
        if B2.shape[0] != n:
            raise DimensionError(f"B2 must have {n} rows, got {B2.shape}")
        if C.shape != (1, n):
            raise DimensionError(f"C must be 1x{n}, got {C.shape}")
        check_hurwitz(A)
        for name, value in (("A", A), ("B1", B1), ("B2", B2), ("C", C)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n(self):
        return self.A.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LinearInternalDynamics):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("A", "B1", "B2", "C"))


def ell(d, eta):
    eta = np.asarray(eta, dtype=float).reshape(-1)
    if eta.shape[0] != d.n:
        raise DimensionError(f"eta has {eta.shape[0]} entries, expected {d.n}")
    return float(d.C[0] @ eta)


@dataclass(frozen=True)
class SinusoidTerm:
    amplitude: float
    frequency: float
    phase: float = 0.0
    trig: str = "sin"

    def __post_init__(self):
        if self.trig not in ("sin", "cos"):
            raise InputError(f"trig must be 'sin' or 'cos', got {self.trig!r}")


@dataclass(frozen=True)
class SignalSpec:
    """A deterministic scalar time signal.

    ``constant`` uses ``offset``; ``sinusoid_sum`` is ``offset`` plus the
    terms; ``piecewise_constant`` holds ``values[i]`` from ``times[i]`` on;
    ``replay`` interpolates linearly between recorded samples.
    """

    kind: str
    offset: float = 0.0
    terms: tuple = ()
    times: tuple = ()
    values: tuple = ()
    source: str = None

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise InputError(f"unknown signal kind {self.kind!r}")
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind in ("piecewise_constant", "replay"):
            if not self.times or len(self.times) != len(self.values):
                raise InputError("times and values must be non-empty and of equal length")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise InputError("signal times must be strictly increasing")

    @classmethod
    def constant(cls, value):
        return cls("constant", offset=float(value))

    @classmethod
    def sinusoids(cls, offset, terms):
        return cls("sinusoid_sum", offset=float(offset), terms=tuple(terms))

    @classmethod
    def piecewise(cls, times, values):
        return cls("piecewise_constant", times=times, values=values)

    @classmethod
    def from_csv(cls, path):
        return cls("replay", **_read_replay(path))

    def kernel_args(self):
        """(kind code, offset, coef[k,3], tab[p,2]) for the compiled evaluator."""
        coef = np.zeros((max(len(self.terms), 1), 3))
        if self.kind == "sinusoid_sum":
            for i, term in enumerate(self.terms):
                shift = 0.5 * math.pi if term.trig == "cos" else 0.0
                coef[i] = (term.amplitude, term.frequency, term.phase + shift)
            if not self.terms:
                coef = np.zeros((0, 3))
        tab = np.zeros((max(len(self.times), 1), 2))
        if self.times:
            tab[:, 0] = self.times
            tab[:, 1] = self.values
        code = {"constant": _kernels.SIG_CONSTANT, "sinusoid_sum": _kernels.SIG_SINUSOID,
                "piecewise_constant": _kernels.SIG_PIECEWISE, "replay": _kernels.SIG_REPLAY}[self.kind]
        return code, float(self.offset), coef, tab

    def frequencies(self):
        return [abs(t.frequency) for t in self.terms if t.frequency != 0]


def _read_replay(path):
    times, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "value"]:
            raise InputError(f"{path}: expected header 't,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InputError(f"{path}:{lineno}: expected two columns")
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric entry") from None
    if not times:
        raise InputError(f"{path}: no samples")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise InputError(f"{path}: t must be strictly increasing")
    return {"times": tuple(times), "values": tuple(values), "source": str(path)}


def eval_signal(s, t):
    if t < 0:
        raise InputError(f"signal time must be >= 0, got {t}")
    if s.kind == "replay" and not (s.times[0] <= t <= s.times[-1]):
        raise ExtrapolationError(f"t={t} outside recorded range [{s.times[0]}, {s.times[-1]}]")
    code, offset, coef, tab = s.kernel_args()
    return float(_kernels.signal_value(code, offset, coef, tab, float(t)))


def eval_signal_grid(s, ts):
    code, offset, coef, tab = s.kernel_args()
    ts = np.asarray(ts, dtype=float)
    if s.kind == "sinusoid_sum":
        out = np.full(ts.shape, offset)
        for a, w, p in coef:
            out += a * np.sin(w * ts + p)
        return out
    return np.array([_kernels.signal_value(code, offset, coef, tab, float(t)) for t in ts])


def signal_rate_bound(s):
    """Upper bound on |ds/dt| for analytic signals."""
    if s.kind == "constant":
        return 0.0
    if s.kind == "sinusoid_sum":
        return float(sum(abs(t.amplitude * t.frequency) for t in s.terms))
    raise UnsupportedSignalError(f"no analytic rate bound for {s.kind!r} signals; declare it")


def signal_range(s, horizon):
    """(min, max) of the signal on [0, horizon], sampled densely for sinusoids."""
    if s.kind == "constant":
        return s.offset, s.offset
    if s.kind in ("piecewise_constant", "replay"):
        vals = [v for t, v in zip(s.times, s.values) if t <= horizon] or [s.values[0]]
        if s.kind == "piecewise_constant" and s.times[0] > 0:
            vals.append(s.values[0])
        return min(vals), max(vals)
    freqs = s.frequencies()
    if not freqs:
        v = eval_signal(s, 0.0)
        return v, v
    dt = 0.01 * 2.0 * math.pi / max(freqs)
    ts = np.arange(0.0, horizon + dt, dt)
    vals = eval_signal_grid(s, ts)
    return float(vals.min()), float(vals.max())


def default_check_horizon(s):
    freqs = s.frequencies() if s.kind == "sinusoid_sum" else []
    if not freqs:
        return 100.0
    return max(100.0, 10.0 * 2.0 * math.pi / min(freqs))


@dataclass(frozen=True, eq=False)
class PlantTruth:
    alpha_true: float
    g: SignalSpec
    w: SignalSpec
    internal: LinearInternalDynamics
    eta0: np.ndarray = None
    envelope: UncertaintyEnvelope = field(default=None, repr=False)
    check_horizon: float = None
    tau: float = None

    def __post_init__(self):
        n = self.internal.n
        eta0 = np.zeros(n) if self.eta0 is None else np.asarray(self.eta0, dtype=float).reshape(-1)
        if eta0.shape[0] != n:
            raise DimensionError(f"eta0 has {eta0.shape[0]} entries, expected {n}")
        if not np.all(np.isfinite(eta0)):
            raise InputError("eta0 has non-finite entries")
        eta0.setflags(write=False)
        object.__setattr__(self, "eta0", eta0)
        if self.internal.B2.shape[1] != 1:
            raise DimensionError("simulation supports a single disturbance channel (B2 must be n x 1)")
        e = self.envelope
        if self.tau is None:
            if e is None:
                raise InputError("window length tau needed (pass tau or an envelope)")
            object.__setattr__(self, "tau", e.tau)
        elif not self.tau > 0:
            raise InputError("tau must be > 0")
        if e is not None:
            if not e.alpha_min <= self.alpha_true <= e.alpha_max:
                raise InputError(f"alpha_true={self.alpha_true} outside [{e.alpha_min}, {e.alpha_max}]")
            horizon = self.check_horizon or default_check_horizon(self.g)
            lo, hi = signal_range(self.g, horizon)
            if lo < e.g_min - 1e-12 or hi > e.g_max + 1e-12:
                raise InputError(f"g ranges over [{lo:.9g}, {hi:.9g}], outside [{e.g_min}, {e.g_max}]")
            wlo, whi = signal_range(self.w, default_check_horizon(self.w))
            if max(abs(wlo), abs(whi)) > e.w_bound + 1e-12:
                raise InputError(f"|w| reaches {max(abs(wlo), abs(whi)):.9g} > w_bound={e.w_bound}")


def plant_rhs(p, y, eta, u, udot_sup, t):
    """(y', eta') of the plant for a given control and windowed rate sup."""
    eta = np.asarray(eta, dtype=float).reshape(-1)
    d = p.internal
    if eta.shape[0] != d.n:
        raise DimensionError(f"eta has {eta.shape[0]} entries, expected {d.n}")
    if udot_sup < 0:
        raise InputError("udot_sup must be >= 0")
    if not (math.isfinite(y) and math.isfinite(u) and math.isfinite(udot_sup) and np.all(np.isfinite(eta))):
        raise InputError("non-finite plant input")
    ydot = p.alpha_true * (u - eval_signal(p.g, t) + ell(d, eta))
    etadot = d.A @ eta + d.B1[:, 0] * udot_sup + d.B2[:, 0] * eval_signal(p.w, t)
    return float(ydot), etadot
