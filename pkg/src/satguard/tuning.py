"""Envelope constants, gain bounds and the tracking-error bound.

All formulas take an :class:`~satguard.model.UncertaintyEnvelope` for the
actuator/load data and an :class:`EnvelopeConstants` for the affine bounds
on the internal term ell and its derivative in terms of the windowed
control-rate sup.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FeasibilityError, InfeasibleGainError, InputError
from .model import signal_rate_bound
from .numerics import check_hurwitz, l1_impulse_norm, step_response_sup

LAMBDA_STAR_TOL = 1e-6
SCAN_POINTS = 10_000


@dataclass(frozen=True)
class EnvelopeConstants:
    c0: float
    c1: float
    d0: float
    d1: float
    epsilon: float = 0.0
    source: str = "computed"

    def __post_init__(self):
        for name in ("c0", "c1", "d0", "d1", "epsilon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InputError(f"{name} must be finite and >= 0, got {v}")

    def covers(self, other, rtol=1e-9):
        """True when every constant is at least the corresponding one of ``other``."""
        return all(getattr(self, k) >= getattr(other, k) * (1 - rtol) for k in ("c0", "c1", "d0", "d1"))


def _quad(fn, A, B, C, step, horizon, rule):
    return fn(A, B, C, horizon=horizon, step=step, rule=rule)


def compute_c0(d, w_bound, epsilon=0.0, step=None, horizon=None, rule="simpson"):
    """epsilon + w_bound * sum over disturbance channels of the L1 norm of C exp(A s) B2."""
    check_hurwitz(d.A)
    if w_bound < 0 or epsilon < 0:
        raise InputError("w_bound and epsilon must be >= 0")
    if w_bound == 0:
        return float(epsilon)
    gain = sum(_quad(l1_impulse_norm, d.A, d.B2[:, [j]], d.C, step, horizon, rule) for j in range(d.B2.shape[1]))
    return float(epsilon + w_bound * gain)


def compute_c1(d, step=None, horizon=None, rule="simpson"):
    check_hurwitz(d.A)
    if not np.any(d.B1):
        return 0.0
    return _quad(step_response_sup, d.A, d.B1, d.C, step, horizon, rule)


def compute_d0(d, w_bound, epsilon=0.0, step=None, horizon=None, rule="simpson"):
    check_hurwitz(d.A)
    if w_bound < 0 or epsilon < 0:
        raise InputError("w_bound and epsilon must be >= 0")
    if w_bound == 0:
        return float(epsilon)
    CA = d.C @ d.A
    gain = sum(_quad(l1_impulse_norm, d.A, d.B2[:, [j]], CA, step, horizon, rule) for j in range(d.B2.shape[1]))
    return float(epsilon + w_bound * gain)


def compute_d1(d, step=None, horizon=None, rule="simpson"):
    check_hurwitz(d.A)
    if not np.any(d.B1):
        return 0.0
    direct = abs(float(d.C[0] @ d.B1[:, 0]))
    return direct + _quad(step_response_sup, d.A, d.B1, d.C @ d.A, step, horizon, rule)


def envelope_constants(d, w_bound, epsilon=0.0, step=None, horizon=None, rule="simpson"):
    return EnvelopeConstants(
        c0=compute_c0(d, w_bound, epsilon, step, horizon, rule),
        c1=compute_c1(d, step, horizon, rule),
        d0=compute_d0(d, w_bound, epsilon, step, horizon, rule),
        d1=compute_d1(d, step, horizon, rule),
        epsilon=float(epsilon),
    )


def compute_beta(e):
    return e.beta


def lambda_cap(e, ec):
    """1 / (alpha_max c1); infinite when the rate channel is absent."""
    return math.inf if ec.c1 == 0 else 1.0 / (e.alpha_max * ec.c1)


def compute_delta_u(e, ec, lam, lam_f):
    """Certified bound on |u'| under the feedback law."""
    k = lam * e.alpha_max * ec.c1
    if not k < 1:
        raise InfeasibleGainError(f"lambda={lam:.9g} >= 1/(alpha_max c1)={lambda_cap(e, ec):.9g}")
    return (lam * e.alpha_max * (e.beta + ec.c0) + lam_f * e.delta_u) / (1.0 - k)


def phi_numerator(e, ec, lam):
    """The bracket of phi whose sign decides feasibility; the prefactor is positive."""
    lam = np.asarray(lam, dtype=float)
    k = lam * e.alpha_max * ec.c1
    return e.rho_min - ec.c0 - lam * (e.beta + ec.c0) * ec.c1 * e.alpha_max / (1.0 - k)


def _phi(e, ec, lam):
    k = lam * e.alpha_max * ec.c1
    prefactor = e.alpha_min / (e.delta_u * (1.0 + ec.c1 * e.alpha_min / (1.0 - k)))
    return prefactor * phi_numerator(e, ec, lam)


def phi(e, ec, lam):
    if not 0 < lam < lambda_cap(e, ec):
        raise DomainError(f"lambda={lam} outside (0, {lambda_cap(e, ec):.9g})")
    return float(_phi(e, ec, lam))


def lambda_star_scan(e, ec, points=SCAN_POINTS):
    """First grid point of an even scan of (0, cap) where phi is negative (cap if none)."""
    cap = lambda_cap(e, ec)
    if math.isinf(cap):
        return cap
    grid = cap * np.arange(1, points + 1) / (points + 1)
    neg = np.nonzero(phi_numerator(e, ec, grid) < 0)[0]
    return float(grid[neg[0]]) if neg.size else cap


def lambda_star(e, ec, tol=LAMBDA_STAR_TOL):
    """Largest lambda such that phi stays nonnegative on (0, lambda)."""
    if not ec.c0 < e.rho_min:
        raise FeasibilityError(f"c0={ec.c0:.9g} >= rho_min={e.rho_min:.9g}: no admissible lambda")
    cap = lambda_cap(e, ec)
    if math.isinf(cap):
        return cap
    lo, hi = 0.0, cap
    # the bracket decreases strictly from rho_min - c0 > 0 to -inf at the cap
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi_numerator(e, ec, mid) >= 0:
            lo = mid
        else:
            hi = mid
    root = min(0.5 * (lo + hi), cap)
    scan = lambda_star_scan(e, ec)
    step = cap / (SCAN_POINTS + 1)
    if not scan - step - tol <= root <= scan + tol:
        raise RuntimeError(f"bisection root {root} disagrees with scan bracket ending at {scan}")
    return root


def lambda_f_bound(e, ec, lam, lam_star=None):
    """lam * phi(lam): strict upper bound on admissible filter gains."""
    lam_star = lambda_star(e, ec) if lam_star is None else lam_star
    if not 0 < lam < lam_star:
        raise InfeasibleGainError(f"lambda={lam:.9g} not in (0, lambda*={lam_star:.9g})")
    return lam * phi(e, ec, lam)


def tracking_error_bound(ec, delta_g, delta_u, lam, lam_f):
    return (delta_g + ec.d0 + ec.d1 * delta_u) / (lam * lam_f)


def a0_matrix(lam, lam_f, alpha):
    return np.array([[-alpha * lam, alpha], [-lam_f * lam, 0.0]])


def a0_dc_gain(lam, lam_f, alpha):
    """|C1 A0^-1 C2| for the unsaturated error dynamics, C1 = (1, 0), C2 = (0, 1)^T."""
    if not (lam > 0 and lam_f > 0 and alpha > 0):
        raise DomainError("lambda, lambda_f and alpha must be > 0")
    inv = np.linalg.inv(a0_matrix(lam, lam_f, alpha))
    return abs(float(inv[0, 1]))


def pick_gains(e, ec, lam_fraction=0.99, lam_f_fraction=0.95):
    """Convenience tuning: lam = 0.99 lam*, lam_f = 0.95 lam phi(lam)."""
    lam_star = lambda_star(e, ec)
    if math.isinf(lam_star):
        raise InfeasibleGainError("lambda* is unbounded (c1 = 0); choose lambda explicitly")
    lam = lam_fraction * lam_star
    return lam, lam_f_fraction * lambda_f_bound(e, ec, lam, lam_star)


@dataclass
class TuningReport:
    envelope: EnvelopeConstants
    beta: float
    rho_min: float
    lambda_cap: float
    lambda_star: float
    lam: float
    lam_f: float
    phi: float
    lambda_f_bound: float
    delta_u: float
    delta_g: float
    error_bound: float
    flags: dict
    computed: EnvelopeConstants = None
    notes: list = field(default_factory=list)

    @property
    def feasible(self):
        return all(self.flags.values())

    @property
    def failed(self):
        return [k for k, ok in self.flags.items() if not ok]

    def items(self):
        ec = self.envelope
        out = [("constants_source", ec.source), ("c0", ec.c0), ("c1", ec.c1), ("d0", ec.d0),
               ("d1", ec.d1), ("epsilon", ec.epsilon)]
        if self.computed is not None and self.computed is not ec:
            out += [(f"computed_{k}", getattr(self.computed, k)) for k in ("c0", "c1", "d0", "d1")]
        out += [("beta", self.beta), ("rho_min", self.rho_min), ("lambda_cap", self.lambda_cap),
                ("lambda_star", self.lambda_star), ("lambda", self.lam), ("lambda_f", self.lam_f),
                ("phi", self.phi), ("lambda_f_bound", self.lambda_f_bound), ("delta_u", self.delta_u),
                ("delta_g", self.delta_g), ("error_bound", self.error_bound)]
        out += [(f"flag_{k}", v) for k, v in self.flags.items()]
        out += [("feasible", self.feasible), ("failed", ",".join(self.failed) or "none")]
        return out

    def to_text(self):
        lines = [f"{k} = {fmt(v)}" for k, v in self.items()]
        lines += [f"note = {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def feasibility_report(e, d, w_bound, epsilon, delta_g, lam, lam_f, constants=None, g_signal=None,
                       step=None):
    """Evaluate every condition of the tracking guarantee for one gain pair.

    Infeasibility is reported through ``flags``; nothing here raises for an
    unsuitable gain. ``constants`` overrides the computed envelope constants
    (they are still computed from ``d`` and compared).
    """
    computed = envelope_constants(d, w_bound, epsilon, step=step)
    ec = computed if constants is None else constants
    flags = {"control_authority_margin": e.rho_plus > 0 and e.rho_minus > 0}
    notes = []
    if constants is not None:
        flags["declared_constants_cover_computed"] = constants.covers(computed)
    if g_signal is not None and g_signal.kind in ("constant", "sinusoid_sum"):
        flags["g_rate_within_bound"] = signal_rate_bound(g_signal) <= delta_g * (1 + 1e-12)
    flags["c0_below_rho_min"] = ec.c0 < e.rho_min
    cap = lambda_cap(e, ec)
    flags["lambda_below_cap"] = 0 < lam < cap

    lam_star = None
    if flags["c0_below_rho_min"]:
        lam_star = lambda_star(e, ec)
    flags["lambda_below_lambda_star"] = lam_star is not None and 0 < lam < lam_star

    phi_val = bound_f = du = None
    if flags["lambda_below_cap"]:
        phi_val = phi(e, ec, lam)
        bound_f = lam * phi_val
        du = compute_delta_u(e, ec, lam, lam_f)
    flags["lambda_f_below_bound"] = bound_f is not None and lam_f < bound_f
    if bound_f is not None and lam_f == bound_f:
        notes.append("lambda_f equals lambda*phi(lambda); the inequality is strict")

    ok = all(flags.values())
    error_bound = tracking_error_bound(ec, delta_g, du, lam, lam_f) if ok else math.inf
    return TuningReport(
        envelope=ec, beta=e.beta, rho_min=e.rho_min, lambda_cap=cap, lambda_star=lam_star,
        lam=lam, lam_f=lam_f, phi=phi_val, lambda_f_bound=bound_f, delta_u=du, delta_g=delta_g,
        error_bound=error_bound, flags=flags, computed=computed, notes=notes,
    )


SWEEP_COLUMNS = ("lambda", "phi", "lambda_f_bound", "delta_u", "error_bound", "feasible")


def sweep(e, ec, lambdas, delta_g, lam_f_fraction=0.95):
    """Per-lambda phi, lam*phi, delta_u and error bound at lam_f = 0.95 lam*phi(lam)."""
    cap = lambda_cap(e, ec)
    lam_star = lambda_star(e, ec) if ec.c0 < e.rho_min else 0.0
    rows = []
    for lam in lambdas:
        if not 0 < lam < cap:
            raise DomainError(f"lambda={lam} outside (0, {cap:.9g})")
        p = phi(e, ec, lam)
        bound_f = lam * p
        feasible = lam < lam_star and bound_f > 0
        lam_f = lam_f_fraction * bound_f if feasible else 0.0
        du = compute_delta_u(e, ec, lam, lam_f)
        err = tracking_error_bound(ec, delta_g, du, lam, lam_f) if feasible else math.inf
        rows.append({"lambda": float(lam), "phi": p, "lambda_f_bound": bound_f, "delta_u": du,
                     "error_bound": err, "feasible": feasible})
    return rows
