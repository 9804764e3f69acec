"""Closed-loop simulation and checks of the invariance and bound claims."""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .controller import Region
from .errors import ConfigError, InputError, IntegrationFault
from .model import SignalSpec
from .numerics import SlidingWindowMax


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    h: float = 0.005
    record_every: int = 20
    y0: float = 0.0
    z0: float = None
    eta0: tuple = None
    setpoint: SignalSpec = None

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError("sim.t_end", "must be > 0")
        if not (math.isfinite(self.h) and self.h > 0):
            raise ConfigError("sim.step", "must be > 0")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigError("sim.record_every", "must be an integer >= 1")
        if self.setpoint is not None and self.setpoint.kind != "piecewise_constant":
            raise ConfigError("signals.setpoint", "setpoint schedule must be piecewise constant")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.h))


def _columns(n):
    return (["t", "y", "z", "u", "udot_estimate", "udot_window_sup"]
            + [f"eta{i}" for i in range(n)] + ["ell", "g", "w", "region", "y_d"])


@dataclass
class Trajectory:
    """Recorded closed-loop run: one row per recorded step, columns as in :attr:`columns`."""

    data: np.ndarray
    n_eta: int
    h: float
    record_every: int
    lam: float
    u_min: float
    u_max: float
    meta: dict = field(default_factory=dict)

    @property
    def columns(self):
        return _columns(self.n_eta)

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, name):
        return self.data[:, self.columns.index(name)]

    @property
    def t(self):
        return self["t"]

    @property
    def eta(self):
        return self.data[:, 6:6 + self.n_eta]

    @property
    def regions(self):
        return [Region(int(r)) for r in self["region"]]

    @property
    def dt(self):
        return self.h * self.record_every

    def to_csv(self, path_or_file):
        """Write CSV with a header row; floats at 9 significant digits, region as a label."""
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            with open(path_or_file, "w", newline="") as fh:
                self._write(fh)
        else:
            self._write(path_or_file)

    def to_csv_string(self):
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()

    def _write(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        cols = self.columns
        writer.writerow(cols)
        ri = cols.index("region")
        for row in self.data:
            out = [f"{v:.9g}" for v in row]
            out[ri] = Region(int(row[ri])).label
            writer.writerow(out)


def simulate(p, gains, cfg):
    """Integrate plant + controller with fixed-step RK4.

    The control is recomputed at every RK stage. The control rate is the
    backward difference of accepted-step controls; its sup over the trailing
    window feeds the internal dynamics with a one-step lag.
    """
    tau = p.tau
    if cfg.h > tau / 10 + 1e-15:
        raise ConfigError("sim.step", f"step {cfg.h} exceeds tau/10 = {tau / 10}")
    d = p.internal
    n = d.n
    if p.g.kind == "replay" and not (p.g.times[0] <= 0 and p.g.times[-1] >= cfg.t_end):
        raise InputError("g replay does not cover [0, t_end]")
    if p.w.kind == "replay" and not (p.w.times[0] <= 0 and p.w.times[-1] >= cfg.t_end):
        raise InputError("w replay does not cover [0, t_end]")

    setpoint = cfg.setpoint or SignalSpec.piecewise((0.0,), (gains.y_d,))
    yd_tab = setpoint.kernel_args()[3]
    eta0 = p.eta0 if cfg.eta0 is None else np.asarray(cfg.eta0, dtype=float)
    if eta0.shape != (n,):
        raise ConfigError("plant.eta0", f"expected {n} entries")
    z0 = gains.z_default if cfg.z0 is None else cfg.z0
    x0 = np.concatenate(([cfg.y0, z0], eta0)).astype(float)

    gk, go, gc, gt = p.g.kernel_args()
    wk, wo, wc, wt = p.w.kernel_args()
    n_steps = cfg.n_steps
    rows, n_rec, fault = _kernels.closed_loop(
        np.ascontiguousarray(d.A), np.ascontiguousarray(d.B1[:, 0]), np.ascontiguousarray(d.B2[:, 0]),
        np.ascontiguousarray(d.C[0]), float(p.alpha_true), float(gains.lam), float(gains.lam_f),
        float(gains.u_min), float(gains.u_max), int(round(tau / cfg.h)),
        gk, go, gc, gt, wk, wo, wc, wt, yd_tab, x0, float(cfg.h), n_steps, int(cfg.record_every),
    )
    tr = Trajectory(rows[:n_rec].copy(), n, cfg.h, int(cfg.record_every), gains.lam, gains.u_min, gains.u_max,
                    meta={"lambda": gains.lam, "lambda_f": gains.lam_f})
    if fault >= 0:
        err = IntegrationFault("non-finite closed-loop state", fault * cfg.h)
        err.trajectory = tr
        raise err
    return tr


def _setpoint_segments(tr):
    yd = tr["y_d"]
    breaks = np.nonzero(np.diff(yd) != 0)[0] + 1
    starts = np.concatenate(([0], breaks))
    stops = np.concatenate((breaks, [len(yd)]))
    return list(zip(starts, stops))


@dataclass
class RegionReport:
    entry_time: float
    invariant_after_entry: bool
    exit_time: float = None
    segments: list = field(default_factory=list)

    @property
    def entered(self):
        return self.entry_time is not None


def verify_region_convergence(tr):
    """Entry into A_zero and invariance afterwards, per constant-setpoint segment.

    ``entry_time`` refers to the last segment (the one the asymptotic claims
    are about); invariance must hold in every segment after its own entry.
    """
    region = tr["region"]
    t = tr.t
    segments = []
    invariant = True
    exit_time = None
    entry = None
    for a, b in _setpoint_segments(tr):
        inside = np.nonzero(region[a:b] == _kernels.REGION_ZERO)[0]
        if inside.size == 0:
            segments.append((float(t[a]), float(t[b - 1]), None, True))
            entry = None
            continue
        first = a + inside[0]
        left = np.nonzero(region[first:b] != _kernels.REGION_ZERO)[0]
        ok = left.size == 0
        if not ok and exit_time is None:
            exit_time = float(t[first + left[0]])
        invariant &= ok
        entry = float(t[first])
        segments.append((float(t[a]), float(t[b - 1]), entry, ok))
    ever = any(seg[2] is not None for seg in segments)
    return RegionReport(entry, bool(invariant and ever), exit_time, segments)


@dataclass
class EnvelopeReport:
    ell_margin: float
    ell_worst_t: float
    dell_margin: float
    dell_worst_t: float
    slack: float

    @property
    def violations(self):
        return int(self.ell_margin > self.slack) + int(self.dell_margin > self.slack)

    @property
    def ok(self):
        return self.violations == 0


def verify_envelope(tr, ec, slack=1e-3, memory=0.0):
    """Worst value of |ell| - (c0 + c1 v) and |ell'| - (d0 + d1 v) over the run.

    ``v`` is the recorded window sup. With ``memory > 0`` it is replaced by
    its running max over the trailing ``memory`` seconds, which accounts for
    the internal state still carrying rates that already left the window.
    ell' comes from central differences of the recorded ell column; its
    bound uses the largest v over the difference stencil.
    """
    ell = tr["ell"]
    v = tr["udot_window_sup"]
    t = tr.t
    if memory > 0:
        v = _trailing_max(v, int(math.ceil(memory / tr.dt)))
    m_ell = np.abs(ell) - (ec.c0 + ec.c1 * v)
    i = int(np.argmax(m_ell))
    ell_margin, ell_t = float(m_ell[i]), float(t[i])
    if len(tr) >= 3:
        dell = (ell[2:] - ell[:-2]) / (t[2:] - t[:-2])
        vmax = np.maximum(np.maximum(v[2:], v[1:-1]), v[:-2])
        m_d = np.abs(dell) - (ec.d0 + ec.d1 * vmax)
        j = int(np.argmax(m_d))
        dell_margin, dell_t = float(m_d[j]), float(t[j + 1])
    else:
        dell_margin, dell_t = -ec.d0, float(t[0])
    return EnvelopeReport(ell_margin, ell_t, dell_margin, dell_t, slack)


def _trailing_max(v, k):
    w = SlidingWindowMax(k + 0.5)
    out = np.empty_like(v)
    for i, x in enumerate(v):
        w.push(i, x)
        out[i] = w.max(i)
    return out


@dataclass
class UdotReport:
    observed: float
    bound: float
    slack: float

    @property
    def margin(self):
        return self.bound - self.observed

    @property
    def ratio(self):
        return self.observed / self.bound if self.bound > 0 else math.inf

    @property
    def ok(self):
        return self.observed <= self.bound + self.slack


def verify_udot_bound(tr, delta_u, slack=None):
    """Compare the largest control-rate estimate with the certified bound.

    The window-sup column carries the max over every integration step, not
    only the recorded ones. Default slack is 2 h times the recorded
    second-derivative scale, capped at 1% of the bound.
    """
    udot = tr["udot_estimate"]
    observed = float(max(np.max(np.abs(udot)), np.max(tr["udot_window_sup"])))
    if slack is None:
        scale = float(np.max(np.abs(np.diff(udot))) / tr.dt) if len(tr) > 1 else 0.0
        slack = min(2.0 * tr.h * scale, 0.01 * delta_u)
    return UdotReport(observed, float(delta_u), float(slack))


def asymptotic_error(tr, tail_fraction=0.2):
    """sup |y - y_d| over the final ``tail_fraction`` of the run."""
    if not 0 < tail_fraction < 1:
        raise InputError("tail_fraction must lie in (0, 1)")
    n = len(tr)
    start = min(n - 1, int(math.floor(n * (1 - tail_fraction))))
    yd = tr["y_d"][start:]
    if np.any(yd != yd[0]):
        raise InputError("setpoint changes inside the tail window")
    return float(np.max(np.abs(tr["y"][start:] - yd)))


def ell_excursion(tr):
    return float(np.max(np.abs(tr["ell"])))
