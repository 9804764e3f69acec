"""Scenario documents: JSON with plant / envelope / signals / controller / sim sections."""

import json
import math
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, DimensionError, InputError, SatguardError
from .model import (LinearInternalDynamics, PlantTruth, SignalSpec, SinusoidTerm, UncertaintyEnvelope,
                    _read_replay, signal_rate_bound)
from .simulate import SimConfig
from .tuning import EnvelopeConstants

SECTIONS = ("plant", "envelope", "signals", "controller", "sim")
BUILTIN = {"golden": "golden.json"}


def _get(d, key, path, required=True, default=None):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "missing")
        return default
    return d[key]


def _num(d, key, path, required=True, default=None):
    v = _get(d, key, path, required, default)
    if v is default and not required:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}", f"expected a finite number, got {v!r}")
    return float(v)


def _matrix(d, key, path, shape_hint):
    v = _get(d, key, path)
    p = f"{path}.{key}"
    try:
        m = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(p, "expected a numeric array") from None
    if m.ndim == 1:
        m = m.reshape(1, -1) if shape_hint == "row" else m.reshape(-1, 1)
    if m.ndim != 2 or m.size == 0:
        raise ConfigError(p, f"expected a non-empty matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ConfigError(p, "non-finite entry")
    return m


def _signal(d, path, base_dir):
    kind = _get(d, "kind", path)
    try:
        if kind == "constant":
            return SignalSpec.constant(_num(d, "value", path))
        if kind == "sinusoid_sum":
            terms = []
            for i, t in enumerate(_get(d, "terms", path, required=False, default=[])):
                tp = f"{path}.terms[{i}]"
                terms.append(SinusoidTerm(_num(t, "amplitude", tp), _num(t, "frequency", tp),
                                          _num(t, "phase", tp, required=False, default=0.0),
                                          _get(t, "trig", tp, required=False, default="sin")))
            return SignalSpec.sinusoids(_num(d, "offset", path, required=False, default=0.0), terms)
        if kind == "piecewise_constant":
            return SignalSpec.piecewise(_floats(d, "times", path), _floats(d, "values", path))
        if kind == "replay":
            src = _get(d, "path", path)
            full = src if os.path.isabs(src) else os.path.join(base_dir, src)
            return SignalSpec("replay", **_read_replay(full))
    except InputError as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown signal kind {kind!r}")


def _floats(d, key, path):
    v = _get(d, key, path)
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{path}.{key}", "expected a list of numbers")
    return tuple(float(x) for x in v)


def signal_to_dict(s):
    if s.kind == "constant":
        return {"kind": "constant", "value": s.offset}
    if s.kind == "sinusoid_sum":
        return {"kind": "sinusoid_sum", "offset": s.offset,
                "terms": [{"amplitude": t.amplitude, "frequency": t.frequency, "phase": t.phase, "trig": t.trig}
                          for t in s.terms]}
    if s.kind == "piecewise_constant":
        return {"kind": "piecewise_constant", "times": list(s.times), "values": list(s.values)}
    return {"kind": "replay", "path": s.source}


@dataclass(frozen=True)
class ScenarioConfig:
    internal: LinearInternalDynamics
    alpha_true: float
    eta0: tuple
    envelope: UncertaintyEnvelope
    epsilon: float
    constants: EnvelopeConstants
    g: SignalSpec
    w: SignalSpec
    setpoint: SignalSpec
    lam: float
    lam_f: float
    t_end: float
    step: float
    record_every: int
    seed: int
    y0: float
    z0: float

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        if not isinstance(doc, dict):
            raise ConfigError("", "top level must be an object")
        for s in SECTIONS:
            if s != "controller":
                _get(doc, s, "$")
        unknown = set(doc) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"$.{sorted(unknown)[0]}", "unknown section")
        pl, en, si = doc["plant"], doc["envelope"], doc["signals"]
        ct = doc.get("controller") or {}
        sm = doc["sim"]

        A = _matrix(pl, "A", "plant", "square")
        B1 = _matrix(pl, "B1", "plant", "col")
        B2 = _matrix(pl, "B2", "plant", "col")
        C = _matrix(pl, "C", "plant", "row")
        try:
            internal = LinearInternalDynamics(A, B1, B2, C)
        except (InputError, DimensionError) as exc:
            raise ConfigError("plant", str(exc)) from None
        n = internal.n
        eta0 = _get(pl, "eta0", "plant", required=False, default=[0.0] * n)
        if not isinstance(eta0, list) or len(eta0) != n:
            raise ConfigError("plant.eta0", f"expected a list of {n} numbers")
        eta0 = tuple(float(x) for x in eta0)

        g = _signal(_get(si, "g", "signals"), "signals.g", base_dir)
        w = _signal(_get(si, "w", "signals"), "signals.w", base_dir)
        sp = _get(si, "setpoint", "signals")
        setpoint = SignalSpec.piecewise(_floats(sp, "times", "signals.setpoint"),
                                        _floats(sp, "values", "signals.setpoint"))

        g_rate = _num(en, "g_rate_bound", "envelope", required=False)
        if g_rate is None:
            try:
                g_rate = signal_rate_bound(g)
            except SatguardError:
                raise ConfigError("envelope.g_rate_bound", "required when g is not analytic") from None
        fields = {k: _num(en, k, "envelope") for k in
                  ("u_min", "u_max", "g_min", "g_max", "alpha_min", "alpha_max", "w_bound", "tau")}
        try:
            envelope = UncertaintyEnvelope(g_rate_bound=g_rate, **fields)
        except InputError as exc:
            raise ConfigError("envelope", str(exc)) from None
        epsilon = _num(en, "epsilon", "envelope", required=False, default=0.0)
        if epsilon < 0:
            raise ConfigError("envelope.epsilon", "must be >= 0")
        constants = None
        if en.get("constants") is not None:
            cd = en["constants"]
            try:
                constants = EnvelopeConstants(*(_num(cd, k, "envelope.constants") for k in ("c0", "c1", "d0", "d1")),
                                              epsilon=epsilon, source="declared")
            except InputError as exc:
                raise ConfigError("envelope.constants", str(exc)) from None

        lam = _num(ct, "lambda", "controller", required=False)
        lam_f = _num(ct, "lambda_f", "controller", required=False)
        for name, v in (("lambda", lam), ("lambda_f", lam_f)):
            if v is not None and not v > 0:
                raise ConfigError(f"controller.{name}", "must be > 0")
        if lam is None and lam_f is not None:
            raise ConfigError("controller.lambda", "lambda_f given without lambda")

        record_every = _num(sm, "record_every", "sim", required=False, default=20)
        if record_every != int(record_every) or record_every < 1:
            raise ConfigError("sim.record_every", "must be an integer >= 1")
        seed = _num(sm, "seed", "sim", required=False, default=0)
        cfg = cls(
            internal=internal, alpha_true=_num(pl, "alpha_true", "plant"), eta0=eta0, envelope=envelope,
            epsilon=epsilon, constants=constants, g=g, w=w, setpoint=setpoint, lam=lam, lam_f=lam_f,
            t_end=_num(sm, "t_end", "sim"), step=_num(sm, "step", "sim", required=False, default=0.005),
            record_every=int(record_every), seed=int(seed),
            y0=_num(sm, "y0", "sim", required=False, default=0.0), z0=_num(sm, "z0", "sim", required=False),
        )
        cfg.sim_config()
        return cfg

    def to_dict(self):
        d = self.internal
        e = self.envelope
        env = {k: getattr(e, k) for k in ("u_min", "u_max", "g_min", "g_max", "alpha_min", "alpha_max",
                                           "g_rate_bound", "w_bound", "tau")}
        env["epsilon"] = self.epsilon
        if self.constants is not None:
            env["constants"] = {k: getattr(self.constants, k) for k in ("c0", "c1", "d0", "d1")}
        ctrl = {}
        if self.lam is not None:
            ctrl["lambda"] = self.lam
        if self.lam_f is not None:
            ctrl["lambda_f"] = self.lam_f
        sim = {"t_end": self.t_end, "step": self.step, "record_every": self.record_every, "seed": self.seed,
               "y0": self.y0}
        if self.z0 is not None:
            sim["z0"] = self.z0
        return {
            "plant": {"A": d.A.tolist(), "B1": d.B1.tolist(), "B2": d.B2.tolist(), "C": d.C.tolist(),
                      "alpha_true": self.alpha_true, "eta0": list(self.eta0)},
            "envelope": env,
            "signals": {"g": signal_to_dict(self.g), "w": signal_to_dict(self.w),
                        "setpoint": {"times": list(self.setpoint.times), "values": list(self.setpoint.values)}},
            "controller": ctrl,
            "sim": sim,
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)

    def plant_truth(self):
        try:
            return PlantTruth(self.alpha_true, self.g, self.w, self.internal, np.array(self.eta0),
                              envelope=self.envelope, check_horizon=self.t_end)
        except (InputError, DimensionError) as exc:
            raise ConfigError("plant", str(exc)) from None

    def sim_config(self):
        return SimConfig(self.t_end, self.step, self.record_every, self.y0, self.z0, None, self.setpoint)

    @property
    def y_d_final(self):
        return self.setpoint.values[-1]


def load_config(path_or_name):
    """Read a scenario file, or a shipped scenario by name (``golden``)."""
    if path_or_name in BUILTIN and not os.path.exists(path_or_name):
        text = resources.files("satguard").joinpath("examples", BUILTIN[path_or_name]).read_text()
        base = "."
    else:
        try:
            with open(path_or_name) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("", f"cannot read {path_or_name}: {exc.strerror}") from None
        base = os.path.dirname(os.path.abspath(path_or_name))
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    return ScenarioConfig.from_dict(doc, base)
