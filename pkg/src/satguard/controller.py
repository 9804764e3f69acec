"""Saturated dynamic output feedback u = S(lam (y_d - y) + z), z' = lam_f (u - z)."""

import enum
import math
from dataclasses import dataclass

from .errors import InputError


class Region(enum.Enum):
    A_MINUS = -1
    A_ZERO = 0
    A_PLUS = 1

    @property
    def label(self):
        return {-1: "A_minus", 0: "A_zero", 1: "A_plus"}[self.value]

    @classmethod
    def from_label(cls, label):
        return {"A_minus": cls.A_MINUS, "A_zero": cls.A_ZERO, "A_plus": cls.A_PLUS}[label]


@dataclass(frozen=True)
class ControllerGains:
    lam: float
    lam_f: float
    y_d: float
    u_min: float
    u_max: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise InputError(f"lambda must be > 0, got {self.lam}")
        if not (math.isfinite(self.lam_f) and self.lam_f > 0):
            raise InputError(f"lambda_f must be > 0, got {self.lam_f}")
        if not self.u_min < self.u_max:
            raise InputError("u_min must be < u_max")

    @property
    def z_default(self):
        return 0.5 * (self.u_min + self.u_max)


@dataclass
class ControllerState:
    z: float


def saturate(g, v):
    return min(max(v, g.u_min), g.u_max)


def control_output(g, y, s):
    return saturate(g, g.lam * (g.y_d - y) + s.z)


def filter_rhs(g, u, s):
    return g.lam_f * (u - s.z)


def switching_value(g, y, z):
    """z - lam (y - y_d): the saturation argument; regions are its level sets."""
    return z - g.lam * (y - g.y_d)


def classify_region(g, y, z):
    # closed sets for the saturated regions: ties go to A_plus / A_minus
    s = switching_value(g, y, z)
    if s >= g.u_max:
        return Region.A_PLUS
    if s <= g.u_min:
        return Region.A_MINUS
    return Region.A_ZERO
