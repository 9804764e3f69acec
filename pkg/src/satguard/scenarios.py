"""Scenario factories: the shipped golden case and a randomized feasible family."""

import math
from dataclasses import dataclass

import numpy as np

from .config import load_config
from .controller import ControllerGains
from .model import LinearInternalDynamics, PlantTruth, SignalSpec, SinusoidTerm, UncertaintyEnvelope
from .numerics import spectral_abscissa
from .simulate import SimConfig
from .tuning import envelope_constants, pick_gains


def golden():
    return load_config("golden")


@dataclass
class RandomScenario:
    plant: PlantTruth
    envelope: UncertaintyEnvelope
    constants: object
    gains: ControllerGains
    sim: SimConfig


def random_metzler_hurwitz(rng, n):
    """Hurwitz A with nonnegative off-diagonal entries, so exp(A t) >= 0 elementwise."""
    while True:
        A = rng.uniform(0.0, 0.4, (n, n))
        np.fill_diagonal(A, -rng.uniform(0.8, 3.0, n))
        if spectral_abscissa(A) < -0.3:
            return A


def random_scenario(rng, t_end=300.0, h=0.005, n=None):
    """A feasible scenario with auto-picked gains.

    Nonnegative B1, C and a Metzler A make the rate-channel impulse response
    nonnegative, so the step-response sup is a valid rate gain.
    """
    n = int(rng.integers(1, 4)) if n is None else n
    A = random_metzler_hurwitz(rng, n)
    B1 = rng.uniform(0.0, 0.3, (n, 1))
    B2 = rng.normal(0.0, 0.3, (n, 1))
    C = rng.uniform(0.0, 1.0, (1, n))
    d = LinearInternalDynamics(A, B1, B2, C)

    u_min = rng.uniform(-2.0, -0.5)
    g_min = u_min + rng.uniform(0.5, 1.5)
    g_max = g_min + rng.uniform(0.3, 1.5)
    u_max = g_max + rng.uniform(0.5, 1.5)
    alpha_min = rng.uniform(0.05, 0.3)
    alpha_max = alpha_min * rng.uniform(1.0, 3.0)
    alpha_true = rng.uniform(alpha_min, alpha_max)
    w_bound = rng.uniform(0.0, 0.2)
    tau = rng.uniform(2.0, 10.0)

    half = 0.5 * (g_max - g_min)
    a1, a2 = half * rng.dirichlet((1.0, 1.0)) * 0.9
    w1, w2 = rng.uniform(0.05, 0.3, 2)
    g = SignalSpec.sinusoids(0.5 * (g_min + g_max), [SinusoidTerm(a1, w1, 0.0, "cos"),
                                                      SinusoidTerm(a2, w2, rng.uniform(0, 2 * math.pi))])
    w = SignalSpec.sinusoids(0.0, [SinusoidTerm(w_bound, rng.uniform(0.5, 2.0))])
    delta_g = abs(a1 * w1) + abs(a2 * w2)
    e = UncertaintyEnvelope(u_min, u_max, g_min, g_max, alpha_min, alpha_max, delta_g, w_bound, tau)
    p = PlantTruth(alpha_true, g, w, d, envelope=e)
    ec = envelope_constants(d, w_bound)
    lam, lam_f = pick_gains(e, ec)
    y_d = rng.uniform(-1.0, 1.0)
    gains = ControllerGains(lam, lam_f, y_d, u_min, u_max)
    sim = SimConfig(t_end, h, 20, y0=y_d + rng.uniform(-1.0, 1.0))
    return RandomScenario(p, e, ec, gains, sim)
