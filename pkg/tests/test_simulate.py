import math

import numpy as np
import pytest

from conftest import A_G, B2_G, C_G
from satguard.controller import ControllerGains, Region
from satguard.errors import ConfigError, InputError, IntegrationFault
from satguard.model import LinearInternalDynamics, PlantTruth, SignalSpec, SinusoidTerm
from satguard.simulate import (SimConfig, Trajectory, asymptotic_error, ell_excursion, simulate, verify_envelope,
                               verify_region_convergence, verify_udot_bound)
from satguard.tuning import EnvelopeConstants, envelope_constants

ZERO = SignalSpec.constant(0.0)


def quiet_plant(alpha=1.0, tau=1.0):
    d = LinearInternalDynamics([[-1.0]], [[0.0]], [[0.0]], [[1.0]])
    return PlantTruth(alpha, ZERO, ZERO, d, tau=tau)


def synthetic(regions, n_eta=1, ell=None, udot=None, vsup=None, dt=1.0):
    n = len(regions)
    cols = 6 + n_eta + 5
    data = np.zeros((n, cols))
    data[:, 0] = np.arange(n) * dt
    data[:, -2] = regions
    if ell is not None:
        data[:, 6 + n_eta] = ell
    if udot is not None:
        data[:, 4] = udot
    if vsup is not None:
        data[:, 5] = vsup
    return Trajectory(data, n_eta, dt, 1, 1.0, -1.0, 3.0)


class TestNoDisturbance:
    def test_converges(self):
        lam, lam_f, alpha = 2.0, 0.5, 1.0
        t_end = 20.0 / math.sqrt(alpha * lam * lam_f)
        tr = simulate(quiet_plant(alpha), ControllerGains(lam, lam_f, 0.5, -1.0, 3.0), SimConfig(t_end, 0.001, 10))
        assert abs(tr["y"][-1] - 0.5) < 1e-3
        reg = verify_region_convergence(tr)
        assert reg.entry_time == 0.0 and reg.invariant_after_entry

    def test_monotone_unsaturated(self):
        # start on the slow eigenvector of the unsaturated loop so e(t) = e0 exp(s t)
        lam, lam_f, alpha, y_d = 4.0, 0.25, 1.0, 0.5
        s_slow = max(np.linalg.eigvals(np.array([[-alpha * lam, alpha], [-lam_f * lam, 0.0]])).real)
        e0 = -y_d
        z0 = s_slow * e0 / alpha + lam * e0
        tr = simulate(quiet_plant(alpha), ControllerGains(lam, lam_f, y_d, -1.0, 3.0),
                      SimConfig(40.0, 0.001, 10, y0=0.0, z0=z0))
        assert np.all(tr["region"] == 0)
        assert np.all(np.diff(tr["y"]) > 0)
        np.testing.assert_allclose(tr["y"] - y_d, e0 * np.exp(s_slow * tr.t), atol=1e-9)

    def test_asymptotic_error_tiny(self):
        tr = simulate(quiet_plant(1.0), ControllerGains(2.0, 0.5, 0.5, -1.0, 3.0), SimConfig(60.0, 0.005, 20))
        assert asymptotic_error(tr) < 1e-6


class TestRegionVerifier:
    def test_never(self):
        rep = verify_region_convergence(synthetic([1] * 10))
        assert rep.entry_time is None and not rep.entered and not rep.invariant_after_entry

    def test_entry_and_exit(self):
        rep = verify_region_convergence(synthetic([1, 1, 0, 0, -1, 0]))
        assert rep.entry_time == 2.0 and not rep.invariant_after_entry and rep.exit_time == 4.0

    def test_entry_stays(self):
        rep = verify_region_convergence(synthetic([-1, 1, 0, 0, 0]))
        assert rep.entry_time == 2.0 and rep.invariant_after_entry


class TestEnvelopeVerifier:
    def test_quiescent_margins(self):
        tr = synthetic([0] * 20)
        ec = EnvelopeConstants(0.05, 0.07, 0.2, 0.42)
        rep = verify_envelope(tr, ec)
        assert rep.ell_margin == -0.05 and rep.dell_margin == -0.2 and rep.ok

    def test_halved_constants_detected(self, golden_scenario):
        p = golden_scenario.plant_truth()
        tr = simulate(p, ControllerGains(17.0, 0.0102, 1.0, -1.0, 3.0), SimConfig(100.0, 0.005, 20))
        ec = envelope_constants(p.internal, 0.1)
        half = EnvelopeConstants(ec.c0 / 2, ec.c1 / 2, ec.d0 / 2, ec.d1 / 2)
        assert verify_envelope(tr, half).violations > 0
        assert verify_envelope(tr, ec, memory=25 / 1.0).ok


class TestUdotVerifier:
    def test_saturated_constant(self):
        tr = synthetic([1] * 10)
        rep = verify_udot_bound(tr, 1.0)
        assert rep.observed == 0.0 and rep.ok and rep.margin == 1.0

    def test_violation(self):
        tr = synthetic([0] * 5, udot=[0, 0.5, 2.0, 0.5, 0], vsup=[0, 0.5, 2.0, 2.0, 2.0])
        assert not verify_udot_bound(tr, 1.0, slack=0.0).ok


class TestSimulate:
    def test_window_resolution(self):
        with pytest.raises(ConfigError):
            simulate(quiet_plant(tau=0.01), ControllerGains(1.0, 1.0, 0.0, -1.0, 3.0), SimConfig(1.0, 0.005))

    def test_bad_config(self):
        for kw in (dict(t_end=0.0), dict(t_end=1.0, h=-1.0), dict(t_end=1.0, record_every=0),
                   dict(t_end=1.0, setpoint=ZERO)):
            with pytest.raises(ConfigError):
                SimConfig(**kw)

    def test_replay_must_cover(self, tmp_path):
        f = tmp_path / "g.csv"
        f.write_text("t,value\n0,0\n5,0\n")
        d = LinearInternalDynamics([[-1.0]], [[0.0]], [[0.0]], [[1.0]])
        p = PlantTruth(1.0, SignalSpec.from_csv(str(f)), ZERO, d, tau=1.0)
        g = ControllerGains(1.0, 1.0, 0.0, -1.0, 3.0)
        simulate(p, g, SimConfig(5.0, 0.01))
        with pytest.raises(InputError):
            simulate(p, g, SimConfig(6.0, 0.01))

    def test_fault(self):
        with pytest.raises(IntegrationFault) as info:
            simulate(quiet_plant(tau=10.0), ControllerGains(1.0, 1e3, 0.0, -1.0, 3.0), SimConfig(100.0, 0.1, 1))
        assert info.value.t_last_good < 100.0
        assert info.value.trajectory is not None

    def test_record_layout(self, golden_scenario):
        tr = simulate(golden_scenario.plant_truth(), ControllerGains(17.0, 0.0102, 1.0, -1.0, 3.0),
                      SimConfig(10.0, 0.005, 20))
        assert len(tr) == 101
        assert tr.columns[:6] == ["t", "y", "z", "u", "udot_estimate", "udot_window_sup"]
        np.testing.assert_allclose(tr["ell"], tr.eta @ C_G[0], atol=1e-14)
        assert np.all(tr["u"] <= 3.0) and np.all(tr["u"] >= -1.0)
        assert np.all(tr["udot_window_sup"] >= np.abs(tr["udot_estimate"]) - 1e-12)
        assert set(r.label for r in tr.regions) <= {"A_plus", "A_minus", "A_zero"}

    def test_deterministic_csv(self, golden_scenario):
        g = ControllerGains(17.0, 0.0102, 1.0, -1.0, 3.0)
        a = simulate(golden_scenario.plant_truth(), g, SimConfig(50.0, 0.005, 20)).to_csv_string()
        b = simulate(golden_scenario.plant_truth(), g, SimConfig(50.0, 0.005, 20)).to_csv_string()
        assert a == b
        assert a.splitlines()[0].startswith("t,y,z,u,udot_estimate,udot_window_sup,eta0,eta1,eta2,ell")

    def test_setpoint_schedule(self):
        sp = SignalSpec.piecewise((0.0, 30.0), (0.0, 0.5))
        tr = simulate(quiet_plant(1.0), ControllerGains(2.0, 0.5, 0.5, -1.0, 3.0),
                      SimConfig(80.0, 0.005, 20, setpoint=sp))
        assert tr["y_d"][0] == 0.0 and tr["y_d"][-1] == 0.5
        assert asymptotic_error(tr) < 1e-6
        with pytest.raises(InputError):
            asymptotic_error(tr, 0.9)

    def test_excursion(self):
        assert ell_excursion(synthetic([0] * 3, ell=[0.1, -0.4, 0.2])) == 0.4


def test_step_refinement_converges(golden_scenario):
    # the rate sup enters with a one-step lag, so the closed loop converges at first order
    p = golden_scenario.plant_truth()
    g = ControllerGains(17.0, 0.0102, 1.0, -1.0, 3.0)
    ends = [simulate(p, g, SimConfig(100.0, h, int(round(0.1 / h)))).data[-1, 1:9] for h in (0.01, 0.005, 0.0025)]
    e1 = np.linalg.norm(ends[0] - ends[1])
    e2 = np.linalg.norm(ends[1] - ends[2])
    assert e2 < e1 and e1 / e2 > 1.7
    assert e2 < 1e-3 * np.linalg.norm(ends[2])
