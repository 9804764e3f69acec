import math
import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A_G, B1_G, B2_G, C_G
from satguard.errors import (DimensionError, FeasibilityError, HorizonWarning, InputError, IntegrationFault,
                             OrderingError)
from satguard.numerics import (SlidingWindowMax, check_hurwitz, default_horizon, l1_impulse_norm, mat_exp,
                               rk4_step, step_response, step_response_sup, window_max, window_push)


def random_stable(rng, n):
    M = rng.normal(size=(n, n))
    return M - (np.max(np.linalg.eigvals(M).real) + rng.uniform(0.2, 2.0)) * np.eye(n)


class TestMatExp:
    def test_zero_matrix(self):
        np.testing.assert_array_equal(mat_exp(np.zeros((2, 2)), 5.0), np.eye(2))

    def test_diagonal(self):
        np.testing.assert_allclose(mat_exp(np.diag([-1.0, -2.0]), 1.0), np.diag([math.exp(-1), math.exp(-2)]),
                                   rtol=1e-14)

    def test_golden_decays(self):
        E = mat_exp(A_G, 10.0)
        lam, V = np.linalg.eig(A_G)
        oracle = (V @ np.diag(np.exp(10.0 * lam)) @ np.linalg.inv(V)).real
        np.testing.assert_allclose(E, oracle, atol=1e-14)
        assert np.all(np.abs(E) < 1e-4)

    def test_errors(self):
        with pytest.raises(DimensionError):
            mat_exp(np.zeros((2, 3)))
        with pytest.raises(InputError):
            mat_exp(np.array([[np.nan]]))
        with pytest.raises(InputError):
            mat_exp(np.eye(2), -1.0)

    @pytest.mark.parametrize("scale", [1e-3, 0.1, 1.0, 10.0, 200.0])
    def test_against_scipy(self, scale):
        rng = np.random.default_rng(int(scale * 1000))
        for n in range(1, 7):
            A = rng.normal(size=(n, n)) * scale / n
            np.testing.assert_allclose(mat_exp(A), scipy.linalg.expm(A), rtol=1e-10, atol=1e-300)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    def test_semigroup(self, n, seed, s, t):
        A = random_stable(np.random.default_rng(seed), n)
        lhs = mat_exp(A, s + t)
        rhs = mat_exp(A, s) @ mat_exp(A, t)
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * max(np.linalg.norm(lhs), 1e-300) + 1e-14


class TestQuadrature:
    def test_scalar_l1(self):
        assert l1_impulse_norm([[-1.0]], [[1.0]], [[1.0]], 60.0, 1e-3) == pytest.approx(1.0, abs=1e-6)

    def test_scalar_step(self):
        assert step_response_sup([[-1.0]], [[1.0]], [[1.0]], 60.0, 1e-3) == pytest.approx(1.0, abs=1e-6)

    def test_golden_l1_frozen(self):
        # oracle: scipy expm on a dense grid, trapezoid rule
        s = np.arange(0.0, 60.0 + 1e-12, 5e-4)
        vals = np.array([abs((C_G @ scipy.linalg.expm(A_G * x) @ B2_G)[0, 0]) for x in s[::10]])
        oracle_coarse = np.trapezoid(vals, s[::10])
        got = l1_impulse_norm(A_G, B2_G, C_G, 60.0, 1e-3)
        assert got == pytest.approx(oracle_coarse, rel=1e-4)
        assert got == pytest.approx(0.0334267704, rel=1e-7)

    def test_golden_l1_reference_value(self):
        # a reference c0 of 0.05 needs an L1 norm of 0.5; these matrices give ~0.033
        assert l1_impulse_norm(A_G, B2_G, C_G, 60.0, 1e-3) == pytest.approx(0.5, abs=0.05)

    def test_golden_step_sup_is_dc_gain(self):
        dc = float(-(C_G @ np.linalg.solve(A_G, B1_G))[0, 0])
        assert step_response_sup(A_G, B1_G, C_G, 60.0, 1e-3) == pytest.approx(dc, rel=1e-9)
        assert dc == pytest.approx(0.0393356758, rel=1e-8)

    def test_golden_step_sup_reference_value(self):
        assert step_response_sup(A_G, B1_G, C_G, 60.0, 1e-3) == pytest.approx(0.07, abs=0.01)

    @pytest.mark.parametrize("C", [C_G, C_G @ A_G])
    def test_dual_quadrature_l1(self, C):
        a = l1_impulse_norm(A_G, B2_G, C, 60.0, 1e-3)
        b = l1_impulse_norm(A_G, B2_G, C, 60.0, 5e-4, rule="trapezoid")
        assert a == pytest.approx(b, rel=1e-6)

    @pytest.mark.parametrize("C", [C_G, C_G @ A_G])
    def test_dual_quadrature_step(self, C):
        a = step_response_sup(A_G, B1_G, C, 60.0, 1e-3)
        b = step_response_sup(A_G, B1_G, C, 60.0, 5e-4, rule="trapezoid")
        assert a == pytest.approx(b, rel=1e-6)

    def test_monotone_in_horizon(self):
        prev = 0.0
        for T in (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HorizonWarning)
                v = l1_impulse_norm(A_G, B2_G, C_G, T, 1e-3)
            assert v >= prev - 1e-15
            prev = v
        settled = default_horizon(A_G)
        v1 = l1_impulse_norm(A_G, B2_G, C_G, settled, 1e-3)
        v2 = l1_impulse_norm(A_G, B2_G, C_G, 2 * settled, 1e-3)
        assert abs(v2 - v1) <= 1e-8 * v1

    def test_short_horizon_warns(self):
        with pytest.warns(HorizonWarning):
            l1_impulse_norm(A_G, B2_G, C_G, 1.0, 1e-3)

    def test_non_hurwitz(self):
        with pytest.raises(FeasibilityError):
            l1_impulse_norm([[0.1]], [[1.0]], [[1.0]], 10.0, 1e-3)
        with pytest.raises(FeasibilityError):
            check_hurwitz(np.zeros((2, 2)))

    def test_step_response_endpoint(self):
        t, s = step_response([[-2.0]], [[1.0]], [[3.0]], 30.0, 1e-3)
        np.testing.assert_allclose(s, 1.5 * (1 - np.exp(-2 * t)), atol=1e-10)


class TestRK4:
    def test_constant(self):
        assert rk4_step(lambda t, x: np.ones(1), np.zeros(1), 0.0, 0.1)[0] == pytest.approx(0.1)

    def test_decay(self):
        x = np.ones(1)
        for k in range(100):
            x = rk4_step(lambda t, x: -x, x, 0.01 * k, 0.01)
        assert x[0] == pytest.approx(math.exp(-1), abs=1e-8)

    def test_fault(self):
        with pytest.raises(IntegrationFault) as info:
            rk4_step(lambda t, x: np.array([np.nan]), np.zeros(1), 2.5, 0.1)
        assert info.value.t_last_good == 2.5

    @staticmethod
    def _terminal_error(A, x0, T, h):
        x = x0.copy()
        n = int(round(T / h))
        for k in range(n):
            x = rk4_step(lambda t, v: A @ v, x, k * h, h)
        return np.linalg.norm(x - mat_exp(A, T) @ x0)

    @pytest.mark.parametrize("seed", range(10))
    def test_order_linear(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        A = random_stable(rng, n)
        x0 = rng.normal(size=n)
        e1 = self._terminal_error(A, x0, 2.0, 0.05)
        e2 = self._terminal_error(A, x0, 2.0, 0.025)
        assert math.log2(e1 / e2) >= 3.7

    def test_golden_smooth_forcing_sixteen(self):
        # the plant channels under a smooth input: internal state driven by constant
        # rate sup and the sinusoidal disturbance, output driven by u(t) = 1 + 0.5 sin t
        g = lambda t: 1 - 0.3 * math.cos(0.1 * t) - 0.1 * math.sin(0.2 * t + math.pi / 6)

        def f(t, x):
            y, eta = x[0], x[1:]
            u = 1.0 + 0.5 * math.sin(t)
            ell = float(C_G[0] @ eta)
            return np.concatenate(([0.2 * (u - g(t) + ell)], A_G @ eta + B1_G[:, 0] * 0.5 + B2_G[:, 0] * 0.1 * math.sin(t)))

        def run(h, T=10.0):
            x = np.zeros(4)
            for k in range(int(round(T / h))):
                x = rk4_step(f, x, k * h, h)
            return x

        ref = run(0.0025)
        e1 = np.linalg.norm(run(0.1) - ref)
        e2 = np.linalg.norm(run(0.05) - ref)
        assert 12.0 < e1 / e2 < 20.0


def brute_max(samples, t_now, tau):
    vals = [v for t, v in samples if t_now - tau <= t <= t_now]
    return max(vals) if vals else 0.0


class TestSlidingWindow:
    def test_examples(self):
        w = SlidingWindowMax(3.0)
        for t, v in ((0, 1), (1, 3), (2, 2)):
            window_push(w, t, v)
        assert window_max(w, 2.0) == 3
        assert window_max(w, 4.5) == 2

    def test_empty_is_zero(self):
        assert SlidingWindowMax(1.0).max(5.0) == 0.0

    def test_errors(self):
        w = SlidingWindowMax(1.0)
        w.push(1.0, 0.5)
        with pytest.raises(OrderingError):
            w.push(0.5, 0.1)
        with pytest.raises(InputError):
            w.push(2.0, -1.0)
        with pytest.raises(InputError):
            SlidingWindowMax(0.0)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(0.1, 5.0),
           st.lists(st.tuples(st.floats(0.0, 2.0), st.floats(0.0, 10.0), st.booleans()), min_size=1, max_size=60))
    def test_matches_brute_force(self, tau, steps):
        w = SlidingWindowMax(tau)
        t = 0.0
        pushed = []
        for dt, v, query in steps:
            t += dt
            w.push(t, v)
            pushed.append((t, v))
            if query:
                assert w.max(t) == brute_max(pushed, t, tau)

    def test_million_pushes(self):
        rng = np.random.default_rng(7)
        n = 10**6
        tau = 2.5
        times = np.cumsum(rng.exponential(0.01, n))
        vals = rng.exponential(1.0, n)
        queries = set(rng.choice(n, 100, replace=False).tolist())
        w = SlidingWindowMax(tau)
        for i in range(n):
            w.push(times[i], vals[i])
            if i in queries:
                lo = np.searchsorted(times, times[i] - tau, side="left")
                assert w.max(times[i]) == vals[lo:i + 1].max()
