"""Backward coefficient system, quadrature rules and the gamma0 integral."""
import math
from dataclasses import replace

import numpy as np
import pytest

from perpliq import (
    Custom,
    Identity,
    MarketState,
    NonFinite,
    QuadratureRule,
    TimeOutOfGrid,
    fg,
    gamma0,
    gaussian_expectation,
    power_graded_grid,
    solve_h_system,
    value_identity,
    xi,
)
from perpliq.asymptotic import GammaCoefficients
from perpliq.ode import gauss_hermite_nodes, simpson_nodes_weights


class TestGrid:
    def test_endpoints_exact(self):
        g = power_graded_grid(1.0, 100)
        assert g[0] == 0.0 and g[-1] == 1.0
        assert np.all(np.diff(g) > 0.0)

    def test_refinement_nests(self):
        # doubling the step count must keep every coarse node bit-for-bit,
        # so convergence studies compare at shared points
        g1 = power_graded_grid(5.0, 250)
        g2 = power_graded_grid(5.0, 500)
        assert np.array_equal(g2[::2], g1)

    def test_uniform_case(self):
        g = power_graded_grid(2.0, 8, power=1.0)
        assert np.allclose(g, np.linspace(0.0, 2.0, 9), rtol=1e-15)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            power_graded_grid(1.0, 0)


class TestHSystem:
    def test_terminal_slice_exact(self, core):
        c = solve_h_system(core)
        assert c.h0[-1] == 0.0
        assert c.h1[-1] == -core.alpha
        assert c.h2[-1] == 0.0 and c.h3[-1] == 0.0

    def test_rate_coefficients_match_closed_form(self, core):
        # the optimal rate from the h ansatz is (F q + G z)/2k with
        # F = b(1+h3) + 2 h1 and G = 2b h2 + h3; these must reproduce the
        # closed-form coefficients f, g
        c = solve_h_system(core)
        f_cf, g_cf = fg(c.t_grid, core)
        F = core.b * (1.0 + c.h3) + 2.0 * c.h1
        G = 2.0 * core.b * c.h2 + c.h3
        assert np.max(np.abs(F - f_cf)) < 1e-6
        assert np.max(np.abs(G - g_cf)) < 1e-6

    def test_h0_is_integral_of_h2(self, core):
        # h0' + Sigma^2 h2 = 0 with h0(T) = 0, so h0(t) equals
        # Sigma^2 * integral of h2 from t to T
        c = solve_h_system(core)
        for i in range(0, c.t_grid.size - 1, 100):
            tail = np.trapezoid(c.h2[i:], c.t_grid[i:])
            assert c.h0[i] == pytest.approx(core.Sigma2 * tail, abs=1e-6)

    def test_funding_free_block_vanishes(self, core):
        # beta = phi = 0: h2 and h3 solve their zero fixed point exactly,
        # and h0 inherits it
        p = replace(core, beta=0.0, phi=0.0)
        c = solve_h_system(p)
        assert not c.h2.any() and not c.h3.any() and not c.h0.any()
        ref = (np.asarray(xi(c.t_grid, p)) - p.b) / 2.0
        rel = np.abs(c.h1 - ref) / np.maximum(1.0, np.abs(ref))
        assert np.max(rel) < 1e-6

    def test_too_coarse_blows_up(self, core):
        # alpha = 100 puts a boundary layer at t = T that a handful of RK4
        # steps cannot cross
        for n in (2, 3, 4):
            with pytest.raises(NonFinite):
                solve_h_system(core, n_steps=n)
        with pytest.raises(ValueError):
            solve_h_system(core, n_steps=1)

    def test_interp_bounds(self, core):
        c = solve_h_system(core)
        with pytest.raises(TimeOutOfGrid):
            c.interp(-0.05)
        with pytest.raises(TimeOutOfGrid):
            c.interp(core.T + 0.05)


class TestValueIdentity:
    def test_terminal_surface(self, core):
        c = solve_h_system(core)
        st = MarketState(core.T, -2.0, 3.0, 101.0, 100.0)
        expected = st.x + st.q * st.p - core.alpha * st.q * st.q
        assert value_identity(st, c) == pytest.approx(expected, rel=1e-14)

    def test_flat_state_reduces_to_h0(self, core):
        c = solve_h_system(core)
        st = MarketState(0.25, 7.0, 0.0, 100.0, 100.0)
        h0, _, _, _ = c.interp(0.25)
        assert value_identity(st, c) == 7.0 + h0

    def test_frozen_value(self, core):
        # regression pin at the canonical initial state; the independent
        # cross-check against Monte Carlo lives in the acceptance suite
        c = solve_h_system(core)
        st = MarketState(0.0, 0.0, 10.0, 101.0, 100.0)
        assert value_identity(st, c) == pytest.approx(974.3899978771256,
                                                      rel=1e-12)


class TestQuadratureRules:
    def test_rule_validation(self):
        with pytest.raises(ValueError):
            QuadratureRule("lobatto", 10)
        with pytest.raises(ValueError):
            QuadratureRule("simpson", 0)

    def test_gauss_hermite_weights(self):
        x, w = gauss_hermite_nodes(40)
        assert x.shape == (40,) and w.shape == (40,)
        assert w.sum() == pytest.approx(math.sqrt(math.pi), rel=1e-13)

    def test_simpson_weights(self):
        x, w = simpson_nodes_weights(-1.0, 3.0, 50)
        assert x.size == 101 and w.size == 101
        assert w.sum() == pytest.approx(4.0, rel=1e-14)


class TestGaussianExpectation:
    def test_identity_exact(self):
        s = np.array([99.0, 100.0, 101.0])
        out = gaussian_expectation(Identity(), s, 0.7)
        assert np.array_equal(out, s)

    def test_quadratic_moment_formula(self, quadratic):
        # E[psi(s + sqrt(v) Z)] = s + L ((s - S0 - dS)^2 + v) + dPsi
        assert gaussian_expectation(quadratic, 99.0, 0.7) == pytest.approx(
            107.7, rel=1e-14)

    def test_logistic_frozen(self, logistic):
        assert gaussian_expectation(logistic, 100.0, 1.0) == pytest.approx(
            101.07839253331163829, rel=1e-12)

    def test_zero_variance(self, logistic):
        assert gaussian_expectation(logistic, 100.3, 0.0) == logistic.value(100.3)

    def test_negative_variance_rejected(self, logistic):
        with pytest.raises(ValueError):
            gaussian_expectation(logistic, 100.0, -1e-9)

    def test_requires_gauss_hermite(self, logistic):
        with pytest.raises(ValueError, match="Gauss-Hermite"):
            gaussian_expectation(logistic, 100.0, 1.0, QuadratureRule("simpson", 200))

    def test_series_matches_quadrature_at_crossover(self, logistic):
        # a Custom wrapper hides the payoff type, forcing plain quadrature;
        # the error-function series must agree with it wherever both are
        # accurate (small kappa * sd)
        wrap = Custom(value_fn=logistic.value, h_fd=None)
        for ksd in (0.05, 0.1, 0.3):
            var = (ksd / logistic.kappa) ** 2
            a = gaussian_expectation(logistic, 100.05, var)
            b = gaussian_expectation(wrap, 100.05, var)
            assert abs(a - b) < 1e-12

    def test_degree_ten_polynomial_exact(self):
        # GH-40 integrates polynomials up to degree 79 exactly:
        # E[(s - 100)^10] at s = 100 is 945 v^5 (ninth double factorial)
        mono = Custom(value_fn=lambda x: (np.asarray(x) - 100.0) ** 10,
                      h_fd=None)
        got = gaussian_expectation(mono, 100.0, 0.7)
        assert got == pytest.approx(945.0 * 0.7**5, rel=1e-12)

    def test_array_shape_and_scalar_type(self, logistic):
        out = gaussian_expectation(logistic, np.linspace(99, 101, 7), 0.5)
        assert out.shape == (7,)
        assert isinstance(gaussian_expectation(logistic, 100.0, 0.5), float)


class TestGamma0:
    def test_zero_at_terminal_time(self, core, logistic):
        assert gamma0(core.T, 100.0, core, logistic) == 0.0
        out = gamma0(core.T, np.array([99.0, 101.0]), core, logistic)
        assert np.array_equal(out, np.zeros(2))

    def test_identity_reduces_to_weight_integral(self, core):
        # for psi(s) = s the inner expectation is the martingale value s,
        # so gamma0 = s * W(t) with W = -gamma1
        gc = GammaCoefficients(core)
        for s in (95.0, 100.0, 105.0):
            assert gamma0(0.0, s, core, Identity()) == pytest.approx(
                -gc.gamma1(0.0) * s, rel=1e-9)

    def test_constant_payoff_scales_weight(self, core):
        gc = GammaCoefficients(core)
        flat = Custom(value_fn=lambda s: 0.0 * np.asarray(s) + 3.0, h_fd=None)
        got = gamma0(0.0, 100.0, core, flat)
        assert got == pytest.approx(-3.0 * gc.gamma1(0.0), rel=1e-10)

    def test_logistic_frozen(self, core, logistic):
        # reference from 50-digit outer quadrature of the weighted
        # expectation integral
        got = gamma0(0.0, 100.0, core, logistic)
        assert got == pytest.approx(36.527827486974159826, abs=5e-8)

    def test_zero_phi_rational_weight(self, core):
        # at phi = 0 the weight is linear in u, Simpson is exact, and the
        # identity-payoff integral has an elementary antiderivative
        p = replace(core, phi=0.0)
        B = p.b - 2.0 * p.alpha
        for t in (0.0, 0.4, 0.9):
            tau = p.T - t
            ref = 100.0 * (B * tau * tau / 2.0 - 2.0 * p.k * tau) / (
                B * tau - 2.0 * p.k)
            assert gamma0(t, 100.0, p, Identity()) == pytest.approx(
                ref, rel=1e-12)
