"""Closed-form control for the identity payoff and the A-process formulas.

Frozen reference numbers were computed independently with 50-digit
arithmetic from the explicit formulas (constants, xi, pi, f, g, the optimal
rate, and the A-process mean and variance integrals).
"""
import math
from dataclasses import replace

import numpy as np
import pytest

from perpliq import (
    AlmgrenChrissStrategy,
    ClosedFormStrategy,
    DegenerateFrequency,
    Identity,
    MarketState,
    ModelParams,
    PermanentImpactZero,
    a_mean,
    a_mean_from_state,
    a_variance,
    ac_inventory_path,
    constants,
    fg,
    nu_star,
    pi,
    xi,
)
from perpliq.closed_form import B_MIN


class TestConstants:
    def test_frozen_core(self, core):
        c = constants(core)
        assert c.a == pytest.approx(0.6324555320336758664, rel=1e-14)
        assert c.omega == pytest.approx(3.162277660168379332, rel=1e-14)
        assert c.C == pytest.approx(-0.99369223769433526475, rel=1e-14)
        assert not c.degenerate

    def test_zero_permanent_impact(self):
        # b = 0, phi = k collapses a to 2k and omega to 1
        p = ModelParams(T=1.0, k=0.1, b=0.0, alpha=100.0, phi=0.1, beta=5.0,
                        sigma=1.0, eta=1.0, rho=0.3)
        c = constants(p)
        assert c.a == pytest.approx(2.0 * p.k, rel=1e-15)
        assert c.omega == pytest.approx(1.0, rel=1e-15)

    def test_degenerate_flag(self, core):
        c = constants(replace(core, beta=0.0, phi=0.0))
        assert c.degenerate
        assert c.a == 0.0 and c.omega == 0.0 and c.C == -1.0

    def test_negative_drive_rejected(self, core):
        # b < 0 with beta > 0 can push b*beta + phi below zero
        with pytest.raises(DegenerateFrequency):
            constants(replace(core, b=-1.0, beta=1.0, phi=0.5))


class TestXiPi:
    def test_frozen_values(self, core):
        assert xi(0.0, core) == pytest.approx(-0.63471167359549119447, rel=1e-13)
        assert pi(0.0, core) == pytest.approx(-0.34409035201858112568, rel=1e-13)
        assert xi(0.5, core) == pytest.approx(-0.68799667944788177414, rel=1e-13)
        assert pi(0.5, core) == pytest.approx(-0.47940528661636783316, rel=1e-13)

    def test_terminal_pinned_exactly(self, core):
        B = core.b - 2.0 * core.alpha
        assert xi(core.T, core) == B
        assert pi(core.T, core) == B

    def test_xi_negative(self, core):
        t = np.linspace(0.0, core.T, 257)
        assert np.all(xi(t, core) < 0.0)

    def test_degenerate_rational_form(self, core):
        # with beta = phi = 0 the solution is the explicit rational function
        p = replace(core, beta=0.0, phi=0.0)
        B = p.b - 2.0 * p.alpha
        for t in (0.0, 0.3, 0.7, 0.999):
            tau = p.T - t
            ref = B / (1.0 - B * tau / (2.0 * p.k))
            assert xi(t, p) == pytest.approx(ref, rel=1e-14)

    def test_large_omega_t_no_overflow(self, a_params):
        # omega*T ~ 1100 here; the nonpositive-exponent form must not blow up
        p = replace(a_params, k=2e-5)
        v = xi(0.0, p)
        assert math.isfinite(v)
        assert v == pytest.approx(-constants(p).a, rel=1e-12)


class TestFG:
    def test_frozen_values(self, core):
        f0, g0 = fg(0.0, core)
        assert f0 == pytest.approx(-0.48940101280703616007, rel=1e-13)
        assert g0 == pytest.approx(-1.453106607884550344, rel=1e-13)

    def test_terminal(self, core):
        fT, gT = fg(core.T, core)
        assert fT == core.b - 2.0 * core.alpha
        assert gT == 0.0

    def test_g_nonpositive(self, core):
        t = np.linspace(0.0, core.T, 257)
        _, g = fg(t, core)
        assert np.all(g <= 0.0)

    def test_beta_zero_pins_g(self, core):
        # the g equation has the zero solution when beta = 0
        p = replace(core, beta=0.0)
        t = np.linspace(0.0, core.T, 101)
        f, g = fg(t, p)
        assert np.all(g == 0.0)
        assert np.array_equal(f, np.asarray(xi(t, p)))

    def test_small_b_switch_continuity(self, core):
        # just above B_MIN the quotient formula runs, just below the ODE
        # table takes over; the two must agree to interpolation accuracy
        t = np.linspace(0.0, core.T, 101)
        fa, ga = fg(t, replace(core, b=2e-8))
        fb, gb = fg(t, replace(core, b=5e-9))
        assert np.max(np.abs(fa - fb)) < 1e-4
        assert np.max(np.abs(ga - gb)) < 1e-4


class TestNuStar:
    def test_frozen_value(self, core):
        st = MarketState(0.0, 0.0, 10.0, 101.0, 100.0)
        assert nu_star(st, core) == pytest.approx(
            -31.735583679774559724, rel=1e-13)

    def test_terminal_rate(self, core):
        # xi(T) = pi(T) kills the spread term exactly, leaving (B/2k) q
        st = MarketState(core.T, 0.0, 1.0, 107.0, 93.0)
        assert nu_star(st, core) == pytest.approx(-999.5, rel=1e-13)

    def test_linear_in_state(self, core):
        t = 0.3
        v1 = nu_star(MarketState(t, 0.0, 2.0, 101.0, 100.0), core)
        v2 = nu_star(MarketState(t, 0.0, -5.0, 99.5, 100.0), core)
        v12 = nu_star(MarketState(t, 0.0, -3.0, 100.5, 100.0), core)
        # states add in (q, z): (2,1)+(-5,-0.5) = (-3, 0.5); s held at 100
        assert v12 == pytest.approx(v1 + v2, rel=1e-12)
        assert nu_star(MarketState(t, 0.0, 0.0, 100.0, 100.0), core) == 0.0

    def test_tiny_b_rejected(self, core):
        st = MarketState(0.0, 0.0, 10.0, 101.0, 100.0)
        with pytest.raises(PermanentImpactZero):
            nu_star(st, replace(core, b=B_MIN))

    def test_strategy_agrees_and_handles_b_zero(self, core):
        st = MarketState(0.4, 0.0, 3.0, 100.7, 100.0)
        strat = ClosedFormStrategy(core)
        assert strat.rate(st) == pytest.approx(nu_star(st, core), rel=1e-12)
        # b = 0 runs through the f,g table instead of raising
        strat0 = ClosedFormStrategy(replace(core, b=0.0))
        assert math.isfinite(strat0.rate(st))

    def test_rate_arrays_matches_scalar(self, core):
        strat = ClosedFormStrategy(core)
        q = np.array([1.0, -2.0, 4.0])
        p = np.array([100.5, 99.0, 101.0])
        s = np.array([100.0, 100.0, 99.5])
        batch = strat.rate_arrays(0.25, q, p, s)
        scalar = [strat.rate(MarketState(0.25, 0.0, q[i], p[i], s[i]))
                  for i in range(3)]
        assert np.allclose(batch, scalar, rtol=1e-14)


class TestAlmgrenChriss:
    def test_ignores_prices(self, core):
        strat = AlmgrenChrissStrategy(core)
        a = strat.rate(MarketState(0.2, 0.0, 5.0, 101.0, 100.0))
        b = strat.rate(MarketState(0.2, 0.0, 5.0, 90.0, 111.0))
        assert a == b

    def test_inventory_path(self, core):
        t, q = ac_inventory_path(core, 10.0, 513)
        assert t[0] == 0.0 and t[-1] == core.T
        assert q[0] == 10.0
        assert np.all(np.diff(q) < 0.0)
        assert 0.0 < q[-1] < 0.1

    def test_zero_inventory_stays_zero(self, core):
        _, q = ac_inventory_path(core, 0.0, 65)
        assert np.all(q == 0.0)


class TestAMean:
    def test_initial_value(self, a_params):
        assert a_mean(0.0, a_params, 2.5, -1.0) == pytest.approx(2.5, rel=1e-15)
        assert a_mean(1.0, a_params, 0.0, 0.0) == 0.0

    def test_from_state_consistency(self, core):
        # the cancellation-free form must agree with the direct one where
        # the direct one is still well conditioned
        q0, z0 = 10.0, 1.0
        f0, g0 = fg(0.0, core)
        A0 = (core.b * core.beta + 2.0 * core.phi) * q0 + core.beta * z0
        Y0 = (f0 * q0 + g0 * z0) / math.sqrt(core.k)
        for t in (0.25, 1.0):
            assert a_mean_from_state(t, core, q0, z0) == pytest.approx(
                a_mean(t, core, A0, Y0), rel=1e-12)

    def test_degenerate_is_constant(self, core):
        p = replace(core, beta=0.0, phi=0.0)
        assert a_mean(0.7, p, 3.0, 11.0) == 3.0


class TestAVariance:
    def test_zero_at_start(self, a_params):
        assert a_variance(0.0, a_params) == 0.0

    def test_zero_volatility(self, a_params):
        p = replace(a_params, sigma=0.0, eta=0.0)
        assert a_variance(2.5, p) == 0.0

    def test_frozen_values(self, a_params):
        # the variance saturates quickly at these parameters
        assert a_variance(1.25, a_params) == pytest.approx(
            0.78262379212492639374, rel=1e-5)
        assert a_variance(3.75, a_params) == pytest.approx(
            0.78262379212644144632, rel=1e-5)

    def test_quadrature_refinement(self, a_params):
        assert a_variance(2.5, a_params, n_quad=8192) == pytest.approx(
            0.78262379212492639374, rel=1e-9)

    def test_nondecreasing(self, a_params):
        vals = [a_variance(t, a_params) for t in (0.25, 0.75, 1.25, 2.5, 3.75)]
        assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))
