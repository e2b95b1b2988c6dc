"""Parameter validation, payoff specs and the funding rate."""
import math

import numpy as np
import pytest

from perpliq import (
    Custom,
    Identity,
    ImpactPenaltyOrder,
    Logistic,
    MarketState,
    MissingDerivative,
    ModelParams,
    NonPositiveParameter,
    ParamError,
    Quadratic,
    RhoOutOfRange,
    funding_rate,
    payoff_eval,
    validate_params,
)

CORE = dict(T=1.0, k=0.1, b=0.1, alpha=100.0, phi=0.5, beta=5.0,
            sigma=1.0, eta=1.0, rho=0.3)


class TestValidateParams:
    def test_roundtrip(self):
        p = validate_params(CORE)
        assert isinstance(p, ModelParams)
        for name, v in CORE.items():
            assert getattr(p, name) == v
        # an already-built ModelParams passes through unchanged
        assert validate_params(p) is p

    def test_unknown_field(self):
        with pytest.raises(ParamError, match="unknown parameter"):
            validate_params({**CORE, "gamma": 1.0})

    def test_missing_field(self):
        bad = dict(CORE)
        del bad["rho"]
        with pytest.raises(ParamError, match="missing parameter"):
            validate_params(bad)

    def test_non_numeric_field(self):
        with pytest.raises(ParamError, match="not a number"):
            validate_params({**CORE, "T": "x"})

    @pytest.mark.parametrize("field", ["k", "alpha", "T"])
    def test_positivity(self, field):
        with pytest.raises(NonPositiveParameter):
            validate_params({**CORE, field: 0.0})

    @pytest.mark.parametrize("field", ["phi", "beta", "sigma", "eta"])
    def test_nonnegativity(self, field):
        with pytest.raises(NonPositiveParameter):
            validate_params({**CORE, field: -0.1})
        # zero is allowed for these
        validate_params({**CORE, field: 0.0})

    @pytest.mark.parametrize("rho", [-1.0, 1.0, 1.5])
    def test_rho_range(self, rho):
        with pytest.raises(RhoOutOfRange):
            validate_params({**CORE, "rho": rho})

    def test_impact_penalty_order(self):
        # needs 2*alpha > b
        with pytest.raises(ImpactPenaltyOrder):
            validate_params({**CORE, "alpha": 0.05})
        validate_params({**CORE, "alpha": 0.0501})


def test_sigma2(core):
    expected = 1.0 + 1.0 - 2.0 * 0.3
    assert core.Sigma2 == pytest.approx(expected, rel=1e-15)
    # perfectly hedged spread: sigma = eta, rho -> 1 drives Sigma2 to 0
    p = validate_params({**CORE, "rho": 0.999999})
    assert p.Sigma2 == pytest.approx(2.0e-6, rel=1e-8)


def test_market_state_spread():
    st = MarketState(t=0.25, x=-3.0, q=10.0, p=101.5, s=100.0)
    assert st.z == 1.5


class TestLogistic:
    # psi(s) = s + 2L/(1 + exp(-kappa (s - center))); values below were
    # computed independently with 50-digit arithmetic
    def test_center(self, logistic):
        assert logistic.center == pytest.approx(99.9, abs=0.0)

    def test_frozen_values(self, logistic):
        assert logistic.value(100.0) == pytest.approx(
            101.46211715726000976, rel=1e-12)
        assert logistic.deriv1(100.0) == pytest.approx(
            4.9322386648296370507, rel=1e-12)
        assert logistic.deriv2(100.0) == pytest.approx(
            -18.171549534589681888, rel=1e-12)

    def test_limits(self, logistic):
        # far below the center the bump vanishes, far above it adds 2L
        assert logistic.value(0.0) == pytest.approx(0.0, abs=1e-12)
        assert logistic.value(200.0) == pytest.approx(202.0, rel=1e-12)


class TestQuadratic:
    def test_frozen_values(self, quadratic):
        # s + 5 (s - 100.2)^2 - 2
        assert quadratic.value(100.0) == pytest.approx(98.2, rel=1e-14)
        assert quadratic.value(98.5) == pytest.approx(110.95, rel=1e-14)

    def test_derivatives(self, quadratic):
        s = np.linspace(95.0, 105.0, 11)
        assert np.allclose(quadratic.deriv1(s), 1.0 + 10.0 * (s - 100.2),
                           rtol=1e-14)
        assert np.allclose(quadratic.deriv2(s), 10.0, rtol=1e-14)


class TestCustom:
    def test_fd_on_quadratic_is_exact(self, quadratic):
        # central differences have zero truncation error on a parabola, so
        # only roundoff of the h ~ 1e-2 step remains
        cust = Custom(value_fn=quadratic.value)
        s = np.linspace(95.0, 105.0, 41)
        assert np.max(np.abs(cust.deriv1(s) - quadratic.deriv1(s))) < 1e-9
        assert np.max(np.abs(cust.deriv2(s) - quadratic.deriv2(s))) < 1e-7

    def test_fd_on_logistic_default_step(self, logistic):
        # the sharp logistic (kappa = 10) at s ~ 100 stresses the default
        # relative step; the contract is modest accuracy, not precision
        cust = Custom(value_fn=logistic.value)
        s = np.linspace(98.0, 102.0, 41)
        assert np.max(np.abs(cust.deriv1(s) - logistic.deriv1(s))) < 2e-2
        assert np.max(np.abs(cust.deriv2(s) - logistic.deriv2(s))) < 1e-1

    def test_supplied_derivatives_win(self, logistic):
        cust = Custom(value_fn=logistic.value, deriv1_fn=logistic.deriv1,
                      deriv2_fn=logistic.deriv2)
        assert cust.deriv1(100.0) == logistic.deriv1(100.0)
        assert cust.deriv2(100.0) == logistic.deriv2(100.0)

    def test_no_step_no_derivative(self):
        cust = Custom(value_fn=lambda s: s, h_fd=None)
        assert cust.value(3.0) == 3.0
        with pytest.raises(MissingDerivative):
            cust.deriv1(3.0)
        with pytest.raises(MissingDerivative):
            cust.deriv2(3.0)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            Custom(value_fn=lambda s: s, h_fd=0.0)


def test_payoff_eval_orders(logistic):
    s = 100.5
    assert payoff_eval(logistic, s, 0) == logistic.value(s)
    assert payoff_eval(logistic, s, 1) == logistic.deriv1(s)
    assert payoff_eval(logistic, s, 2) == logistic.deriv2(s)
    with pytest.raises(ValueError):
        payoff_eval(logistic, s, 3)


def test_identity_derivatives():
    ident = Identity()
    s = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(ident.value(s), s)
    assert np.array_equal(ident.deriv1(s), np.ones(3))
    assert np.array_equal(ident.deriv2(s), np.zeros(3))


def test_funding_rate(core, logistic):
    p, s = 101.0, 100.0
    got = funding_rate(core, logistic, p, s)
    assert got == pytest.approx(core.beta * (p - logistic.value(s)), rel=1e-15)
    # identity payoff: plain spread
    assert funding_rate(core, Identity(), p, s) == pytest.approx(
        core.beta * (p - s), rel=1e-15)


def test_params_must_be_finite():
    with pytest.raises(Exception):
        ModelParams(T=1.0, k=0.1, b=math.nan, alpha=100.0, phi=0.5,
                    beta=5.0, sigma=1.0, eta=1.0, rho=0.3)
