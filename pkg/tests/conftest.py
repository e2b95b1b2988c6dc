"""Shared parameter sets and payoffs for the test suite."""
import pytest

from perpliq import Logistic, ModelParams, Quadratic


@pytest.fixture
def core() -> ModelParams:
    # desk-scale set used throughout: one-day horizon, heavy terminal penalty
    return ModelParams(
        T=1.0, k=0.1, b=0.1, alpha=100.0, phi=0.5, beta=5.0,
        sigma=1.0, eta=1.0, rho=0.3,
    )


@pytest.fixture
def a_params() -> ModelParams:
    # long horizon with small temporary impact, for the A-process formulas
    return ModelParams(
        T=5.0, k=2e-3, b=0.1, alpha=100.0, phi=0.5, beta=5.0,
        sigma=1.0, eta=1.0, rho=0.3,
    )


@pytest.fixture
def short() -> ModelParams:
    # mild terminal penalty, short horizon: the small-T expansion regime
    return ModelParams(
        T=0.5, k=0.1, b=0.1, alpha=0.1, phi=0.5, beta=5.0,
        sigma=1.0, eta=1.0, rho=0.3,
    )


@pytest.fixture
def logistic() -> Logistic:
    return Logistic(L=1.0, kappa=10.0, S0=100.0, DeltaS=-0.1)


@pytest.fixture
def quadratic() -> Quadratic:
    return Quadratic(L=5.0, S0=100.0, DeltaS=0.2, DeltaPsi=-2.0)
