"""Optimal liquidation of perpetual contracts under a funding rate.

Closed-form control for the identity payoff, asymptotic controls for
arbitrary payoffs, a backward ODE engine for the value coefficients, and a
seeded Monte Carlo harness with a CLI front end.
"""
from .model import (
    Custom,
    DegenerateFrequency,
    Identity,
    ImpactPenaltyOrder,
    Logistic,
    MarketState,
    MissingDerivative,
    ModelParams,
    NonFinite,
    NonPositiveParameter,
    ParamError,
    PayoffSpec,
    PermanentImpactZero,
    Quadratic,
    RhoOutOfRange,
    Strategy,
    TimeOutOfGrid,
    funding_rate,
    payoff_eval,
    validate_params,
)
from .closed_form import (
    AlmgrenChrissStrategy,
    ClosedFormConstants,
    ClosedFormStrategy,
    a_mean,
    a_mean_from_state,
    a_variance,
    ac_inventory_path,
    almgren_chriss_rate,
    constants,
    fg,
    nu_star,
    pi,
    xi,
)
from .ode import (
    HCoefficients,
    QuadratureRule,
    gamma0,
    gaussian_expectation,
    power_graded_grid,
    rk4_backward,
    solve_h_system,
    value_identity,
)
from .asymptotic import (
    GammaCoefficients,
    NuBarStrategy,
    NuHatStrategy,
    NuTildeStrategy,
    h_tilde,
    nu_bar,
    nu_hat,
    nu_tilde,
)
from .simulator import (
    AStats,
    InventoryStats,
    PathEnsemble,
    PathRecord,
    SimConfig,
    a_process_stats,
    inventory_stats,
    run_ensemble,
    run_paths,
    simulate_path,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
