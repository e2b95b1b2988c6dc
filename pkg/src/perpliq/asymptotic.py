"""Approximate controls for general payoffs.

Three strategies: nu_hat (first order in the funding coefficient beta),
nu_tilde (first order in the remaining horizon), and nu_bar (the identity
closed form with the spot argument replaced by the payoff value). All are
affine in (q, p - psi(s)) at fixed time.
"""
from __future__ import annotations

from typing import Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .closed_form import ClosedFormStrategy, _beta_free, constants, nu_star, xi
from .model import Identity, MarketState, ModelParams, PayoffSpec, Strategy
from .ode import QuadratureRule, gamma0

ArrayLike = Union[float, np.ndarray]

# Above this many states per step, the small-beta strategy evaluates gamma0
# on an s-grid and interpolates instead of once per state.
_GAMMA0_GRID_CUTOVER = 64
_GAMMA0_GRID_POINTS = 257


class GammaCoefficients:
    """Time coefficients of the first-order-in-beta value expansion.

    gamma is tied to the beta-free closed form by gamma(t) = xi0(t)/2 - b/2,
    so the zeroth-order rate (b + 2 gamma(t)) q / 2k reproduces the
    funding-blind baseline exactly. gamma1 and gamma2 are the explicit
    exponential solutions of their linear backward ODEs, written with
    nonpositive exponents; at phi = 0 the frequency vanishes and the
    rational limits are used. Terminal values: gamma(T) = -alpha,
    gamma1(T) = gamma2(T) = 0.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self._beta0 = _beta_free(params)
        self.tilde = constants(self._beta0)

    def gamma(self, t: ArrayLike) -> ArrayLike:
        val = 0.5 * xi(t, self._beta0) - 0.5 * self.params.b
        # xi is pinned to b - 2*alpha at t = T; pin gamma to -alpha likewise
        if np.ndim(val) == 0:
            return -self.params.alpha if t == self.params.T else val
        return np.where(np.asarray(t) == self.params.T, -self.params.alpha, val)

    def gamma1(self, t: ArrayLike) -> ArrayLike:
        P = self.params
        tau = P.T - np.asarray(t)
        tc = self.tilde
        if tc.degenerate:
            B = P.b - 2.0 * P.alpha
            return tau * (B * tau - 4.0 * P.k) / (2.0 * (2.0 * P.k - B * tau))
        e1 = np.exp(-tc.omega * tau)
        D = tc.C * e1 * e1 + 1.0
        return (tc.C * e1 + 1.0) * (e1 - 1.0) / (tc.omega * D)

    def gamma2(self, t: ArrayLike) -> ArrayLike:
        P = self.params
        tau = P.T - np.asarray(t)
        tc = self.tilde
        B = P.b - 2.0 * P.alpha
        if tc.degenerate:
            return B * P.b * tau**2 * (B * tau - 6.0 * P.k) / (
                6.0 * (B * tau - 2.0 * P.k) ** 2
            )
        e1 = np.exp(-tc.omega * tau)
        e2 = e1 * e1
        e3 = e1 * e2
        e4 = e2 * e2
        D = tc.C * e2 + 1.0
        bracket = (
            4.0 * tc.omega * tc.C * tau * e2
            - 2.0 * (1.0 - tc.C) * (e2 - e1)
            + 2.0 * (tc.C * tc.C - tc.C) * (e2 - e3)
            + (e2 - 1.0)
            - tc.C * tc.C * (e2 - e4)
        )
        return -P.b / (2.0 * tc.omega * D * D) * bracket

    def gamma0(
        self,
        t: float,
        s: ArrayLike,
        spec: PayoffSpec,
        rule: Optional[QuadratureRule] = None,
    ) -> ArrayLike:
        """Payoff-dependent coefficient; for the identity payoff it reduces
        exactly to -gamma1(t) * s (no quadrature)."""
        if isinstance(spec, Identity):
            return -self.gamma1(t) * np.asarray(s) + 0.0
        return gamma0(t, s, self.params, spec, rule)


def nu_hat(
    state: MarketState,
    params: ModelParams,
    spec: PayoffSpec,
    rule: Optional[QuadratureRule] = None,
) -> float:
    """Small-beta rate nu0 + beta*nu1 with
    nu0 = (b + 2 gamma(t)) q / 2k and
    nu1 = (gamma0(t,s) + gamma1(t) p + (2 gamma2(t) + b gamma1(t)) q) / 2k.

    At beta = 0 this is bit-for-bit the funding-blind baseline rate.
    """
    gc = GammaCoefficients(params)
    nu0 = xi(state.t, gc._beta0) * state.q / (2.0 * params.k)
    if params.beta == 0.0:
        return nu0
    g1 = gc.gamma1(state.t)
    g2 = gc.gamma2(state.t)
    g0 = gc.gamma0(state.t, state.s, spec, rule)
    nu1 = (g0 + g1 * state.p + (2.0 * g2 + params.b * g1) * state.q) / (2.0 * params.k)
    return nu0 + params.beta * nu1


def h_tilde(
    q: float,
    p: float,
    s: float,
    params: ModelParams,
    spec: PayoffSpec,
) -> Tuple[float, float, float]:
    """Coefficients of the short-horizon value expansion
    h0t + (T-t) h1t + (T-t)^2 h2t. The second-order coefficient carries the
    payoff through sigma^2 psi''(s).
    """
    P = params
    B2 = (P.b - 2.0 * P.alpha)  # negative of the terminal rate scale
    spread = p - spec.value(s)
    h0t = -P.alpha * q * q
    h1t = (B2 * B2 / (4.0 * P.k) - P.phi) * q * q - P.beta * spread * q
    h2t = (B2 / (4.0 * P.k)) * (
        B2 * B2 / (2.0 * P.k) - 2.0 * P.phi - P.b * P.beta
    ) * q * q + (P.beta / 4.0) * (
        -(B2 / P.k) * spread + P.sigma**2 * spec.deriv2(s)
    ) * q
    return h0t, h1t, h2t


def nu_tilde(state: MarketState, params: ModelParams, spec: PayoffSpec) -> float:
    """Short-horizon rate nu0 + (T - t) nu1 with nu0 = -((2 alpha - b)/2k) q."""
    P = params
    A = 2.0 * P.alpha - P.b
    nu0 = -(A / (2.0 * P.k)) * state.q
    nu1 = (A * A / (2.0 * P.k) - (P.b * P.beta + 2.0 * P.phi)) * state.q / (
        2.0 * P.k
    ) - (P.beta / (2.0 * P.k)) * (state.p - spec.value(state.s))
    return nu0 + (P.T - state.t) * nu1


def nu_bar(state: MarketState, params: ModelParams, spec: PayoffSpec) -> float:
    """Closed-form rate with the spot argument replaced by psi(s).

    For the identity payoff this is the exact optimal rate, same code path.
    """
    sub = MarketState(t=state.t, x=state.x, q=state.q, p=state.p, s=spec.value(state.s))
    return nu_star(sub, params)


class NuHatStrategy(Strategy):
    """Feedback strategy built on nu_hat.

    For non-identity payoffs with many simultaneous states, gamma0 is
    evaluated on an s-grid spanning the batch and spline-interpolated;
    gamma0 is smooth in s (it is an integral of Gaussian smoothings of psi),
    so the grid error is far below the beta^2 truncation already accepted.
    """

    def __init__(
        self,
        params: ModelParams,
        spec: PayoffSpec,
        rule: Optional[QuadratureRule] = None,
    ):
        self.params = params
        self.spec = spec
        self.rule = rule
        self.coeffs = GammaCoefficients(params)

    def rate(self, state: MarketState) -> float:
        return nu_hat(state, self.params, self.spec, self.rule)

    def _gamma0_batch(self, t: float, s: np.ndarray) -> np.ndarray:
        gc = self.coeffs
        if isinstance(self.spec, Identity):
            return -gc.gamma1(t) * s + 0.0
        if s.size <= _GAMMA0_GRID_CUTOVER:
            return np.asarray(gc.gamma0(t, s, self.spec, self.rule))
        lo, hi = float(s.min()), float(s.max())
        pad = 1e-9 + 0.05 * (hi - lo + 1.0)
        grid = np.linspace(lo - pad, hi + pad, _GAMMA0_GRID_POINTS)
        vals = np.asarray(gc.gamma0(t, grid, self.spec, self.rule))
        # cubic keeps the batched path within ~1e-5 of direct quadrature on
        # desk-scale spot ranges; linear would cost ~1e-3 on the rate
        return CubicSpline(grid, vals)(s)

    def rate_arrays(self, t, q, p, s):
        P = self.params
        nu0 = xi(t, self.coeffs._beta0) * q / (2.0 * P.k)
        if P.beta == 0.0:
            return nu0
        g1 = self.coeffs.gamma1(t)
        g2 = self.coeffs.gamma2(t)
        g0 = self._gamma0_batch(t, np.asarray(s, dtype=float))
        nu1 = (g0 + g1 * p + (2.0 * g2 + P.b * g1) * q) / (2.0 * P.k)
        return nu0 + P.beta * nu1


class NuTildeStrategy(Strategy):
    """Feedback strategy built on nu_tilde."""

    def __init__(self, params: ModelParams, spec: PayoffSpec):
        self.params = params
        self.spec = spec

    def rate(self, state: MarketState) -> float:
        return nu_tilde(state, self.params, self.spec)

    def rate_arrays(self, t, q, p, s):
        P = self.params
        A = 2.0 * P.alpha - P.b
        nu0 = -(A / (2.0 * P.k)) * q
        nu1 = (A * A / (2.0 * P.k) - (P.b * P.beta + 2.0 * P.phi)) * q / (
            2.0 * P.k
        ) - (P.beta / (2.0 * P.k)) * (p - self.spec.value(s))
        return nu0 + (P.T - t) * nu1


class NuBarStrategy(Strategy):
    """Feedback strategy built on nu_bar; delegates to the closed form with
    the substituted spot argument, so it works for b = 0 as well."""

    def __init__(self, params: ModelParams, spec: PayoffSpec):
        self.params = params
        self.spec = spec
        self._cf = ClosedFormStrategy(params)

    def rate(self, state: MarketState) -> float:
        sub = MarketState(
            t=state.t, x=state.x, q=state.q, p=state.p, s=self.spec.value(state.s)
        )
        return self._cf.rate(sub)

    def rate_arrays(self, t, q, p, s):
        return self._cf.rate_arrays(t, q, p, self.spec.value(s))
