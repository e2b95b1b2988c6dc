"""Exact optimal liquidation control for the identity payoff.

Provides the Riccati-pair functions xi and pi, their f/g recombination, the
feedback rate nu_star, the funding-blind baseline rate, and analytic
mean/variance of the auxiliary process A = (b*beta + 2*phi)*Q + beta*Z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from .model import (
    DegenerateFrequency,
    MarketState,
    ModelParams,
    PermanentImpactZero,
    Strategy,
)

ArrayLike = Union[float, np.ndarray]

# Below this the z-coefficient (xi - pi)/(2b) is evaluated by direct ODE
# integration of f and g instead; the quotient cancels catastrophically.
B_MIN = 1e-8


@dataclass(frozen=True)
class ClosedFormConstants:
    """Constants a = 2*sqrt(k*(b*beta + phi)), omega = a/(2k),
    C = (a + b - 2*alpha)/(a - b + 2*alpha), m = sqrt(b*beta + phi).

    degenerate marks b*beta + phi == 0, where omega = 0 and the exponential
    formulas are replaced by their rational limits.
    """

    a: float
    omega: float
    C: float
    m: float
    degenerate: bool


def constants(params: ModelParams) -> ClosedFormConstants:
    """Constants of the closed-form control. 2*alpha > b gives C in (-1, 1)."""
    drive = params.b * params.beta + params.phi
    if drive < 0.0:
        # possible only for b < 0 with beta > 0; oscillatory regime unsupported
        raise DegenerateFrequency(f"b*beta + phi = {drive!r} is negative")
    B = params.b - 2.0 * params.alpha
    if drive == 0.0:
        return ClosedFormConstants(a=0.0, omega=0.0, C=-1.0, m=0.0, degenerate=True)
    a = 2.0 * math.sqrt(params.k * drive)
    return ClosedFormConstants(
        a=a,
        omega=a / (2.0 * params.k),
        C=(a + B) / (a - B),
        m=math.sqrt(drive),
        degenerate=False,
    )


def xi(t: ArrayLike, params: ModelParams) -> ArrayLike:
    """xi(t) = a*(C*e^{-2w(T-t)} - 1)/(C*e^{-2w(T-t)} + 1); xi(T) = b - 2*alpha.

    Exponents are nonpositive for t <= T, so large omega*T cannot overflow.
    """
    c = constants(params)
    tau = params.T - t
    B = params.b - 2.0 * params.alpha
    if c.degenerate:
        # limit of the Riccati solution as the restoring term vanishes
        return B / (1.0 - B * tau / (2.0 * params.k))
    e2 = np.exp(-2.0 * c.omega * tau)
    val = c.a * (c.C * e2 - 1.0) / (c.C * e2 + 1.0)
    # pin the terminal condition exactly (the formula reaches it only up to
    # the roundoff of C)
    if np.ndim(val) == 0:
        return B if tau == 0.0 else float(val)
    return np.where(tau == 0.0, B, val)


def pi(t: ArrayLike, params: ModelParams) -> ArrayLike:
    """Companion function pi(t), terminal value b - 2*alpha."""
    c = constants(params)
    tau = params.T - t
    B = params.b - 2.0 * params.alpha
    if c.degenerate:
        return B / (1.0 - B * tau / (2.0 * params.k))
    e1 = np.exp(-c.omega * tau)
    e2 = e1 * e1
    D = c.C * e2 + 1.0
    first = -4.0 * params.k * params.phi * (c.C * e1 + 1.0) * (1.0 - e1) / (c.a * D)
    val = first + e1 * (c.C + 1.0) * B / D
    if np.ndim(val) == 0:
        return B if tau == 0.0 else float(val)
    return np.where(tau == 0.0, B, val)


def _fg_rhs(t: float, y: np.ndarray, params: ModelParams) -> np.ndarray:
    f, g = y
    w = (params.b * g + f) / (2.0 * params.k)
    return np.array(
        [params.b * params.beta + 2.0 * params.phi - f * w, params.beta - g * w]
    )


@lru_cache(maxsize=32)
def _fg_table(params: ModelParams, n: int = 4000) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward RK4 solve of the f,g system on a terminally refined grid."""
    from .ode import power_graded_grid, rk4_backward

    t_grid = power_graded_grid(params.T, n)
    yT = np.array([params.b - 2.0 * params.alpha, 0.0])
    ys = rk4_backward(lambda t, y: _fg_rhs(t, y, params), yT, t_grid)
    return t_grid, ys[:, 0], ys[:, 1]


def fg(t: ArrayLike, params: ModelParams) -> Tuple[ArrayLike, ArrayLike]:
    """Coefficients of q and z = p - s in 2k * nu_star.

    f = (xi + pi)/2 and g = (xi - pi)/(2b); for b <= B_MIN the quotient is
    replaced by direct integration of the f,g ODE system.

    At beta = 0 the g equation has the zero solution and xi = pi exactly,
    so g is pinned to 0 rather than left to the rounding of xi - pi.
    """
    if params.beta == 0.0:
        x = xi(t, params)
        return x, x * 0.0
    if params.b > B_MIN:
        x = xi(t, params)
        y = pi(t, params)
        return (x + y) / 2.0, (x - y) / (2.0 * params.b)
    t_grid, f_arr, g_arr = _fg_table(params)
    return np.interp(t, t_grid, f_arr), np.interp(t, t_grid, g_arr)


def nu_star(state: MarketState, params: ModelParams) -> float:
    """Optimal feedback rate for the identity payoff:
    (1/4k) * [(xi + pi)*q + (xi - pi)*(p - s)/b].
    """
    if params.b <= B_MIN:
        raise PermanentImpactZero(
            f"b = {params.b!r} <= {B_MIN}; use ClosedFormStrategy (f,g ODE path)"
        )
    x = xi(state.t, params)
    y = pi(state.t, params)
    return (1.0 / (4.0 * params.k)) * (
        (x + y) * state.q + (x - y) * (state.p - state.s) / params.b
    )


def _beta_free(params: ModelParams) -> ModelParams:
    return replace(params, beta=0.0)


def almgren_chriss_rate(state: MarketState, params: ModelParams) -> float:
    """Funding-blind baseline rate: the beta = 0 closed form, q-term only."""
    return xi(state.t, _beta_free(params)) * state.q / (2.0 * params.k)


def ac_inventory_path(
    params: ModelParams, q0: float, n: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic inventory path under the funding-blind rate.

    Integrates Q' = xi0(t) Q / 2k by RK4 on an n-point uniform grid.
    """
    if n < 2:
        raise ValueError("need at least 2 grid points")
    p0 = _beta_free(params)
    t_grid = np.linspace(0.0, params.T, n)
    q = np.empty(n)
    q[0] = q0

    def rhs(t: float, y: float) -> float:
        return xi(t, p0) * y / (2.0 * params.k)

    for i in range(n - 1):
        t, h = t_grid[i], t_grid[i + 1] - t_grid[i]
        k1 = rhs(t, q[i])
        k2 = rhs(t + h / 2.0, q[i] + h / 2.0 * k1)
        k3 = rhs(t + h / 2.0, q[i] + h / 2.0 * k2)
        k4 = rhs(t + h, q[i] + h * k3)
        q[i + 1] = q[i] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return t_grid, q


def a_mean(t: ArrayLike, params: ModelParams, A0: float, Y0: float) -> ArrayLike:
    """E[A_t] = cosh(w t) A0 + m sinh(w t) Y0 from the initial reduced state
    (A0, Y0), with Y = (f Q + g Z)/sqrt(k).

    Evaluated as grouped exponentials. The growing mode carries the roundoff
    of A0 + m*Y0, which is amplified by e^{w t}; for large w*t prefer
    a_mean_from_state, which cancels that mode analytically.
    """
    c = constants(params)
    if c.degenerate:
        return A0 + 0.0 * np.asarray(t)
    up = 0.5 * (A0 + c.m * Y0)
    dn = 0.5 * (A0 - c.m * Y0)
    return up * np.exp(c.omega * np.asarray(t)) + dn * np.exp(-c.omega * np.asarray(t))


def a_mean_from_state(t: ArrayLike, params: ModelParams, q0: float, z0: float) -> ArrayLike:
    """E[A_t] from the initial market state (q0, z0 = p0 - s0).

    Uses a rearrangement in which the coefficient of the growing mode is
    formed without subtractive cancellation, so it stays accurate when
    omega*T is large (small k).
    """
    c = constants(params)
    drive = params.b * params.beta + params.phi
    A0 = (params.b * params.beta + 2.0 * params.phi) * q0 + params.beta * z0
    if c.degenerate:
        return A0 + 0.0 * np.asarray(t)
    if params.b <= B_MIN:
        f0, g0 = fg(0.0, params)
        Y0 = (f0 * q0 + g0 * z0) / math.sqrt(params.k)
        return a_mean(t, params, A0, Y0)
    B = params.b - 2.0 * params.alpha
    eT = math.exp(-c.omega * params.T)
    DT = c.C * eT * eT + 1.0
    Xt = 2.0 * drive * c.C * eT / DT
    Pt = (
        2.0 * params.phi * c.C * eT
        + (1.0 - c.C) * params.phi
        + c.a * (c.C + 1.0) * B / (4.0 * params.k)
    ) / DT
    Gt = q0 * (Xt + Pt) + z0 * (Xt - Pt) / params.b
    t = np.asarray(t)
    return 0.5 * np.exp(-c.omega * (params.T - t)) * Gt + 0.5 * np.exp(
        -c.omega * t
    ) * (2.0 * A0 - eT * Gt)


def a_variance(t: float, params: ModelParams, n_quad: int = 512) -> float:
    """Var[A_t] by composite Simpson quadrature of the squared fundamental-
    solution integrand over [0, t] (n_quad panels).

    The integrand beta*Sigma*cosh(w(t-s)) + w*Sigma*g(s)*sinh(w(t-s)) is
    evaluated in a form with only nonpositive exponents.
    """
    if t == 0.0:
        return 0.0
    Sigma = math.sqrt(params.Sigma2)
    c = constants(params)
    if c.degenerate:
        return params.beta**2 * params.Sigma2 * t
    s = np.linspace(0.0, t, 2 * n_quad + 1)
    e_Ts = np.exp(-c.omega * (params.T - s))
    Ds = c.C * e_Ts * e_Ts + 1.0
    integrand = (params.beta * Sigma / (2.0 * Ds)) * (
        math.exp(-c.omega * (params.T - t)) * (2.0 * c.C * e_Ts - c.C + 1.0)
        + np.exp(-c.omega * (t - s)) * ((c.C - 1.0) * e_Ts + 2.0)
    )
    w = np.ones_like(s)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    h = t / (2 * n_quad)
    return float(np.sum(w * integrand * integrand) * h / 3.0)


class ClosedFormStrategy(Strategy):
    """Feedback strategy nu = (f(t) q + g(t) z)/2k.

    Works for any b >= 0: the f,g evaluation falls back to the ODE table
    below B_MIN where nu_star's division by b is unusable.
    """

    def __init__(self, params: ModelParams):
        self.params = params

    def rate(self, state: MarketState) -> float:
        f, g = fg(state.t, self.params)
        return (f * state.q + g * (state.p - state.s)) / (2.0 * self.params.k)

    def rate_arrays(self, t, q, p, s):
        f, g = fg(t, self.params)
        return (f * q + g * (p - s)) / (2.0 * self.params.k)


class AlmgrenChrissStrategy(Strategy):
    """Funding-blind baseline: the beta = 0 rate, ignoring the spread."""

    def __init__(self, params: ModelParams):
        self.params = params
        self._beta0 = _beta_free(params)

    def rate(self, state: MarketState) -> float:
        return xi(state.t, self._beta0) * state.q / (2.0 * self.params.k)

    def rate_arrays(self, t, q, p, s):
        return xi(t, self._beta0) * q / (2.0 * self.params.k)
