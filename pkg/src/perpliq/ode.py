"""Backward ODE engine and quadrature utilities.

Solves the four-function backward system behind the identity-payoff value,
evaluates the value surface, and provides Gaussian expectations plus the
weighted conditional-expectation integral gamma0 used by the small-beta
control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.special import erfcx, ndtr

from .closed_form import _beta_free, constants
from .model import (
    Identity,
    Logistic,
    MarketState,
    ModelParams,
    NonFinite,
    PayoffSpec,
    Quadratic,
    TimeOutOfGrid,
)

ArrayLike = Union[float, np.ndarray]

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)


def power_graded_grid(T: float, n: int, power: float = 2.0) -> np.ndarray:
    """Ascending grid of n+1 points on [0, T] clustered near t = T.

    Spacing shrinks like (T - t)^((power-1)/power) toward the right endpoint,
    which is where the backward system has its boundary layer when the
    terminal inventory penalty is large. power = 1 is a uniform grid.

    Uses arange/n rather than linspace so grids for n and m*n share points
    bit-for-bit.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    s = np.arange(n + 1) / n
    return T - T * s[::-1] ** power


def rk4_backward(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y_terminal: np.ndarray,
    t_grid: np.ndarray,
) -> np.ndarray:
    """Classical RK4 sweep from t_grid[-1] down to t_grid[0].

    Returns the solution at every grid point, shape (len(t_grid), len(y)).
    Variable step sizes are taken directly from the grid.
    """
    n = len(t_grid) - 1
    y = np.array(y_terminal, dtype=float)
    ys = np.empty((n + 1, y.size))
    ys[n] = y
    for i in range(n, 0, -1):
        t1, t0 = t_grid[i], t_grid[i - 1]
        h = t1 - t0
        k1 = rhs(t1, y)
        k2 = rhs(t1 - h / 2.0, y - h / 2.0 * k1)
        k3 = rhs(t1 - h / 2.0, y - h / 2.0 * k2)
        k4 = rhs(t0, y - h * k3)
        y = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ys[i - 1] = y
    return ys


@dataclass(frozen=True)
class HCoefficients:
    """Time grids of the backward value coefficients h0..h3.

    Terminal values are (0, -alpha, 0, 0); the value surface is
    x + q p + h0 + h1 q^2 + h2 z^2 + h3 q z with z = p - s.
    """

    t_grid: np.ndarray
    h0: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray

    def interp(self, t: float) -> Tuple[float, float, float, float]:
        """Linear interpolation at time t; raises TimeOutOfGrid outside."""
        lo, hi = self.t_grid[0], self.t_grid[-1]
        tol = 1e-9 * max(1.0, hi - lo)
        if t < lo - tol or t > hi + tol:
            raise TimeOutOfGrid(f"t = {t!r} outside [{lo!r}, {hi!r}]")
        t = min(max(t, lo), hi)
        return (
            float(np.interp(t, self.t_grid, self.h0)),
            float(np.interp(t, self.t_grid, self.h1)),
            float(np.interp(t, self.t_grid, self.h2)),
            float(np.interp(t, self.t_grid, self.h3)),
        )


def _h_rhs(params: ModelParams) -> Callable[[float, np.ndarray], np.ndarray]:
    k, b, phi, beta = params.k, params.b, params.phi, params.beta
    Sigma2 = params.Sigma2

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        h0, h1, h2, h3 = y
        F = b * (1.0 + h3) + 2.0 * h1
        G = 2.0 * b * h2 + h3
        return np.array(
            [
                -Sigma2 * h2,
                phi - F * F / (4.0 * k),
                -G * G / (4.0 * k),
                beta - F * G / (2.0 * k),
            ]
        )

    return rhs


def solve_h_system(
    params: ModelParams, n_steps: int = 2000, grid_power: float = 2.0
) -> HCoefficients:
    """Classical RK4 integrated backward from t = T on a terminally refined
    grid, starting from the terminal slice (0, -alpha, 0, 0).

    The default grid clusters points near T: the coefficients decay from
    h1(T) = -alpha over a layer of width O(k/alpha), and a uniform grid
    needs far more steps to cross it stably.
    """
    if n_steps < 2:
        raise ValueError("need n_steps >= 2")
    t_grid = power_graded_grid(params.T, n_steps, grid_power)
    yT = np.array([0.0, -params.alpha, 0.0, 0.0])
    with np.errstate(over="ignore", invalid="ignore"):
        ys = rk4_backward(_h_rhs(params), yT, t_grid)
    if not np.isfinite(ys).all():
        raise NonFinite(
            "h-system integration left the finite range; "
            "check 2*alpha > b and increase n_steps"
        )
    return HCoefficients(t_grid, ys[:, 0], ys[:, 1], ys[:, 2], ys[:, 3])


def value_identity(state: MarketState, coeffs: HCoefficients) -> float:
    """Identity-payoff value surface x + q p + h0 + h1 q^2 + h2 z^2 + h3 q z."""
    h0, h1, h2, h3 = coeffs.interp(state.t)
    q, z = state.q, state.p - state.s
    return state.x + q * state.p + h0 + h1 * q * q + h2 * z * z + h3 * q * z


@dataclass(frozen=True)
class QuadratureRule:
    """Either a Gauss-Hermite rule with n nodes or composite Simpson with n panels."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("gauss_hermite", "simpson"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("need n >= 1")


DEFAULT_GH_RULE = QuadratureRule("gauss_hermite", 40)


@lru_cache(maxsize=16)
def gauss_hermite_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Physicists' Gauss-Hermite nodes and weights (weights sum to sqrt(pi))."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w


def simpson_nodes_weights(a: float, b: float, n_panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """2*n_panels + 1 equally spaced nodes on [a, b] with Simpson weights."""
    x = np.linspace(a, b, 2 * n_panels + 1)
    w = np.ones(2 * n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (b - a) / (2 * n_panels) / 3.0
    return x, w


# Below this value of kappa*sqrt(var) the logistic term varies slowly across
# the Gaussian bulk and plain Gauss-Hermite is already exact to ~1e-12, while
# the reflection series would need O(|s-c|/(kappa*var)) terms.
_LOGISTIC_SERIES_MIN_KSD = 0.1
_LOGISTIC_SERIES_TERMS = 48


def _sigmoid_gaussian_mean(delta: ArrayLike, sd: float, kappa: float) -> np.ndarray:
    """E[sigmoid(kappa*(Y - c))] for Y ~ N(c + delta, sd^2), exact series.

    Expands the sigmoid in e^{-kappa|y-c|} tails; each term integrates
    against the Gaussian into scaled-complementary-error-function values.
    Reflection maps to delta <= 0 so all erfcx arguments stay controlled,
    and the alternating tail is summed by repeated averaging.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    r = -np.abs(delta) / sd
    head = ndtr(r)
    pref = 0.5 * np.exp(-0.5 * r * r)
    j = np.arange(1, _LOGISTIC_SERIES_TERMS + 1)
    a = j * (kappa * sd) / SQRT2
    w1 = a[:, None] - r[None, :] / SQRT2
    w2 = a[:, None] + r[None, :] / SQRT2
    pref_b = np.broadcast_to(pref[None, :], w2.shape)
    term1 = pref_b * erfcx(w1)
    term2 = np.empty(w2.shape)
    neg = w2 < 0.0
    term2[~neg] = pref_b[~neg] * erfcx(w2[~neg])
    if neg.any():
        A = np.broadcast_to(a[:, None], w2.shape)[neg]
        R = np.broadcast_to(r[None, :], w2.shape)[neg]
        # pref * erfcx(w2) for w2 < 0 via erfcx(-x) reflection; the combined
        # exponent a*(a + sqrt(2) r) is <= 0 exactly when w2 < 0
        term2[neg] = np.exp(A * (A + SQRT2 * R)) - pref_b[neg] * erfcx(-w2[neg])
    signs = np.where(j % 2 == 1, 1.0, -1.0)
    terms = signs[:, None] * (term1 - term2)
    partial = np.cumsum(terms, axis=0)
    while partial.shape[0] > 1:
        partial = 0.5 * (partial[:-1] + partial[1:])
    low = head - partial[0]
    return np.where(delta > 0.0, 1.0 - low, low)


def _gh_expectation(
    spec: PayoffSpec, s: np.ndarray, var: float, rule: QuadratureRule
) -> np.ndarray:
    x, w = gauss_hermite_nodes(rule.n)
    shift = math.sqrt(2.0 * var)
    vals = spec.value(s[None, :] + shift * x[:, None])
    return (w @ vals) / SQRT_PI


def gaussian_expectation(
    spec: PayoffSpec, s: ArrayLike, var: float, rule: Optional[QuadratureRule] = None
) -> ArrayLike:
    """E[psi(s + sqrt(var) Z)] for standard normal Z.

    Identity and quadratic payoffs use the exact moment identities. The
    logistic payoff uses an exact error-function series (Gauss-Hermite
    cannot resolve its pole structure to full accuracy), except at small
    kappa*sqrt(var) where plain Gauss-Hermite is both exact and cheaper.
    Everything else integrates with the given Gauss-Hermite rule.
    """
    if var < 0.0:
        raise ValueError("var must be nonnegative")
    if rule is None:
        rule = DEFAULT_GH_RULE
    if rule.kind != "gauss_hermite":
        raise ValueError("gaussian_expectation requires a Gauss-Hermite rule")
    if var == 0.0:
        return spec.value(s)
    if isinstance(spec, Identity):
        return s + 0.0 * np.asarray(s)
    if isinstance(spec, Quadratic):
        d = np.asarray(s) - spec.S0 - spec.DeltaS
        return s + spec.L * (d * d + var) + spec.DeltaPsi
    scalar = np.isscalar(s) or np.ndim(s) == 0
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if isinstance(spec, Logistic):
        sd = math.sqrt(var)
        if spec.kappa * sd >= _LOGISTIC_SERIES_MIN_KSD:
            mean_sig = _sigmoid_gaussian_mean(s_arr - spec.center, sd, spec.kappa)
            out = s_arr + 2.0 * spec.L * mean_sig
        else:
            out = _gh_expectation(spec, s_arr, var, rule)
    else:
        out = _gh_expectation(spec, s_arr, var, rule)
    return float(out[0]) if scalar else out


def gamma0(
    t: float,
    s: ArrayLike,
    params: ModelParams,
    spec: PayoffSpec,
    rule: Optional[QuadratureRule] = None,
    n_panels: int = 200,
) -> ArrayLike:
    """Weighted integral of E[psi(S_u) | S_t = s] over u in [t, T].

    The weight is exp(-w(u-t)) * (C e^{-2w(T-u)} + 1)/(C e^{-2w(T-t)} + 1)
    built from the beta-free constants (phi alone drives the frequency); at
    phi = 0 the weight degenerates to the rational limit
    (B(T-u) - 2k)/(B(T-t) - 2k) with B = b - 2*alpha. Outer integral by
    composite Simpson with n_panels panels, inner expectations exact or by
    Gauss-Hermite per gaussian_expectation.
    """
    scalar = np.isscalar(s) or np.ndim(s) == 0
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if t >= params.T:
        out = np.zeros_like(s_arr)
        return float(out[0]) if scalar else out
    tc = constants(_beta_free(params))
    u, w = simpson_nodes_weights(t, params.T, n_panels)
    if tc.degenerate:
        B = params.b - 2.0 * params.alpha
        weights = (B * (params.T - u) - 2.0 * params.k) / (
            B * (params.T - t) - 2.0 * params.k
        )
    else:
        e_u = np.exp(-2.0 * tc.omega * (params.T - u))
        e_t = math.exp(-2.0 * tc.omega * (params.T - t))
        weights = np.exp(-tc.omega * (u - t)) * (tc.C * e_u + 1.0) / (tc.C * e_t + 1.0)
    acc = np.zeros_like(s_arr)
    sig2 = params.sigma**2
    for ui, wi, pw in zip(u, w, weights):
        inner = gaussian_expectation(spec, s_arr, sig2 * (ui - t), rule)
        acc += wi * pw * np.asarray(inner)
    return float(acc[0]) if scalar else acc
