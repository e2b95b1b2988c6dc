"""Core model objects: parameters, payoff functions, market state, strategies.

Everything downstream (closed-form control, asymptotic controls, the
simulator) consumes the immutable types defined here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Mapping, Optional, Union

import numpy as np
from scipy.special import expit

ArrayLike = Union[float, np.ndarray]

# Relative step for finite-difference payoff derivatives; the actual step is
# h_fd * max(1, |s|).
DEFAULT_H_FD = 1e-4


class ParamError(ValueError):
    """A parameter record violates a model invariant."""


class NonPositiveParameter(ParamError):
    """A parameter is outside its required sign range."""

    def __init__(self, field: str, requirement: str, value: float):
        self.field = field
        self.value = value
        super().__init__(f"parameter {field} must be {requirement}, got {value!r}")


class RhoOutOfRange(ParamError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"rho must lie in (-1, 1), got {value!r}")


class ImpactPenaltyOrder(ParamError):
    """2*alpha > b fails; the backward ODE system may blow up."""

    def __init__(self, alpha: float, b: float):
        self.alpha = alpha
        self.b = b
        super().__init__(f"need 2*alpha > b, got alpha={alpha!r}, b={b!r}")


class DegenerateFrequency(ParamError):
    """b*beta + phi (or phi alone for the beta-free constants) hit zero or
    left the supported nonnegative range."""


class PermanentImpactZero(ValueError):
    """The closed-form rate divides by b; use the f,g ODE path instead."""


class MissingDerivative(ValueError):
    """A payoff derivative was requested but no rule to compute it exists."""


class TimeOutOfGrid(ValueError):
    """Query time falls outside a solved coefficient grid."""


class NonFinite(ArithmeticError):
    """A state or coefficient left the finite range."""


@dataclass(frozen=True)
class ModelParams:
    """Market and preference constants.

    T: horizon; k: temporary impact; b: permanent impact; alpha: terminal
    inventory penalty; phi: running inventory penalty; beta: funding rate
    coefficient; sigma/eta: spot and perpetual volatilities; rho: Brownian
    correlation. Requires k, alpha, T > 0; phi, beta, sigma, eta >= 0;
    rho in (-1, 1); 2*alpha > b.
    """

    T: float
    k: float
    b: float
    alpha: float
    phi: float
    beta: float
    sigma: float
    eta: float
    rho: float

    def __post_init__(self):
        for name in ("k", "alpha", "T"):
            v = getattr(self, name)
            if not (v > 0.0):
                raise NonPositiveParameter(name, "> 0", v)
        for name in ("phi", "beta", "sigma", "eta"):
            v = getattr(self, name)
            if not (v >= 0.0):
                raise NonPositiveParameter(name, ">= 0", v)
        if not (-1.0 < self.rho < 1.0):
            raise RhoOutOfRange(self.rho)
        if not (2.0 * self.alpha > self.b):
            raise ImpactPenaltyOrder(self.alpha, self.b)
        if not all(math.isfinite(getattr(self, f.name)) for f in fields(self)):
            raise NonFinite("parameters must be finite")

    @property
    def Sigma2(self) -> float:
        """Squared volatility of the spread z = p - s."""
        return self.sigma**2 + self.eta**2 - 2.0 * self.rho * self.sigma * self.eta


def validate_params(raw: Union[Mapping, "ModelParams"]) -> ModelParams:
    """Build ModelParams from a mapping, naming the violated invariant on failure.

    Raises NonPositiveParameter, RhoOutOfRange or ImpactPenaltyOrder.
    """
    if isinstance(raw, ModelParams):
        return raw
    names = {f.name for f in fields(ModelParams)}
    unknown = set(raw) - names
    if unknown:
        raise ParamError(f"unknown parameter field(s): {sorted(unknown)}")
    missing = names - set(raw)
    if missing:
        raise ParamError(f"missing parameter field(s): {sorted(missing)}")
    coerced = {}
    for name in names:
        try:
            coerced[name] = float(raw[name])
        except (TypeError, ValueError):
            raise ParamError(f"parameter {name} is not a number: {raw[name]!r}") from None
    return ModelParams(**coerced)


@dataclass(frozen=True)
class MarketState:
    """Snapshot (t, x, q, p, s): time, cash, inventory, perpetual price, spot."""

    t: float
    x: float
    q: float
    p: float
    s: float

    @property
    def z(self) -> float:
        return self.p - self.s


class PayoffSpec:
    """Payoff function psi(s) with derivatives up to order 2.

    Subclasses implement value/deriv1/deriv2; all accept scalars or arrays.
    """

    def value(self, s: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def deriv1(self, s: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def deriv2(self, s: ArrayLike) -> ArrayLike:
        raise NotImplementedError


class Identity(PayoffSpec):
    """psi(s) = s."""

    def value(self, s: ArrayLike) -> ArrayLike:
        return s

    def deriv1(self, s: ArrayLike) -> ArrayLike:
        return s * 0.0 + 1.0

    def deriv2(self, s: ArrayLike) -> ArrayLike:
        return s * 0.0


@dataclass(frozen=True)
class Logistic(PayoffSpec):
    """psi(s) = s + 2L / (1 + exp(-kappa*(s - S0 - DeltaS)))."""

    L: float
    kappa: float
    S0: float
    DeltaS: float

    @property
    def center(self) -> float:
        return self.S0 + self.DeltaS

    def value(self, s: ArrayLike) -> ArrayLike:
        return s + 2.0 * self.L * expit(self.kappa * (s - self.center))

    def deriv1(self, s: ArrayLike) -> ArrayLike:
        w = expit(self.kappa * (s - self.center))
        return 1.0 + 2.0 * self.L * self.kappa * w * (1.0 - w)

    def deriv2(self, s: ArrayLike) -> ArrayLike:
        w = expit(self.kappa * (s - self.center))
        return 2.0 * self.L * self.kappa**2 * w * (1.0 - w) * (1.0 - 2.0 * w)


@dataclass(frozen=True)
class Quadratic(PayoffSpec):
    """psi(s) = s + L*(s - S0 - DeltaS)**2 + DeltaPsi."""

    L: float
    S0: float
    DeltaS: float
    DeltaPsi: float

    def value(self, s: ArrayLike) -> ArrayLike:
        d = s - self.S0 - self.DeltaS
        return s + self.L * d * d + self.DeltaPsi

    def deriv1(self, s: ArrayLike) -> ArrayLike:
        return 1.0 + 2.0 * self.L * (s - self.S0 - self.DeltaS)

    def deriv2(self, s: ArrayLike) -> ArrayLike:
        return s * 0.0 + 2.0 * self.L


class Custom(PayoffSpec):
    """User-supplied payoff.

    Derivatives use the given functions when present; otherwise central
    differences with step h_fd * max(1, |s|), and if h_fd is also None the
    derivative is unavailable (MissingDerivative).
    """

    def __init__(
        self,
        value_fn: Callable[[ArrayLike], ArrayLike],
        deriv1_fn: Optional[Callable[[ArrayLike], ArrayLike]] = None,
        deriv2_fn: Optional[Callable[[ArrayLike], ArrayLike]] = None,
        h_fd: Optional[float] = DEFAULT_H_FD,
    ):
        if h_fd is not None and not h_fd > 0.0:
            raise ValueError("h_fd must be positive or None")
        self._value_fn = value_fn
        self._deriv1_fn = deriv1_fn
        self._deriv2_fn = deriv2_fn
        self.h_fd = h_fd

    def value(self, s: ArrayLike) -> ArrayLike:
        return self._value_fn(s)

    def _step(self, s: ArrayLike, order: int) -> ArrayLike:
        if self.h_fd is None:
            raise MissingDerivative(
                f"order-{order} derivative requested but no derivative function "
                "was supplied and h_fd is unset"
            )
        return self.h_fd * np.maximum(1.0, np.abs(s))

    def deriv1(self, s: ArrayLike) -> ArrayLike:
        if self._deriv1_fn is not None:
            return self._deriv1_fn(s)
        h = self._step(s, 1)
        return (self._value_fn(s + h) - self._value_fn(s - h)) / (2.0 * h)

    def deriv2(self, s: ArrayLike) -> ArrayLike:
        if self._deriv2_fn is not None:
            return self._deriv2_fn(s)
        h = self._step(s, 2)
        f0 = self._value_fn(s)
        return (self._value_fn(s + h) - 2.0 * f0 + self._value_fn(s - h)) / (h * h)


def payoff_eval(spec: PayoffSpec, s: ArrayLike, order: int) -> ArrayLike:
    """psi(s), psi'(s) or psi''(s) for order 0, 1, 2."""
    if order == 0:
        return spec.value(s)
    if order == 1:
        return spec.deriv1(s)
    if order == 2:
        return spec.deriv2(s)
    raise ValueError(f"order must be 0, 1 or 2, got {order!r}")


def funding_rate(params: ModelParams, spec: PayoffSpec, p: ArrayLike, s: ArrayLike) -> ArrayLike:
    """Instantaneous funding payment rate per unit inventory: beta*(p - psi(s))."""
    return params.beta * (p - spec.value(s))


class Strategy:
    """Feedback trading rule: a pure map from market state to trade rate."""

    def rate(self, state: MarketState) -> float:
        raise NotImplementedError

    def rate_arrays(
        self, t: float, q: np.ndarray, p: np.ndarray, s: np.ndarray
    ) -> np.ndarray:
        """Vectorized rate over aligned state arrays at a common time.

        Subclasses override with a closed-form broadcast; this fallback loops.
        """
        q, p, s = np.broadcast_arrays(q, p, s)
        out = np.empty(q.shape)
        flat_q, flat_p, flat_s = q.ravel(), p.ravel(), s.ravel()
        flat_out = out.ravel()
        for i in range(flat_q.size):
            flat_out[i] = self.rate(
                MarketState(t=t, x=0.0, q=flat_q[i], p=flat_p[i], s=flat_s[i])
            )
        return out
