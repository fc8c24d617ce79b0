"""Shared vocabulary: market and grid parameters, payoffs, and the PDE residual.

The hedge cost ``u(S, t)`` of a large trader in an illiquid market solves

    u_t + (sigma^2 S^2 / 2) * u_SS / (1 - rho S u_SS)^2 = 0,   S > 0,

with terminal data ``u(S, T) = payoff(S)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Union

import numpy as np

from .errors import DomainError, SingularDenominator

if TYPE_CHECKING:
    from .closed_form import ClosedFormParams

#: ``|1 - rho S u_SS|`` below this is treated as the singular surface.
EPS_DEN = 1e-10


@dataclass(frozen=True)
class MarketParams:
    """Volatility, illiquidity and (linear model only) interest rate."""

    sigma: float
    rho: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if not np.isfinite(self.rho) or self.rho < 0:
            raise DomainError(f"rho must be >= 0, got {self.rho}")
        if not np.isfinite(self.rate) or self.rate < 0:
            raise DomainError(f"rate must be >= 0, got {self.rate}")

    def require_nonlinear(self) -> "MarketParams":
        if self.rho <= 0:
            raise DomainError("the nonlinear model needs rho > 0; rho = 0 is the linear model")
        return self


@dataclass(frozen=True)
class GridSpec:
    """Uniform mesh ``[s_min, s_max] x [0, maturity]``.

    ``n_space`` counts all space nodes including both boundaries, so there are
    ``n_space - 1`` intervals and ``n_space - 2`` interior unknowns per layer.
    ``n_time`` counts time steps; layers are ``t_0 = 0, ..., t_{n_time} = T``.
    """

    s_min: float
    s_max: float
    n_space: int
    n_time: int
    maturity: float

    def __post_init__(self):
        if not self.s_min > 0:
            raise DomainError(f"s_min must be > 0, got {self.s_min}")
        if not self.s_max > self.s_min:
            raise DomainError(f"s_max must exceed s_min, got {self.s_max} <= {self.s_min}")
        if int(self.n_space) != self.n_space or self.n_space < 3:
            raise DomainError(f"n_space must be an integer >= 3, got {self.n_space}")
        if int(self.n_time) != self.n_time or self.n_time < 1:
            raise DomainError(f"n_time must be an integer >= 1, got {self.n_time}")
        if not self.maturity > 0:
            raise DomainError(f"maturity must be > 0, got {self.maturity}")

    @classmethod
    def from_steps(cls, s_min, h, n_intervals, tau, n_time) -> "GridSpec":
        """Build a grid the way figure captions state it: step sizes plus counts."""
        return cls(s_min, s_min + h * n_intervals, n_intervals + 1, n_time, tau * n_time)

    @property
    def h(self) -> float:
        return (self.s_max - self.s_min) / (self.n_space - 1)

    @property
    def tau(self) -> float:
        return self.maturity / self.n_time

    @property
    def s(self) -> np.ndarray:
        return np.linspace(self.s_min, self.s_max, self.n_space)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.maturity, self.n_time + 1)


# -- payoffs ---------------------------------------------------------------


def _check_positive(**kw):
    for name, value in kw.items():
        if not value > 0:
            raise DomainError(f"{name} must be > 0, got {value}")


@dataclass(frozen=True)
class Call:
    """``count`` European calls struck at ``strike``."""

    strike: float
    count: float = 1.0

    def __post_init__(self):
        _check_positive(strike=self.strike, count=self.count)


@dataclass(frozen=True)
class Strangle:
    """``put_count`` puts at ``put_strike`` plus ``call_count`` calls at ``call_strike``."""

    put_strike: float
    call_strike: float
    put_count: float = 1.0
    call_count: float = 1.0

    def __post_init__(self):
        _check_positive(put_strike=self.put_strike, call_strike=self.call_strike,
                        put_count=self.put_count, call_count=self.call_count)
        if not self.put_strike < self.call_strike:
            raise DomainError("strangle needs put_strike < call_strike")


@dataclass(frozen=True)
class BullSpread:
    """Long call at ``long_strike``, short call at ``short_strike``."""

    long_strike: float
    short_strike: float

    def __post_init__(self):
        _check_positive(long_strike=self.long_strike, short_strike=self.short_strike)
        if not self.long_strike < self.short_strike:
            raise DomainError("bull spread needs long_strike < short_strike")


@dataclass(frozen=True)
class ClosedFormSnapshot:
    """Terminal data taken from the explicit family at time ``t``."""

    params: "ClosedFormParams"
    t: float


Payoff = Union[Call, Strangle, BullSpread, ClosedFormSnapshot]


def payoff_value(payoff: Payoff, S, market: MarketParams | None = None):
    """Evaluate a payoff at asset price(s) ``S``.

    ``market`` is only needed for :class:`ClosedFormSnapshot`.
    """
    S = np.asarray(S, dtype=float)
    if isinstance(payoff, Call):
        out = payoff.count * np.maximum(S - payoff.strike, 0.0)
    elif isinstance(payoff, Strangle):
        out = (payoff.put_count * np.maximum(payoff.put_strike - S, 0.0)
               + payoff.call_count * np.maximum(S - payoff.call_strike, 0.0))
    elif isinstance(payoff, BullSpread):
        out = np.maximum(S - payoff.long_strike, 0.0) - np.maximum(S - payoff.short_strike, 0.0)
    elif isinstance(payoff, ClosedFormSnapshot):
        if market is None:
            raise TypeError("a ClosedFormSnapshot payoff needs market parameters")
        from .closed_form import invariant_u

        out = invariant_u(S, payoff.t, payoff.params, market)
    else:
        raise TypeError(f"unknown payoff type {type(payoff).__name__}")
    return out[()] if out.ndim == 0 else out


def payoff_strikes(payoff: Payoff) -> tuple[float, ...]:
    """Kink locations of a piecewise-linear payoff."""
    if isinstance(payoff, Call):
        return (payoff.strike,)
    if isinstance(payoff, Strangle):
        return (payoff.put_strike, payoff.call_strike)
    if isinstance(payoff, BullSpread):
        return (payoff.long_strike, payoff.short_strike)
    return ()


# -- solution container ------------------------------------------------------

SCHEMES = ("implicit", "explicit", "linear-analytic", "linear-fd", "closed-form")


@dataclass
class SolutionField:
    """Hedge cost sampled on a grid.

    ``values[j, i]`` is ``u(S_i, t_j)``; row 0 is ``t = 0`` and the last row is
    maturity.
    """

    grid: GridSpec
    values: np.ndarray
    scheme: str
    iterations: list[int] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        shape = (self.grid.n_time + 1, self.grid.n_space)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {shape}")
        if not self.diverged and not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in a field not flagged as diverged")

    @property
    def at_t0(self) -> np.ndarray:
        return self.values[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]


# -- PDE pieces --------------------------------------------------------------


def pde_residual(u, u_t, u_SS, S, market: MarketParams, eps_den: float = EPS_DEN):
    """Residual of the illiquid-market PDE given pointwise derivatives.

    ``u`` is accepted for signature symmetry with a general jet-space
    residual; the equation does not depend on it explicitly.

    Raises
    ------
    SingularDenominator
        If ``|1 - rho S u_SS| < eps_den`` anywhere.
    """
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0):
        raise DomainError("pde_residual needs S > 0")
    u_t = np.asarray(u_t, dtype=float)
    u_SS = np.asarray(u_SS, dtype=float)
    den = 1.0 - market.rho * S * u_SS
    small = np.abs(den)
    if np.any(small < eps_den):
        raise SingularDenominator(
            "1 - rho*S*u_SS vanished: the point lies on the degenerate surface",
            min_abs_denominator=float(small.min()),
        )
    out = u_t + 0.5 * market.sigma**2 * S**2 * u_SS / den**2
    return out[()] if out.ndim == 0 else out


def _as_time_function(c):
    return c if callable(c) else (lambda t, _c=c: _c)


def degenerate_surface(S, t, c1, c2, rho):
    """``(1/rho) S ln S + S c1(t) + c2(t)``, where the PDE denominator vanishes.

    ``c1`` and ``c2`` may be constants or callables of ``t``.
    """
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0):
        raise DomainError("degenerate_surface needs S > 0")
    if rho == 0:
        raise DomainError("degenerate_surface needs rho != 0")
    c1, c2 = _as_time_function(c1), _as_time_function(c2)
    out = S * np.log(S) / rho + S * c1(t) + c2(t)
    return out[()] if np.ndim(out) == 0 else out


def rho_rescale(u, rho):
    """Map a solution of the rho-equation to a solution of the rho = 1 equation.

    ``u`` may be an array of values or a callable surface; the result has the
    same kind.
    """
    if not rho > 0:
        raise DomainError(f"rho must be > 0, got {rho}")
    if callable(u):
        return lambda *args, **kw: rho * u(*args, **kw)
    return rho * np.asarray(u, dtype=float)
