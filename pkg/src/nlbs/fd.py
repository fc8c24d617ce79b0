"""Finite-difference solvers for the illiquid-market PDE and the linear reference.

The fully implicit scheme replaces ``u_t`` by a backward difference and
``u_SS`` by the central second difference ``D_i = u_{i-1} - 2u_i + u_{i+1}`` on
the unknown layer. Clearing the denominator, each interior node gives

    (u_{i,j+1} - u_{i,j}) / 4 * (h^2/S_i - rho D_i)^2 + (tau sigma^2 h^2 / 8) D_i = 0,

a tridiagonal nonlinear system solved by damped Newton, layer by layer from
maturity back to ``t = 0``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy.linalg as la
from scipy.special import ndtr

from .closed_form import invariant_u
from .errors import DomainError, NoConvergence, SingularDenominator, SingularJacobian
from .model import (EPS_DEN, BullSpread, Call, ClosedFormSnapshot, GridSpec, MarketParams,
                    SolutionField, Strangle, payoff_value)
from .newton import NewtonOptions, newton_solve

BOUNDARY_POLICIES = ("exact-closed-form", "payoff", "linear-bs")


@dataclass(frozen=True)
class SolverConfig:
    """Controls for the finite-difference solvers.

    ``initial_guess="warm"`` starts each layer's Newton iteration from the
    layer above; ``"constant"`` starts from ``guess_constant`` everywhere.
    ``boundary_policy=None`` picks ``exact-closed-form`` for closed-form
    terminal data and ``payoff`` otherwise.

    Each layer system can have several roots. The one that continues the
    parabolic problem has ``1 - rho S u_SS > 0`` at every interior node.
    ``branch="parabolic"`` insists on that root: a layer whose Newton run fails
    or ends elsewhere is re-solved from the chord between the boundary values,
    where ``u_SS = 0``, and the re-solved layers are listed in the field's
    metadata. ``branch="any"`` accepts whatever root Newton reaches.
    ``branch="auto"`` behaves like ``"parabolic"`` unless the terminal data
    has ``1 - rho S u_SS <= 0`` at every interior node, in which case it
    behaves like ``"any"``.

    ``residual_form="scaled"`` runs Newton on the layer residual divided by
    ``(h^2/S_i - rho D_i)^2``, which is monotone on the parabolic branch and
    far better conditioned near the degenerate surface; ``"cleared"`` runs it
    on the polynomial form directly. Either way a layer is accepted only when
    the polynomial residual is within ``newton_tol``.
    """

    scheme: str = "implicit"
    newton_tol: float = 1e-12
    newton_max_iter: int = 100
    damping_max_halvings: int = 40
    step_tol: float = 1e-10
    initial_guess: str = "warm"
    guess_constant: float = 0.03
    boundary_policy: str | None = None
    jacobian: str = "analytic"
    divergence_factor: float = 1e6
    branch: str = "auto"
    residual_form: str = "scaled"

    def __post_init__(self):
        if self.scheme not in ("implicit", "explicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.initial_guess not in ("warm", "constant"):
            raise ValueError(f"unknown initial_guess {self.initial_guess!r}")
        if self.branch not in ("auto", "parabolic", "any"):
            raise ValueError(f"unknown branch {self.branch!r}")
        if self.residual_form not in ("scaled", "cleared"):
            raise ValueError(f"unknown residual_form {self.residual_form!r}")
        if self.boundary_policy is not None and self.boundary_policy not in BOUNDARY_POLICIES:
            raise ValueError(f"unknown boundary_policy {self.boundary_policy!r}")
        if self.jacobian not in ("analytic", "fd"):
            raise ValueError(f"unknown jacobian {self.jacobian!r}")
        if not (self.newton_tol > 0 and self.step_tol > 0 and self.divergence_factor > 0):
            raise ValueError("tolerances must be > 0")
        if self.newton_max_iter < 1 or self.damping_max_halvings < 0:
            raise ValueError("iteration caps must be >= 1")

    @property
    def newton(self) -> NewtonOptions:
        return NewtonOptions(self.newton_tol, self.newton_max_iter, self.damping_max_halvings, self.step_tol)


# -- layer system -------------------------------------------------------------


def _second_difference(u_guess, boundaries):
    left, right = boundaries
    full = np.concatenate(([left], u_guess, [right]))
    return full[:-2] - 2.0 * full[1:-1] + full[2:]


def _check_layer(u_next, u_guess, grid):
    n = grid.n_space - 2
    u_next = np.asarray(u_next, dtype=float)
    u_guess = np.asarray(u_guess, dtype=float)
    if u_next.shape != (n,) or u_guess.shape != (n,):
        raise ValueError(
            f"layer vectors must have {n} interior values, got {u_next.shape} and {u_guess.shape}"
        )
    return u_next, u_guess


def assemble_layer_residual(u_next, u_guess, boundaries, grid: GridSpec, market: MarketParams):
    """Residual of the implicit scheme on one time layer.

    Parameters
    ----------
    u_next : array_like
        Known interior values on layer ``j+1``.
    u_guess : array_like
        Candidate interior values on layer ``j``.
    boundaries : (float, float)
        ``u(S_min, t_j)`` and ``u(S_max, t_j)``.
    """
    u_next, u_guess = _check_layer(u_next, u_guess, grid)
    h, tau = grid.h, grid.tau
    S = grid.s[1:-1]
    D = _second_difference(u_guess, boundaries)
    g = h * h / S - market.rho * D
    return 0.25 * (u_next - u_guess) * g * g + 0.125 * tau * market.sigma**2 * h * h * D


def layer_jacobian(u_next, u_guess, boundaries, grid: GridSpec, market: MarketParams):
    """Tridiagonal Jacobian of :func:`assemble_layer_residual` in ``solve_banded`` layout."""
    u_next, u_guess = _check_layer(u_next, u_guess, grid)
    h, rho = grid.h, market.rho
    S = grid.s[1:-1]
    D = _second_difference(u_guess, boundaries)
    g = h * h / S - rho * D
    c = 0.125 * grid.tau * market.sigma**2 * h * h
    a = u_next - u_guess
    diag = -0.25 * g * g + rho * a * g - 2.0 * c
    off = -0.5 * rho * a * g + c
    ab = np.zeros((3, u_guess.size))
    ab[1] = diag
    ab[0, 1:] = off[:-1]   # d F_i / d u_{i+1}
    ab[2, :-1] = off[1:]   # d F_i / d u_{i-1}
    return ab


def scaled_layer_residual(u_next, u_guess, boundaries, grid: GridSpec, market: MarketParams):
    """The layer residual divided by ``(h^2/S_i - rho D_i)^2``.

    Equals ``(u_{i,j+1} - u_{i,j})/4 + (tau sigma^2 h^2/8) D_i / (h^2/S_i - rho D_i)^2``;
    it has the same roots as :func:`assemble_layer_residual` off the
    degenerate surface.
    """
    u_next, u_guess = _check_layer(u_next, u_guess, grid)
    h2 = grid.h**2
    D = _second_difference(u_guess, boundaries)
    g = h2 / grid.s[1:-1] - market.rho * D
    return 0.25 * (u_next - u_guess) + 0.125 * grid.tau * market.sigma**2 * h2 * D / (g * g)


def scaled_layer_jacobian(u_next, u_guess, boundaries, grid: GridSpec, market: MarketParams):
    """Tridiagonal Jacobian of :func:`scaled_layer_residual` in ``solve_banded`` layout."""
    u_next, u_guess = _check_layer(u_next, u_guess, grid)
    h2, rho = grid.h**2, market.rho
    D = _second_difference(u_guess, boundaries)
    base = h2 / grid.s[1:-1]
    g = base - rho * D
    slope = 0.125 * grid.tau * market.sigma**2 * h2 * (base + rho * D) / g**3
    ab = np.zeros((3, u_guess.size))
    ab[1] = -0.25 - 2.0 * slope
    ab[0, 1:] = slope[:-1]
    ab[2, :-1] = slope[1:]
    return ab


def _interior_denominator(u_guess, boundaries, grid, market):
    return 1.0 - market.rho * grid.s[1:-1] * _second_difference(u_guess, boundaries) / grid.h**2


def layer_denominator(u_layer, grid: GridSpec, market: MarketParams):
    """``1 - rho S_i D_i / h^2`` at interior nodes of a full layer."""
    u_layer = np.asarray(u_layer, dtype=float)
    D = u_layer[:-2] - 2.0 * u_layer[1:-1] + u_layer[2:]
    return 1.0 - market.rho * grid.s[1:-1] * D / grid.h**2


# -- terminal and boundary data ------------------------------------------------


def _terminal_values(terminal, grid, market):
    if isinstance(terminal, (Call, Strangle, BullSpread, ClosedFormSnapshot)):
        return np.asarray(payoff_value(terminal, grid.s, market), dtype=float)
    values = np.asarray(terminal, dtype=float)
    if values.shape != (grid.n_space,):
        raise ValueError(f"terminal values must have {grid.n_space} entries, got {values.shape}")
    return values.copy()


def _boundary_function(terminal, grid, market, policy, override):
    """Return ``f(t) -> (left, right)``."""
    if override is not None:
        return lambda t: (float(override(grid.s_min, t)), float(override(grid.s_max, t)))
    if policy is None:
        policy = "exact-closed-form" if isinstance(terminal, ClosedFormSnapshot) else "payoff"
    if policy == "exact-closed-form":
        if not isinstance(terminal, ClosedFormSnapshot):
            raise ValueError("exact-closed-form boundaries need ClosedFormSnapshot terminal data")
        shift = terminal.t - grid.maturity
        ends = np.array([grid.s_min, grid.s_max])
        return lambda t: tuple(invariant_u(ends, t + shift, terminal.params, market))
    if policy == "linear-bs":
        if not isinstance(terminal, (Call, Strangle, BullSpread)):
            raise ValueError("linear-bs boundaries need a Call, Strangle or BullSpread payoff")
        ends = np.array([grid.s_min, grid.s_max])
        return lambda t: tuple(linear_bs_price(terminal, ends, t, market, grid.maturity))
    # payoff: terminal values held at both ends
    values = _terminal_values(terminal, grid, market)
    left, right = float(values[0]), float(values[-1])
    return lambda t: (left, right)


def _policy_name(terminal, policy, override):
    if override is not None:
        return "custom"
    if policy is None:
        return "exact-closed-form" if isinstance(terminal, ClosedFormSnapshot) else "payoff"
    return policy


# -- solvers -------------------------------------------------------------------


def implicit_solve_backward(terminal, grid: GridSpec, market: MarketParams,
                            config: SolverConfig | None = None, *, boundary=None) -> SolutionField:
    """March the fully implicit scheme from maturity back to ``t = 0``.

    Parameters
    ----------
    terminal : Payoff or array_like
        Terminal data; an array must hold one value per space node.
    boundary : callable, optional
        ``boundary(S, t)`` overriding the configured boundary policy.

    Raises
    ------
    NoConvergence
        With ``layer`` set to the failing time index.
    SingularDenominator
        If a converged layer lies on the degenerate surface.
    """
    cfg = config or SolverConfig()
    market.require_nonlinear()
    values = np.empty((grid.n_time + 1, grid.n_space))
    values[-1] = _terminal_values(terminal, grid, market)
    bound = _boundary_function(terminal, grid, market, cfg.boundary_policy, boundary)
    times = grid.t
    iterations, norms = [], []
    opts = cfg.newton

    chord_weights = (grid.s[1:-1] - grid.s_min) / (grid.s_max - grid.s_min)
    branch = cfg.branch
    if branch == "auto":
        branch = "any" if np.all(layer_denominator(values[-1], grid, market) <= 0) else "parabolic"
    forms = {"scaled": (scaled_layer_residual, scaled_layer_jacobian),
             "cleared": (assemble_layer_residual, layer_jacobian)}
    res_fn, jac_fn = forms[cfg.residual_form]
    fallback_layers = []

    for j in range(grid.n_time - 1, -1, -1):
        u_next = values[j + 1, 1:-1]
        ends = bound(times[j])

        def residual(x, u_next=u_next, ends=ends):
            return res_fn(u_next, x, ends, grid, market)

        if cfg.jacobian == "analytic":
            def jacobian(x, u_next=u_next, ends=ends):
                return jac_fn(u_next, x, ends, grid, market)
        else:
            jacobian = None

        def parabolic(x, ends=ends):
            return bool(_interior_denominator(x, ends, grid, market).min() > 0)

        def attempt(start, u_next=u_next, ends=ends):
            """Newton from ``start``; returns (result or None, failure or None)."""
            try:
                out = newton_solve(residual, jacobian, start, opts, banded=jacobian is not None,
                                   admissible=parabolic if branch == "parabolic" else None)
            except (NoConvergence, SingularJacobian) as exc:
                return None, exc
            norm = float(np.max(np.abs(assemble_layer_residual(u_next, out.x, ends, grid, market))))
            out.residual_norm = norm
            if norm > cfg.newton_tol:
                return None, NoConvergence(f"layer residual {norm:.3e} exceeds newton_tol",
                                           residual_norm=norm, iterations=out.iterations)
            if branch == "parabolic" and not parabolic(out.x):
                return None, NoConvergence("Newton converged to a root off the parabolic branch",
                                           residual_norm=norm, iterations=out.iterations)
            return out, None

        if cfg.initial_guess == "warm":
            guess = u_next
        else:
            guess = np.full(u_next.shape, cfg.guess_constant)
        result, failure = attempt(guess)
        if result is None and branch == "parabolic":
            result, _ = attempt(ends[0] + (ends[1] - ends[0]) * chord_weights)
            if result is not None:
                fallback_layers.append(j)
        if result is None:
            failure.layer = j
            raise failure
        values[j, 0], values[j, -1] = ends
        values[j, 1:-1] = result.x
        den = layer_denominator(values[j], grid, market)
        if np.min(np.abs(den)) < EPS_DEN:
            raise SingularDenominator(
                f"layer {j} reached the degenerate surface", min_abs_denominator=float(np.min(np.abs(den)))
            )
        iterations.append(result.iterations)
        norms.append(result.residual_norm)

    return SolutionField(
        grid, values, "implicit", iterations[::-1], norms[::-1],
        meta={"boundary_policy": _policy_name(terminal, cfg.boundary_policy, boundary),
              "branch_used": branch,
              "fallback_layers": fallback_layers[::-1],
              **{k: v for k, v in asdict(cfg).items() if k != "boundary_policy"}},
    )


def explicit_solve_backward(terminal, grid: GridSpec, market: MarketParams,
                            config: SolverConfig | None = None, *, boundary=None) -> SolutionField:
    """Forward-Euler-in-time counterpart of the implicit scheme.

    Divergence is a result, not an error: the field is flagged once any value
    leaves ``divergence_factor * max|terminal|`` or stops being finite, and the
    remaining layers are left as NaN.
    """
    cfg = config or SolverConfig(scheme="explicit")
    market.require_nonlinear()
    values = np.full((grid.n_time + 1, grid.n_space), np.nan)
    values[-1] = _terminal_values(terminal, grid, market)
    bound = _boundary_function(terminal, grid, market, cfg.boundary_policy, boundary)
    limit = cfg.divergence_factor * float(np.max(np.abs(values[-1])))
    S = grid.s[1:-1]
    h2 = grid.h**2
    half_sig2 = 0.5 * market.sigma**2
    diverged = False
    diverged_at = None

    with np.errstate(all="ignore"):
        for j in range(grid.n_time - 1, -1, -1):
            above = values[j + 1]
            u_SS = (above[:-2] - 2.0 * above[1:-1] + above[2:]) / h2
            den = 1.0 - market.rho * S * u_SS
            values[j, 1:-1] = above[1:-1] + grid.tau * half_sig2 * S * S * u_SS / (den * den)
            values[j, 0], values[j, -1] = bound(grid.t[j])
            layer = values[j]
            if not np.all(np.isfinite(layer)) or np.max(np.abs(layer)) > limit:
                diverged, diverged_at = True, j
                values[:j] = np.nan
                break

    return SolutionField(
        grid, values, "explicit", diverged=diverged,
        meta={"boundary_policy": _policy_name(terminal, cfg.boundary_policy, boundary),
              "divergence_limit": limit, "diverged_at_layer": diverged_at,
              "mesh_ratio": grid.tau / h2},
    )


# -- linear Black-Scholes reference ------------------------------------------------


def _call(S, E, tau, r, sigma):
    if tau == 0:
        return np.maximum(S - E, 0.0)
    disc = E * math.exp(-r * tau)
    vol = sigma * math.sqrt(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(S / E) + (r + 0.5 * sigma**2) * tau) / vol
    d1 = np.where(np.isnan(d1), np.inf, d1)
    return S * ndtr(d1) - disc * ndtr(d1 - vol)


def _put(S, E, tau, r, sigma):
    # put-call parity keeps both legs on one code path
    return _call(S, E, tau, r, sigma) - S + E * math.exp(-r * tau)


def linear_bs_price(payoff, S, t, market: MarketParams, maturity):
    """Closed-form price under the linear Black-Scholes model with rate ``market.rate``.

    Strangles and spreads are priced as the corresponding combinations of
    calls and puts.
    """
    if not 0 <= t <= maturity:
        raise DomainError(f"need 0 <= t <= maturity, got t={t}, maturity={maturity}")
    S = np.asarray(S, dtype=float)
    tau = maturity - t
    r, sig = market.rate, market.sigma
    if tau == 0:
        out = np.asarray(payoff_value(payoff, S), dtype=float)
    elif isinstance(payoff, Call):
        out = payoff.count * _call(S, payoff.strike, tau, r, sig)
    elif isinstance(payoff, Strangle):
        out = (payoff.put_count * _put(S, payoff.put_strike, tau, r, sig)
               + payoff.call_count * _call(S, payoff.call_strike, tau, r, sig))
    elif isinstance(payoff, BullSpread):
        out = _call(S, payoff.long_strike, tau, r, sig) - _call(S, payoff.short_strike, tau, r, sig)
    else:
        raise TypeError(f"linear_bs_price does not handle {type(payoff).__name__}")
    return out[()] if out.ndim == 0 else out


def linear_fd_solve(payoff, grid: GridSpec, market: MarketParams) -> SolutionField:
    """Fully implicit finite differences for the linear Black-Scholes equation.

    Boundary values come from :func:`linear_bs_price`.
    """
    values = np.empty((grid.n_time + 1, grid.n_space))
    values[-1] = payoff_value(payoff, grid.s)
    S = grid.s[1:-1]
    h, tau, r = grid.h, grid.tau, market.rate
    alpha = 0.5 * market.sigma**2 * S * S / h**2
    beta = 0.5 * r * S / h
    lower = tau * (alpha - beta)
    upper = tau * (alpha + beta)
    ab = np.zeros((3, S.size))
    ab[1] = -1.0 - tau * (2.0 * alpha + r)
    ab[0, 1:] = upper[:-1]
    ab[2, :-1] = lower[1:]
    ends = np.array([grid.s_min, grid.s_max])
    for j in range(grid.n_time - 1, -1, -1):
        left, right = linear_bs_price(payoff, ends, grid.t[j], market, grid.maturity)
        rhs = -values[j + 1, 1:-1].copy()
        rhs[0] -= lower[0] * left
        rhs[-1] -= upper[-1] * right
        try:
            values[j, 1:-1] = la.solve_banded((1, 1), ab, rhs)
        except la.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        values[j, 0], values[j, -1] = left, right
    return SolutionField(grid, values, "linear-fd", meta={"boundary_policy": "linear-bs"})


def linear_analytic_field(payoff, grid: GridSpec, market: MarketParams) -> SolutionField:
    """:func:`linear_bs_price` sampled on every grid node."""
    values = np.vstack([linear_bs_price(payoff, grid.s, t, market, grid.maturity) for t in grid.t])
    return SolutionField(grid, values, "linear-analytic")


def closed_form_field(params, grid: GridSpec, market: MarketParams) -> SolutionField:
    """The explicit family sampled on every grid node."""
    values = invariant_u(grid.s[None, :], grid.t[:, None], params, market)
    return SolutionField(grid, np.asarray(values), "closed-form")
