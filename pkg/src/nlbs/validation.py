"""Named, deterministic checks that turn the model's claims into measurements.

Every check returns a :class:`CheckReport` holding the measured numbers, the
tolerances they were judged against and the configuration needed to rerun
it. :func:`run_all` executes a selection and writes one record per check.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .closed_form import (ClosedFormParams, GroupElement, apply_group, asymptotic_large_S,
                          asymptotic_small_S, group_invariants, group_point, invariant_u,
                          invariant_y, ode_residual_v, ode_residual_y, surface_residual,
                          surface_residual_mp)
from .errors import NLBSError, UnknownCheck
from .fd import SolverConfig, explicit_solve_backward, implicit_solve_backward, linear_bs_price, linear_fd_solve
from .model import BullSpread, Call, ClosedFormSnapshot, GridSpec, MarketParams, rho_rescale

# -- pinned configurations -------------------------------------------------------

#: benchmark problem: one family member as terminal data, exact boundary values
BENCHMARK_MARKET = MarketParams(sigma=0.35, rho=0.1)
BENCHMARK_PARAMS = ClosedFormParams(m=0.5)
BENCHMARK_DOMAIN = (0.1, 2.0)
BENCHMARK_MATURITY = 1.0
BENCHMARK_SPACE_NODES = (16, 28, 42)
BENCHMARK_TIME_STEPS = (15, 30)

#: call problem of the hedge-cost versus illiquidity figures
CALL_STRIKE = 0.914
CALL_SIGMA = 0.35
CALL_GRID = GridSpec.from_steps(0.1, 0.05, 38, 0.05, 18)
CALL_RHOS = (0.1, 0.2, 0.3)
GAP_RHO = 0.03
GAP_COUNTS = (3, 5, 8)
GUESS_CONSTANTS = (0.03, 1.0)

#: bull spread figure
SPREAD = BullSpread(60.0, 80.0)
SPREAD_SIGMA = 0.35
SPREAD_RATE = 0.02
SPREAD_RHOS = (0.05, 0.1, 0.2)
SPREAD_GRID = GridSpec.from_steps(20.0, 2.0, 60, 0.05, 20)

#: members swept by the closed-form residual suite: (sigma, rho, m, d1, d2);
#: the full product of the pinned values plus the strangle-like member
RESIDUAL_SWEEP = tuple(
    (sigma, rho, m, 0.0, 0.0)
    for sigma in (0.2, 0.35) for rho in (0.05, 0.1, 0.3) for m in (0.5, 1.0, 8.5, 1338.0)
) + ((0.25, 0.05, 1338.0, 140.0, 295139.0),)
#: sampled (S, t) points per member
RESIDUAL_POINTS = 200
SEED = 20240611

EXPLICIT_RATIOS = (0.1, 1.0, 10.0)
EXPLICIT_SPACE_NODES = 28


@dataclass
class CheckReport:
    """Outcome of one check.

    ``status`` is ``"pass"``, ``"fail"`` or ``"info"``. ``measured`` always
    holds numbers (or lists of numbers), never only a verdict.
    """

    name: str
    status: str
    measured: dict
    tolerances: dict
    runtime: float
    config: dict = field(default_factory=dict)
    note: str = ""

    def record(self) -> str:
        """One ``key=value`` line; values are JSON so the line parses back unambiguously."""
        parts = [f"check={self.name}", f"status={self.status}", f"runtime_s={self.runtime:.3f}"]
        for prefix, block in (("measured", self.measured), ("tolerance", self.tolerances),
                              ("config", self.config)):
            for key in sorted(block):
                parts.append(f"{prefix}.{key}={_encode(block[key])}")
        if self.note:
            parts.append(f"note={_encode(self.note)}")
        return " ".join(parts)


def _encode(value) -> str:
    if isinstance(value, np.generic):
        return _encode(value.item())
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, np.ndarray):
        return _encode(value.tolist())
    return json.dumps(value, separators=(",", ":"), default=str)


def _finish(name, ok, measured, tolerances, start, config, note=""):
    return CheckReport(name, "pass" if ok else "fail", measured, tolerances,
                       time.perf_counter() - start, config, note)


def _relative_error(approx, exact):
    return float(np.max(np.abs(approx - exact) / np.abs(exact)))


# -- closed-form checks -------------------------------------------------------------


def _sweep_points(n, rng):
    """Sample points per member: log-uniform S on [0.05, 30], uniform t on [0, 1]."""
    S = np.exp(rng.uniform(np.log(0.05), np.log(30.0), n))
    t = rng.uniform(0.0, 1.0, n)
    return S, t


def check_closed_form_residual(tol=1e-8) -> CheckReport:
    """Relative PDE residual of swept family members at pinned random points.

    Derivatives come from ``mpmath`` at 40 digits; the float evaluation is
    compared to the high-precision one at the same points. Evenness in ``m``
    and independence of the root-sign choice are checked on the same points.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    per_member = RESIDUAL_POINTS
    worst_residual = worst_float_gap = worst_even = worst_eps1 = 0.0
    per_member_max = []
    for sigma, rho, m, d1, d2 in RESIDUAL_SWEEP:
        market = MarketParams(sigma, rho)
        params = ClosedFormParams(m, d1, d2)
        flipped = ClosedFormParams(-m, d1, d2)
        S, t = _sweep_points(per_member, rng)

        def surface(x, y, params=params, market=market):
            return invariant_u(x, y, params, market)

        residuals = [surface_residual_mp(surface, s, tt, market) for s, tt in zip(S, t)]
        per_member_max.append(max(residuals))
        worst_residual = max(worst_residual, max(residuals))
        u = invariant_u(S, t, params, market)
        with mpmath.workdps(30):
            exact = np.array([float(invariant_u(mpmath.mpf(s), mpmath.mpf(tt), params, market))
                              for s, tt in zip(S, t)])
        scale = np.abs(exact) + 1.0
        worst_float_gap = max(worst_float_gap, float(np.max(np.abs(u - exact) / scale)))
        worst_even = max(worst_even, float(np.max(np.abs(u - invariant_u(S, t, flipped, market)) / scale)))
        worst_eps1 = max(worst_eps1, float(np.max(np.abs(u - invariant_u(S, t, params, market, eps1=-1)) / scale)))
    rounding = 1e-13
    ok = worst_residual < tol and worst_even <= rounding and worst_eps1 <= rounding
    return _finish(
        "closed_form_residual", ok,
        {"max_relative_residual": worst_residual, "max_relative_residual_per_member": per_member_max,
         "float_vs_mp_gap": worst_float_gap, "evenness_gap": worst_even, "eps1_gap": worst_eps1,
         "points": per_member * len(RESIDUAL_SWEEP)},
        {"relative_residual": tol, "rounding": rounding},
        start, {"sweep": [list(row) for row in RESIDUAL_SWEEP], "seed": SEED,
                "S_range": [0.05, 30.0], "t_range": [0.0, 1.0], "dps": 40},
    )


def check_ode_chain(tol=1e-8) -> CheckReport:
    """The family, reduced to ``v(z)``, satisfies the reduced ODEs; ``m = 0`` gives ``y = -3/rho``."""
    start = time.perf_counter()
    market = BENCHMARK_MARKET
    delta = market.sigma**2 / 8.0
    zs = np.linspace(-4.0, 3.0, 15)
    worst_v = worst_y = worst_y_match = 0.0
    for m in (0.5, 1.0, 8.5):
        params = ClosedFormParams(m)

        def v_of_z(z, params=params):
            # at t = 0, S = e^z and v = -u/S
            S = mpmath.exp(z)
            return -invariant_u(S, mpmath.mpf(0), params, market) / S

        for z in zs:
            with mpmath.workdps(40):
                zz = mpmath.mpf(z)
                v = v_of_z(zz)
                v_z = mpmath.diff(v_of_z, zz)
                v_zz = mpmath.diff(v_of_z, zz, 2)
                y_z = v_zz
                v_z_f, v_zz_f, y_z_f = float(v_z), float(v_zz), float(y_z)
            scale_v = abs(v_z_f) * (1 + market.rho * abs(v_z_f + v_zz_f)) ** 2 + abs(v_z_f + v_zz_f) * market.sigma**2 / (2 * delta)
            worst_v = max(worst_v, abs(ode_residual_v(float(v), v_z_f, v_zz_f, market, delta)) / scale_v)
            y = float(invariant_y(z, params, market))
            worst_y_match = max(worst_y_match, abs(y - v_z_f) / abs(v_z_f))
            worst_y = max(worst_y, abs(ode_residual_y(v_z_f, y_z_f, market, delta)) / (y_z_f**2 + v_z_f**2))
    zero = invariant_y(zs, ClosedFormParams(0.0), market)
    exact_zero = bool(np.all(zero == -3.0 / market.rho))
    ok = worst_v < tol and worst_y < tol and worst_y_match < tol and exact_zero
    return _finish(
        "ode_chain", ok,
        {"v_ode_relative_residual": worst_v, "y_ode_relative_residual": worst_y,
         "explicit_y_vs_derivative": worst_y_match,
         "m0_limit_max_deviation": float(np.max(np.abs(zero + 3.0 / market.rho)))},
        {"relative_residual": tol, "m0_limit": 0.0},
        start, {"sigma": market.sigma, "rho": market.rho, "m": [0.5, 1.0, 8.5], "z": zs.tolist()},
    )


def pinned_group_elements() -> list[GroupElement]:
    """Twenty fixed group elements mixing all four generators."""
    rng = np.random.default_rng(SEED + 1)
    out = []
    for k in range(20):
        a = rng.uniform(-1.0, 1.0, 4)
        if k % 5 == 0:
            a[0] = 0.0  # exercise the a1 = 0 branch
        out.append(GroupElement(*(round(float(x), 6) for x in a), epsilon=round(float(rng.uniform(-0.5, 0.5)), 6)))
    return out


def check_group_action(residual_tol=1e-7, invariant_tol=1e-10) -> CheckReport:
    """Transformed members stay solutions; the orbit invariants stay constant."""
    start = time.perf_counter()
    market = BENCHMARK_MARKET
    params = BENCHMARK_PARAMS
    S = np.linspace(0.3, 2.0, 8)
    t = np.linspace(0.1, 0.9, 8)
    worst_residual = worst_invariant = 0.0

    def surface(x, y):
        return invariant_u(x, y, params, market)

    for g in pinned_group_elements():
        moved = apply_group(surface, g)
        S_new, t_new, _ = group_point(S, t, surface(S, t), g)
        res, u_new = surface_residual(moved, S_new, t_new, market)
        u_t_scale = np.abs(surface_residual(moved, S_new, t_new, MarketParams(market.sigma * 1e-6, market.rho))[0])
        worst_residual = max(worst_residual, float(np.max(np.abs(res) / np.maximum(u_t_scale, 1e-300))))
        # invariants along the orbit through each sampled point
        u0 = surface(S, t)
        inv0 = group_invariants(S, t, u0, g)
        for eps in (-0.7, -0.2, 0.4, 1.1):
            g_eps = GroupElement(g.a1, g.a2, g.a3, g.a4, eps)
            S_e, t_e, u_e = group_point(S, t, u0, g_eps)
            inv = group_invariants(S_e, t_e, u_e, g_eps)
            for a, b in zip(inv0, inv):
                worst_invariant = max(worst_invariant, float(np.max(np.abs(a - b) / (1.0 + np.abs(a)))))
    ok = worst_residual < residual_tol and worst_invariant < invariant_tol
    return _finish(
        "group_action", ok,
        {"max_relative_residual": worst_residual, "max_invariant_drift": worst_invariant, "elements": 20},
        {"relative_residual": residual_tol, "invariant": invariant_tol},
        start, {"sigma": market.sigma, "rho": market.rho, "m": params.m, "seed": SEED + 1},
    )


def check_asymptotic_orders(growth_tol=2.0) -> CheckReport:
    """Remainders of both expansions stay bounded after scaling.

    Small ``S``: ``|u - expansion| S^{-5/2}`` as ``S`` halves from ``1e-2``
    to ``1e-5``. Large ``S``: ``|u - expansion| S^{5/4}`` as ``S`` doubles
    from ``1e3`` to ``1e6``. Bounded means the largest scaled remainder over
    the decade nearest the limit is at most ``growth_tol`` times the largest
    over the decade at the other end; a remainder of lower order than claimed
    grows by at least ``10^{1/4}`` per decade, so three decades would show it.
    """
    start = time.perf_counter()
    market = BENCHMARK_MARKET
    measured = {}
    ok = True
    small_S = 1e-2 * 0.5 ** np.arange(0, 11)   # 1e-2 ... ~1e-5
    large_S = 1e3 * 2.0 ** np.arange(0, 11)    # 1e3 ... ~1e6
    for m in (0.5, 8.5):
        params = ClosedFormParams(m, d1=0.3, d2=-0.2)
        for side, S, expansion, power in (("small", small_S, asymptotic_small_S, -2.5),
                                          ("large", large_S, asymptotic_large_S, 1.25)):
            with mpmath.workdps(50):
                scaled = np.array([
                    float(abs(invariant_u(mpmath.mpf(s), mpmath.mpf(0.4), params, market)
                              - expansion(mpmath.mpf(s), mpmath.mpf(0.4), params, market)) * mpmath.mpf(s) ** power)
                    for s in S])
            # S runs toward the limit, so the last decade is nearest to it
            decade = 4
            growth = float(scaled[-decade:].max() / scaled[:decade].max())
            measured[f"{side}_m{m}_scaled_remainder"] = scaled.tolist()
            measured[f"{side}_m{m}_decade_growth"] = growth
            ok = ok and bool(np.all(np.isfinite(scaled))) and growth <= growth_tol
    return _finish("asymptotic_orders", ok, measured, {"decade_growth": growth_tol}, start,
                   {"sigma": market.sigma, "rho": market.rho, "m": [0.5, 8.5], "d1": 0.3, "d2": -0.2,
                    "t": 0.4, "small_S": small_S.tolist(), "large_S": large_S.tolist()})


def _float_relative_residual(surface, S, t, market):
    """Float finite-difference PDE residual relative to ``|u_t|``."""
    res, _ = surface_residual(surface, S, t, market)
    # with sigma scaled to ~0 the residual reduces to u_t alone
    u_t = surface_residual(surface, S, t, MarketParams(market.sigma * 1e-9, market.rho))[0]
    return np.abs(res) / np.maximum(np.abs(u_t), 1e-300)


RESCALING_MEMBERS = tuple((0.35, rho, m, 0.0, 0.0) for rho in (0.05, 0.1, 0.3) for m in (0.5, 8.5))


def check_rho_rescaling(tol=1e-8) -> CheckReport:
    """``rho * u`` solves the ``rho = 1`` equation wherever ``u`` solves the original.

    Measured twice: with float finite differences (points where ``u`` itself
    passes are kept) and with ``mpmath`` derivatives at every point.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(SEED + 2)
    worst_float = worst_mp = 0.0
    used = total = 0
    for sigma, rho, m, d1, d2 in RESCALING_MEMBERS:
        market = MarketParams(sigma, rho)
        unit = MarketParams(sigma, 1.0)
        params = ClosedFormParams(m, d1, d2)

        def surface(x, y, params=params, market=market):
            return invariant_u(x, y, params, market)

        scaled = rho_rescale(surface, rho)
        S, t = _sweep_points(40, rng)
        keep = _float_relative_residual(surface, S, t, market) < tol
        total += S.size
        used += int(keep.sum())
        if keep.any():
            worst_float = max(worst_float, float(np.max(_float_relative_residual(scaled, S[keep], t[keep], unit))))
        for s, tt in zip(S[:10], t[:10]):
            worst_mp = max(worst_mp, surface_residual_mp(scaled, s, tt, unit))
    ok = used > 0 and worst_float < tol and worst_mp < tol
    return _finish("rho_rescaling", ok,
                   {"max_float_residual_rescaled": worst_float, "max_mp_residual_rescaled": worst_mp,
                    "points_used": used, "points_sampled": total},
                   {"relative_residual": tol}, start,
                   {"members": [list(row) for row in RESCALING_MEMBERS], "seed": SEED + 2})


# -- finite-difference checks --------------------------------------------------------


def benchmark_grid(n_space, n_time) -> GridSpec:
    return GridSpec(*BENCHMARK_DOMAIN, n_space, n_time, BENCHMARK_MATURITY)


def check_benchmark_accuracy(config: SolverConfig | None = None) -> CheckReport:
    """Implicit solver against the family member on the six benchmark grids.

    Passes when every grid reaches a max relative error of 0.5% at ``t = 0``
    and the finest reaches 0.2%. A grid whose solve raises is recorded with
    its failing layer and counts as a failure.
    """
    start = time.perf_counter()
    cfg = config or SolverConfig()
    terminal = ClosedFormSnapshot(BENCHMARK_PARAMS, BENCHMARK_MATURITY)
    errors, failures = {}, {}
    for ns in BENCHMARK_SPACE_NODES:
        for nt in BENCHMARK_TIME_STEPS:
            grid = benchmark_grid(ns, nt)
            key = f"{ns}x{nt}"
            try:
                field_ = implicit_solve_backward(terminal, grid, BENCHMARK_MARKET, cfg)
            except NLBSError as exc:
                errors[key] = math.inf
                failures[key] = f"{type(exc).__name__} at layer {getattr(exc, 'layer', None)}"
                continue
            exact = invariant_u(grid.s, 0.0, BENCHMARK_PARAMS, BENCHMARK_MARKET)
            errors[key] = _relative_error(field_.at_t0, exact)
    finest = f"{BENCHMARK_SPACE_NODES[-1]}x{BENCHMARK_TIME_STEPS[-1]}"
    ok = all(e <= 5e-3 for e in errors.values()) and errors[finest] <= 2e-3
    measured = {f"max_rel_error_{k}": v for k, v in errors.items()}
    measured.update({f"failure_{k}": v for k, v in failures.items()})
    return _finish(
        "benchmark_accuracy", ok, measured, {"all_grids": 5e-3, "finest": 2e-3}, start,
        {"sigma": BENCHMARK_MARKET.sigma, "rho": BENCHMARK_MARKET.rho, "m": BENCHMARK_PARAMS.m,
         "domain": list(BENCHMARK_DOMAIN), "maturity": BENCHMARK_MATURITY,
         "space_nodes": list(BENCHMARK_SPACE_NODES), "time_steps": list(BENCHMARK_TIME_STEPS),
         **_solver_config(cfg)},
    )


def _solver_config(cfg: SolverConfig) -> dict:
    return {f"solver.{k}": v for k, v in asdict(cfg).items()}


def _call_t0(rho, count=1.0, grid=CALL_GRID, cfg=None):
    field_ = implicit_solve_backward(Call(CALL_STRIKE, count), grid, MarketParams(CALL_SIGMA, rho), cfg)
    return field_


def check_rho_monotonicity(config: SolverConfig | None = None) -> CheckReport:
    """``u(S, 0)`` of the call problem is pointwise nondecreasing in ``rho``.

    Run on the figure grid and on a grid with half the steps near the strike.
    """
    start = time.perf_counter()
    cfg = config or SolverConfig()
    tol = 10 * cfg.newton_tol
    fine = GridSpec.from_steps(0.1, 0.025, 76, 0.025, 36)
    measured = {}
    ok = True
    for label, grid in (("figure_grid", CALL_GRID), ("fine_grid", fine)):
        rows = [_call_t0(rho, grid=grid, cfg=cfg).at_t0 for rho in CALL_RHOS]
        steps = [float(np.min(b - a)) for a, b in zip(rows, rows[1:])]
        measured[f"{label}_min_increment"] = steps
        near = np.abs(grid.s - CALL_STRIKE) <= 0.2
        measured[f"{label}_u_at_strike"] = [float(np.interp(CALL_STRIKE, grid.s, r)) for r in rows]
        measured[f"{label}_near_strike_min_increment"] = [float(np.min((b - a)[near])) for a, b in zip(rows, rows[1:])]
        ok = ok and min(steps) >= -tol
    zero = implicit_solve_backward(np.zeros(CALL_GRID.n_space), CALL_GRID, MarketParams(CALL_SIGMA, CALL_RHOS[-1]), cfg)
    measured["zero_payoff_max_abs"] = float(np.max(np.abs(zero.values)))
    ok = ok and measured["zero_payoff_max_abs"] <= tol
    return _finish("rho_monotonicity", ok, measured, {"decrease": tol}, start,
                   {"strike": CALL_STRIKE, "sigma": CALL_SIGMA, "rhos": list(CALL_RHOS),
                    "grid": asdict(CALL_GRID), "fine_grid": asdict(fine), **_solver_config(cfg)})


def check_nonlinearity_gap(config: SolverConfig | None = None, *, linear_tol=1e-10) -> CheckReport:
    """``|u_8 - (u_3 + u_5)|`` is nonzero for the nonlinear model and peaks near the strike."""
    start = time.perf_counter()
    cfg = config or SolverConfig()
    tol = 10 * cfg.newton_tol
    grid = CALL_GRID
    u = {k: _call_t0(GAP_RHO, k, cfg=cfg).at_t0 for k in GAP_COUNTS}
    gap = np.abs(u[8] - (u[3] + u[5]))
    peak = int(np.argmax(gap))
    linear_market = MarketParams(CALL_SIGMA, 0.0)
    lin = {k: linear_fd_solve(Call(CALL_STRIKE, k), grid, linear_market).at_t0 for k in GAP_COUNTS}
    linear_gap = float(np.max(np.abs(lin[8] - (lin[3] + lin[5]))))
    distance = abs(grid.s[peak] - CALL_STRIKE) / grid.h
    ok = gap.max() > tol and distance <= 10 and linear_gap <= linear_tol
    return _finish(
        "nonlinearity_gap", ok,
        {"max_gap": float(gap.max()), "argmax_S": float(grid.s[peak]), "distance_in_h": float(distance),
         "gap_at_S_min": float(gap[0]), "gap_at_S_max": float(gap[-1]), "linear_max_gap": linear_gap},
        {"min_gap": tol, "max_distance_in_h": 10, "linear_gap": linear_tol}, start,
        {"strike": CALL_STRIKE, "sigma": CALL_SIGMA, "rho": GAP_RHO, "counts": list(GAP_COUNTS),
         "grid": asdict(grid), **_solver_config(cfg)},
    )


def check_guess_independence(config: SolverConfig | None = None) -> CheckReport:
    """Constant guesses ``k = 0.03`` and ``k = 1.0`` (and the warm start) give the same field.

    Runs on the call problem for every ``rho`` of the monotonicity figure and
    of the gap figure, and on linear terminal data.
    """
    start = time.perf_counter()
    base = config or SolverConfig()
    tol = 10 * base.newton_tol
    measured = {}
    worst = 0.0
    for rho in (GAP_RHO, *CALL_RHOS):
        fields = {}
        for k in GUESS_CONSTANTS:
            cfg = SolverConfig(**{**asdict(base), "initial_guess": "constant", "guess_constant": k})
            fields[k] = _call_t0(rho, cfg=cfg)
        warm = _call_t0(rho, cfg=SolverConfig(**{**asdict(base), "initial_guess": "warm"}))
        diff_k = float(np.max(np.abs(fields[0.03].values - fields[1.0].values)))
        diff_warm = float(np.max(np.abs(fields[0.03].values - warm.values)))
        measured[f"rho{rho}_k_difference"] = diff_k
        measured[f"rho{rho}_warm_difference"] = diff_warm
        measured[f"rho{rho}_fallback_layers"] = {str(k): len(f.meta["fallback_layers"]) for k, f in fields.items()}
        worst = max(worst, diff_k, diff_warm)
    linear = 0.7 * CALL_GRID.s
    for k in GUESS_CONSTANTS:
        cfg = SolverConfig(**{**asdict(base), "initial_guess": "constant", "guess_constant": k})
        out = implicit_solve_backward(linear, CALL_GRID, MarketParams(CALL_SIGMA, 0.1), cfg,
                                      boundary=lambda S, t: 0.7 * S)
        diff = float(np.max(np.abs(out.values - linear)))
        measured[f"linear_data_k{k}_difference"] = diff
        worst = max(worst, diff)
    return _finish("guess_independence", worst <= tol, {**measured, "max_difference": worst},
                   {"difference": tol}, start,
                   {"strike": CALL_STRIKE, "sigma": CALL_SIGMA, "rhos": [GAP_RHO, *CALL_RHOS],
                    "constants": list(GUESS_CONSTANTS), "grid": asdict(CALL_GRID), **_solver_config(base)})


def explicit_grid(ratio, n_space=EXPLICIT_SPACE_NODES) -> GridSpec:
    """Benchmark domain with ``tau / h^2`` as close to ``ratio`` as a whole number of steps allows."""
    h = (BENCHMARK_DOMAIN[1] - BENCHMARK_DOMAIN[0]) / (n_space - 1)
    n_time = max(1, round(BENCHMARK_MATURITY / (ratio * h * h)))
    return GridSpec(*BENCHMARK_DOMAIN, n_space, n_time, BENCHMARK_MATURITY)


def check_explicit_divergence(config: SolverConfig | None = None) -> CheckReport:
    """The explicit scheme is flagged diverged at every pinned mesh ratio on the benchmark."""
    start = time.perf_counter()
    cfg = config or SolverConfig(scheme="explicit")
    terminal = ClosedFormSnapshot(BENCHMARK_PARAMS, BENCHMARK_MATURITY)
    measured = {}
    flags = []
    for ratio in EXPLICIT_RATIOS:
        grid = explicit_grid(ratio)
        out = explicit_solve_backward(terminal, grid, BENCHMARK_MARKET, cfg)
        flags.append(out.diverged)
        key = f"ratio{ratio}"
        measured[f"{key}_diverged"] = out.diverged
        measured[f"{key}_actual_ratio"] = grid.tau / grid.h**2
        measured[f"{key}_max_abs_u"] = float(np.nanmax(np.abs(out.values)))
        if not out.diverged:
            exact = invariant_u(grid.s, 0.0, BENCHMARK_PARAMS, BENCHMARK_MARKET)
            measured[f"{key}_max_rel_error_t0"] = _relative_error(out.at_t0, exact)
    # controls that must not be flagged
    control = explicit_grid(0.1)
    zero = explicit_solve_backward(np.zeros(control.n_space), control, BENCHMARK_MARKET, cfg)
    lin = explicit_solve_backward(0.7 * control.s, control, BENCHMARK_MARKET, cfg, boundary=lambda S, t: 0.7 * S)
    measured["zero_data_diverged"] = zero.diverged
    measured["linear_data_diverged"] = lin.diverged
    ok = all(flags) and not zero.diverged and not lin.diverged
    return _finish("explicit_divergence", ok, measured,
                   {"divergence_factor": cfg.divergence_factor}, start,
                   {"ratios": list(EXPLICIT_RATIOS), "space_nodes": EXPLICIT_SPACE_NODES,
                    "domain": list(BENCHMARK_DOMAIN), "maturity": BENCHMARK_MATURITY,
                    "sigma": BENCHMARK_MARKET.sigma, "rho": BENCHMARK_MARKET.rho, "m": BENCHMARK_PARAMS.m})


def check_spread_figure(config: SolverConfig | None = None, *, linear_tol=0.005) -> CheckReport:
    """Bull spread: nonlinear curves grow with ``rho`` and lie above the linear one near the strikes.

    The linear curve is the implicit linear solver with the figure's interest
    rate. Its max deviation from the closed-form linear price must stay within
    ``linear_tol`` times the spread width and shrink when both steps are halved.
    """
    start = time.perf_counter()
    cfg = config or SolverConfig()
    tol = 10 * cfg.newton_tol
    grid = SPREAD_GRID
    linear_market = MarketParams(SPREAD_SIGMA, 0.0, SPREAD_RATE)
    lin = linear_fd_solve(SPREAD, grid, linear_market)
    exact_lin = linear_bs_price(SPREAD, grid.s, 0.0, linear_market, grid.maturity)
    fields = [implicit_solve_backward(SPREAD, grid, MarketParams(SPREAD_SIGMA, rho), cfg) for rho in SPREAD_RHOS]
    rows = [f.at_t0 for f in fields]
    steps = [float(np.min(b - a)) for a, b in zip(rows, rows[1:])]
    near = (np.abs(grid.s - SPREAD.long_strike) <= 10) | (np.abs(grid.s - SPREAD.short_strike) <= 10)
    dominance = [float(np.min((r - lin.at_t0)[near])) for r in rows]
    at70 = [float(np.interp(70.0, grid.s, r)) for r in rows]
    terminal_gap = max(float(np.max(np.abs(f.terminal - np.maximum(grid.s - 60, 0) + np.maximum(grid.s - 80, 0))))
                       for f in fields)
    linear_gap = float(np.max(np.abs(lin.at_t0 - exact_lin)))
    half = GridSpec.from_steps(grid.s_min, grid.h / 2, 2 * (grid.n_space - 1), grid.tau / 2, 2 * grid.n_time)
    linear_gap_half = float(np.max(np.abs(linear_fd_solve(SPREAD, half, linear_market).at_t0
                                          - linear_bs_price(SPREAD, half.s, 0.0, linear_market, half.maturity))))
    width = SPREAD.short_strike - SPREAD.long_strike
    ok = (min(steps) >= -tol and min(dominance) > 0 and all(a < b for a, b in zip(at70, at70[1:]))
          and terminal_gap == 0.0 and linear_gap <= linear_tol * width and linear_gap_half < linear_gap)
    return _finish(
        "spread_figure", ok,
        {"min_increment_in_rho": steps, "min_excess_over_linear_near_strikes": dominance,
         "u_at_70": at70, "linear_u_at_70": float(np.interp(70.0, grid.s, lin.at_t0)),
         "linear_fd_vs_closed_form": linear_gap, "linear_fd_vs_closed_form_half_steps": linear_gap_half,
         "terminal_payoff_gap": terminal_gap},
        {"decrease": tol, "linear_vs_closed_form": linear_tol * width}, start,
        {"long_strike": SPREAD.long_strike, "short_strike": SPREAD.short_strike, "sigma": SPREAD_SIGMA,
         "rate": SPREAD_RATE, "rhos": list(SPREAD_RHOS), "grid": asdict(grid), **_solver_config(cfg)},
    )


CHECKS = {
    "closed_form_residual": check_closed_form_residual,
    "benchmark_accuracy": check_benchmark_accuracy,
    "ode_chain": check_ode_chain,
    "group_action": check_group_action,
    "rho_monotonicity": check_rho_monotonicity,
    "nonlinearity_gap": check_nonlinearity_gap,
    "guess_independence": check_guess_independence,
    "explicit_divergence": check_explicit_divergence,
    "asymptotic_orders": check_asymptotic_orders,
    "rho_rescaling": check_rho_rescaling,
    "spread_figure": check_spread_figure,
}


def run_all(selection=None, path=None) -> list[CheckReport]:
    """Run the selected checks (all when ``selection`` is ``None``) in registry order.

    ``selection`` may also be ``"all"``. With ``path`` the records are written
    there, one line each.

    Raises
    ------
    UnknownCheck
        Before anything runs, if a name is not registered.
    """
    if selection is None or selection == "all":
        names = list(CHECKS)
    else:
        names = [selection] if isinstance(selection, str) else list(selection)
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise UnknownCheck(f"unknown check(s): {', '.join(unknown)}; known: {', '.join(CHECKS)}")
    reports = [CHECKS[name]() for name in names]
    if path is not None:
        write_reports(reports, path)
    return reports


def write_reports(reports, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(r.record() + "\n" for r in reports))
    return path
