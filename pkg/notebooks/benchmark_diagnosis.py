"""
Why the family benchmark defeats both time-stepping schemes
===========================================================

The benchmark uses the member sigma = 0.35, rho = 0.1, m = 0.5 as terminal
data on [0.1, 2] x [0, 1]. Everywhere on that domain the member has
``1 - rho S u_SS < 0``: it lives on the branch where the backward problem is
anti-diffusive, so small errors grow instead of decaying. This script shows
the three symptoms. Run with ``python notebooks/benchmark_diagnosis.py``.
"""

from __future__ import annotations

import numpy as np

from nlbs import validation as V
from nlbs.closed_form import ClosedFormParams, invariant_u
from nlbs.errors import NoConvergence
from nlbs.fd import (SolverConfig, explicit_solve_backward, implicit_solve_backward, layer_denominator)
from nlbs.model import ClosedFormSnapshot, GridSpec

market, member = V.BENCHMARK_MARKET, V.BENCHMARK_PARAMS
terminal = ClosedFormSnapshot(member, 1.0)

# %% 1. The denominator of the member is negative on the whole benchmark grid.
grid = V.benchmark_grid(42, 30)
for t in (0.0, 0.5, 1.0):
    den = layer_denominator(invariant_u(grid.s, t, member, market), grid, market)
    print(f"t={t:.1f}: 1 - rho S u_SS in [{den.min():.3f}, {den.max():.3f}]")

# %% 2. The implicit layer systems have no root near the member.
for ns in V.BENCHMARK_SPACE_NODES:
    for nt in V.BENCHMARK_TIME_STEPS:
        try:
            implicit_solve_backward(terminal, V.benchmark_grid(ns, nt), market)
            print(f"{ns}x{nt}: converged")
        except NoConvergence as exc:
            print(f"{ns}x{nt}: no convergence at layer {exc.layer} (residual {exc.residual_norm:.2e})")

# With the polynomial residual, constant starting guesses do converge on the
# first layer, but to different roots, both far from the member.
one = GridSpec(0.1, 2.0, 28, 1, 1.0 / 15)
exact = invariant_u(one.s, 1.0 - 1.0 / 15, member, market)
for k in (0.03, 1.0):
    cfg = SolverConfig(initial_guess="constant", guess_constant=k, residual_form="cleared", branch="any")
    layer = implicit_solve_backward(terminal, one, market, cfg).at_t0
    print(f"k={k}: max relative distance from the member {np.max(np.abs(layer - exact) / np.abs(exact)):.2f}")

# %% 3. The explicit scheme oscillates but its growth saturates: the diffusion
# coefficient sigma^2 S^2 / (2 (1 - rho S u_SS)^2) shrinks as |u_SS| grows,
# so values never reach the 1e6 * max|terminal| divergence threshold.
for ratio in V.EXPLICIT_RATIOS:
    g = V.explicit_grid(ratio)
    out = explicit_solve_backward(terminal, g, market)
    exact = invariant_u(g.s, 0.0, member, market)
    err = np.max(np.abs(out.at_t0 - exact) / np.abs(exact))
    print(f"tau/h^2={ratio:<5} diverged={out.diverged}  max|u|={np.nanmax(np.abs(out.values)):.1f}  "
          f"relative error at t=0: {err:.3%}")
