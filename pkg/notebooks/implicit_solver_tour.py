"""
Hedge costs from the implicit scheme
====================================

Calls and a bull spread priced with the fully implicit scheme, set against
the linear Black-Scholes price. Run with
``python notebooks/implicit_solver_tour.py``.
"""

from __future__ import annotations

import numpy as np

from nlbs import validation as V
from nlbs.fd import SolverConfig, implicit_solve_backward, linear_bs_price, linear_fd_solve
from nlbs.model import Call, MarketParams

grid = V.CALL_GRID
probe = np.array([0.6, 0.8, 0.914, 1.0, 1.2])

# %% Hedge cost grows with illiquidity.
print("S          ", probe)
for rho in (0.0, 0.1, 0.2, 0.3):
    market = MarketParams(0.35, rho)
    if rho == 0.0:
        row = linear_bs_price(Call(0.914), probe, 0.0, market, grid.maturity)
    else:
        row = np.interp(probe, grid.s, implicit_solve_backward(Call(0.914), grid, market).at_t0)
    print(f"rho={rho:.1f}    ", np.array2string(row, precision=4))

# %% Eight calls cost more than three plus five: the equation is not linear.
u = {k: implicit_solve_backward(Call(0.914, k), grid, MarketParams(0.35, 0.03)).at_t0 for k in (3, 5, 8)}
gap = u[8] - (u[3] + u[5])
i = int(np.argmax(np.abs(gap)))
print(f"largest gap {gap[i]:.4f} at S={grid.s[i]:.2f}; at the ends {gap[0]:.1e}, {gap[-1]:.1e}")

# %% The starting guess of each layer's Newton run does not matter.
fields = [implicit_solve_backward(Call(0.914), grid, MarketParams(0.35, 0.1),
                                  SolverConfig(initial_guess="constant", guess_constant=k)) for k in (0.03, 1.0)]
print("k=0.03 vs k=1.0 max difference:", np.max(np.abs(fields[0].values - fields[1].values)))

# %% Bull spread on the wider grid, linear reference included.
lin = linear_fd_solve(V.SPREAD, V.SPREAD_GRID, MarketParams(0.35, 0.0, 0.02)).at_t0
at = np.array([50.0, 60.0, 70.0, 80.0, 90.0])
print("S          ", at)
print("linear     ", np.array2string(np.interp(at, V.SPREAD_GRID.s, lin), precision=3))
for rho in V.SPREAD_RHOS:
    row = implicit_solve_backward(V.SPREAD, V.SPREAD_GRID, MarketParams(0.35, rho)).at_t0
    print(f"rho={rho:<5}  ", np.array2string(np.interp(at, V.SPREAD_GRID.s, row), precision=3))
