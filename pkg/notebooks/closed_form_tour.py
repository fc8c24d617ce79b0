"""
The explicit solution family
============================

A walk through one family member: its values, how well it solves the
equation, its behaviour at both ends of the price axis and its Greeks.
Run with ``python notebooks/closed_form_tour.py``.
"""

from __future__ import annotations

import mpmath
import numpy as np

from nlbs.closed_form import (ClosedFormParams, asymptotic_large_S, asymptotic_small_S, family_surface,
                              greeks, invariant_u, invariant_y, surface_residual_mp)
from nlbs.model import MarketParams

market = MarketParams(sigma=0.35, rho=0.1)
member = ClosedFormParams(m=0.5)

# %% Values on a small grid. Near S = 0 the member tends to -|m|^{4/3} e^{sigma^2 t/8} / rho.
S = np.array([1e-6, 0.05, 0.5, 1.0, 2.0])
for t in (0.0, 0.5, 1.0):
    print(f"t={t:.1f}  u =", np.array2string(invariant_u(S, t, member, market), precision=4))
limit = -(0.5 ** (4 / 3)) * np.exp(market.sigma**2 / 8 * 0.5) / market.rho
print(f"limit at S -> 0, t = 0.5: {limit:.6f}")

# %% PDE residual with 40-digit derivatives: the member is an exact solution.
surface = lambda x, y: invariant_u(x, y, member, market)  # noqa: E731
for s, t in [(0.2, 0.1), (1.0, 0.5), (1.9, 0.9)]:
    print(f"relative residual at S={s}, t={t}: {surface_residual_mp(surface, s, t, market):.2e}")

# %% The reduced variable y(z) is even in m and equals -3/rho at m = 0.
z = np.linspace(-3, 3, 7)
print("y(z; m=0)   =", invariant_y(z, ClosedFormParams(0.0), market))
print("y(z; m=0.5) =", np.array2string(invariant_y(z, member, market), precision=4))

# %% Expansions: scaled remainders stay bounded as S runs toward each limit.
with mpmath.workdps(50):
    for s in (1e-2, 1e-3, 1e-4, 1e-5):
        r = invariant_u(mpmath.mpf(s), mpmath.mpf(0.4), member, market) - asymptotic_small_S(
            mpmath.mpf(s), mpmath.mpf(0.4), member, market)
        print(f"S={s:.0e}  |remainder| / S^2.5 = {float(abs(r) / mpmath.mpf(s) ** 2.5):.4f}")
    for s in (1e3, 1e4, 1e5, 1e6):
        r = invariant_u(mpmath.mpf(s), mpmath.mpf(0.4), member, market) - asymptotic_large_S(
            mpmath.mpf(s), mpmath.mpf(0.4), member, market)
        print(f"S={s:.0e}  |remainder| * S^1.25 = {float(abs(r) * mpmath.mpf(s) ** 1.25):.3e}")

# %% Greeks of the delta-panel member (rho = 1 gives rho * Greek directly).
g = greeks(family_surface(ClosedFormParams(8.5)), np.array([1.0, 10.0, 50.0, 100.0]), 0.5,
           MarketParams(0.28, 1.0))
for name, values in g.items():
    print(f"{name:>6}:", np.array2string(np.asarray(values), precision=4))
