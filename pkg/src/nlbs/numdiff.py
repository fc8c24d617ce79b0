"""Central finite-difference stencils used for Greeks and residual checks."""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def central_weights(order: int, accuracy: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the central stencil for the ``order``-th derivative.

    The stencil has truncation error ``O(h**accuracy)``; ``accuracy`` must be even.
    """
    if accuracy % 2 or accuracy < 2:
        raise ValueError("accuracy must be a positive even integer")
    half = (order - 1) // 2 + accuracy // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    n = offsets.size
    vander = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = factorial(order)
    weights = np.linalg.solve(vander, rhs)
    weights[np.abs(weights) < 1e-14 * np.abs(weights).max()] = 0.0
    return offsets, weights


def derivative(f, x, order: int = 1, h: float | None = None, accuracy: int = 2):
    """Central-difference estimate of ``d^order f / dx^order`` at ``x``.

    ``f`` must accept numpy arrays. ``h`` defaults to a relative step of 1e-4
    with an absolute floor of 1e-6.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = np.maximum(1e-4 * np.abs(x), 1e-6)
    offsets, weights = central_weights(order, accuracy)
    total = 0.0
    for off, w in zip(offsets, weights):
        if w != 0.0:
            total = total + w * f(x + off * h)
    return total / np.asarray(h) ** order
