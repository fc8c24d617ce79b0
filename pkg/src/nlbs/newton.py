"""Damped Newton iteration for square nonlinear systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import NoConvergence, SingularJacobian


@dataclass(frozen=True)
class NewtonOptions:
    """Stopping and damping controls.

    Convergence needs both ``max|F(x)| <= tol`` and a last Newton step no larger
    than ``step_tol * (1 + max|x|)``. The step test matters when ``F`` is scaled
    very small, as the layer residuals of the implicit scheme are.
    """

    tol: float = 1e-12
    max_iter: int = 100
    max_halvings: int = 40
    step_tol: float = 1e-10

    def __post_init__(self):
        if not (self.tol > 0 and self.step_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_iter < 1 or self.max_halvings < 0:
            raise ValueError("max_iter must be >= 1 and max_halvings >= 0")


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def fd_jacobian(residual, x, f0=None, rel_step=1e-7):
    """Dense forward-difference Jacobian."""
    x = np.asarray(x, dtype=float)
    f0 = residual(x) if f0 is None else f0
    jac = np.empty((f0.size, x.size))
    for k in range(x.size):
        step = rel_step * max(1.0, abs(x[k]))
        xp = x.copy()
        xp[k] += step
        jac[:, k] = (residual(xp) - f0) / step
    return jac


def banded_to_dense(ab):
    """Expand a ``(3, n)`` tridiagonal band (scipy ``solve_banded`` layout) to a matrix."""
    n = ab.shape[1]
    return np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1) if n > 1 else np.diag(ab[1])


def _solve(jac, rhs, banded):
    try:
        if banded:
            step = la.solve_banded((1, 1), jac, rhs, check_finite=True)
        else:
            step = la.solve(jac, rhs, check_finite=True)
    except (la.LinAlgError, ValueError) as exc:
        raise SingularJacobian(str(exc)) from exc
    if not np.all(np.isfinite(step)):
        raise SingularJacobian("Newton step is not finite")
    return step


def newton_solve(residual, jacobian, guess, options: NewtonOptions | None = None, *, banded=False,
                 admissible=None):
    """Solve ``residual(x) = 0`` by damped Newton iteration.

    Parameters
    ----------
    residual : callable
        Maps a 1-D array to a 1-D array of the same length.
    jacobian : callable or None
        Returns the Jacobian at ``x``; a ``(3, n)`` band when ``banded`` is
        true. ``None`` uses a dense forward-difference Jacobian.
    guess : array_like
        Starting point.
    admissible : callable, optional
        ``admissible(x) -> bool``. Once an iterate is admissible, damped
        steps that would leave the admissible set are halved further. This
        keeps the iteration on one branch of a system with several roots.

    ``iterations`` in the result counts damped updates; the final confirming
    correction (smaller than ``step_tol``) is applied but not counted, so a
    linear system reports one iteration and an exact guess reports zero.

    Each full step is halved (at most ``max_halvings`` times) until the
    residual max-norm decreases; if no halving helps, the smallest step is
    taken anyway.

    Raises
    ------
    NoConvergence
        After ``max_iter`` iterations; carries the last residual norm.
    SingularJacobian
        When the linear system for the step cannot be solved.
    """
    opts = options or NewtonOptions()
    x = np.array(guess, dtype=float, copy=True)
    f = np.asarray(residual(x), dtype=float)
    norm = float(np.max(np.abs(f))) if f.size else 0.0
    if jacobian is None:
        banded = False

    for it in range(opts.max_iter + 1):
        if not np.isfinite(norm):
            raise NoConvergence("residual became non-finite", residual_norm=norm, iterations=it)
        jac = fd_jacobian(residual, x, f) if jacobian is None else jacobian(x)
        dx = _solve(jac, -f, banded)
        size = float(np.max(np.abs(dx))) if dx.size else 0.0
        scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
        if norm <= opts.tol and size <= opts.step_tol * scale:
            # the confirming correction is below step_tol; apply it without counting it
            x = x + dx
            return NewtonResult(x, it, float(np.max(np.abs(residual(x)), initial=0.0)))
        if it == opts.max_iter:
            break
        # inside the tolerance the residual sits at rounding level and damping would stall
        halvings = 0 if norm <= opts.tol else opts.max_halvings
        guarded = admissible is not None and halvings > 0 and bool(admissible(x))
        lam = 1.0
        for k in range(halvings + 1):
            x_new = x + lam * dx
            f_new = np.asarray(residual(x_new), dtype=float)
            norm_new = float(np.max(np.abs(f_new))) if f_new.size else 0.0
            if k == halvings or (norm_new < norm and (not guarded or admissible(x_new))):
                break
            lam *= 0.5
        x, f, norm = x_new, f_new, norm_new
    raise NoConvergence(
        f"Newton did not converge in {opts.max_iter} iterations (residual {norm:.3e})",
        residual_norm=norm,
        iterations=opts.max_iter,
    )
