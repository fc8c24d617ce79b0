"""Explicit invariant solutions of the illiquid-market PDE and their analysis.

The family is built from the scaling variables ``z = ln S - delta t`` and
``v = -u / S``. With ``delta = sigma^2 / 8`` the reduced equation integrates in
closed form; writing ``w = S^{3/2} exp(-3 sigma^2 t / 16)`` and
``s = sqrt(m^2 + 4 w)`` the solution is

    rho u = S ln S - delta S t
            - 2^{-4/3} e^{delta t} (|m + s|^{4/3} + |s - m|^{4/3})
            - S ln (cbrt(m + s) - cbrt(s - m))^4
            + rho (d1 S + d2).

All fractional powers are real: ``((x)^4)^{1/3}`` is ``|x|^{4/3}`` and cube
roots are signed. ``|s - |m||`` is formed as ``4 w / (s + |m|)`` so that neither
large ``|m|`` nor small ``S`` loses digits to cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import mpmath
import numpy as np

from .errors import DegenerateFamily, DomainError
from .model import MarketParams, pde_residual
from .numdiff import derivative

_TWO_M43 = 2.0 ** (-4.0 / 3.0)


@dataclass(frozen=True)
class ClosedFormParams:
    """Constants selecting one member of the explicit family.

    ``delta=None`` means the family value ``sigma**2 / 8`` of whatever market
    the member is evaluated in, which is what vega needs.
    """

    m: float
    d1: float = 0.0
    d2: float = 0.0
    delta: float | None = None
    eps2: int = 1

    def __post_init__(self):
        if self.eps2 not in (1, -1):
            raise DomainError(f"eps2 must be +1 or -1, got {self.eps2}")
        if self.delta is not None and not self.delta > 0:
            raise DomainError(f"delta must be > 0, got {self.delta}")

    def resolved_delta(self, market: MarketParams) -> float:
        family = market.sigma**2 / 8.0
        if self.delta is None:
            return family
        if abs(self.delta - family) > 4 * math.ulp(family):
            raise DomainError(
                f"the explicit family exists only for delta = sigma^2/8 = {family!r}, got {self.delta!r}"
            )
        return family


@dataclass(frozen=True)
class GroupElement:
    """Point of the four-parameter symmetry group.

    Generators: ``S d/dS + u d/du`` (a1), ``d/dt`` (a2), ``S d/du`` (a3),
    ``d/du`` (a4); ``epsilon`` is the group parameter.
    """

    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    epsilon: float = 0.0


def _positive_S(S):
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0):
        raise DomainError("S must be > 0")
    return S


def _scalar(x):
    return x[()] if np.ndim(x) == 0 else x


def _root_pair(m, w, eps1=1, sqrt=np.sqrt):
    """Return ``(|m + eps1 s|, |-m + eps1 s|)`` for ``s = sqrt(m^2 + 4w)`` without cancellation."""
    s = sqrt(m * m + 4 * w)
    big = s + abs(m)
    small = 4 * w / big
    # eps1 * m >= 0 puts the large magnitude first
    if eps1 * m >= 0:
        return big, small
    return small, big


def reduce_coords(S, t, delta):
    """Scaling variable ``z = ln S - delta t``."""
    S = _positive_S(S)
    return _scalar(np.log(S) - delta * np.asarray(t, dtype=float))


def invariant_y(z, params: ClosedFormParams, market: MarketParams, *, eps1: int = 1):
    """``y = v_z`` on the explicit branch, as a function of the scaling variable.

    Even in ``m``; equals ``-3/rho`` for ``m = 0``.
    """
    market.require_nonlinear()
    params.resolved_delta(market)
    z = np.asarray(z, dtype=float)
    w = np.exp(1.5 * z)
    root_w = np.sqrt(w)
    first, _ = _root_pair(params.m, w, eps1)
    # r = |m + eps1 s|^{4/3} / (2^{4/3} e^z); exactly 1 when m = 0
    r = (first / (2.0 * root_w)) ** (4.0 / 3.0)
    return _scalar(-(1.0 + r + 1.0 / r) / market.rho)


def _is_mp(*xs):
    return any(isinstance(x, (mpmath.mpf, mpmath.mpc)) for x in xs)


class _MpOps:
    log = staticmethod(mpmath.log)
    exp = staticmethod(mpmath.exp)
    sqrt = staticmethod(mpmath.sqrt)
    cbrt = staticmethod(mpmath.cbrt)


def _family_rho_u(S, t, m, delta, eps1, ops, four_thirds):
    """``rho * u`` of the family with ``d1 = d2 = 0``; ``ops`` is numpy or an mpmath shim."""
    w = S**1.5 * ops.exp(-1.5 * delta * t)
    first, second = _root_pair(m, w, eps1, ops.sqrt)
    powers = first**four_thirds + second**four_thirds
    # log term: for either eps2 the signed cube roots differ by +-(cbrt(s + |m|) - cbrt(s - |m|)),
    # and cbrt(a) - cbrt(b) = (a - b) / (a^{2/3} + (ab)^{1/3} + b^{2/3}) with ab = 4w
    big, small = _root_pair(abs(m), w, 1, ops.sqrt)
    gap = 2 * abs(m) / (ops.cbrt(big) ** 2 + ops.cbrt(4 * w) + ops.cbrt(small) ** 2)
    return (S * ops.log(S) - delta * S * t
            - 2 ** (-four_thirds) * ops.exp(delta * t) * powers
            - 4 * S * ops.log(gap))


def invariant_u(S, t, params: ClosedFormParams, market: MarketParams, *, eps1: int = 1):
    """Hedge cost ``u(S, t)`` of one member of the explicit family.

    Accepts floats or arrays; scalar ``mpmath.mpf`` arguments are evaluated in
    the working ``mpmath`` precision (used by high-precision residual checks).
    ``eps1`` is exposed only so tests can confirm the value does not depend on it.

    Raises
    ------
    DegenerateFamily
        For ``m = 0``; that member reduces to :func:`trivial_u`.
    """
    market.require_nonlinear()
    if params.m == 0:
        raise DegenerateFamily("m = 0 reduces to the log-linear trivial solution; use trivial_u")
    delta = params.resolved_delta(market)
    if _is_mp(S, t):
        S, t = mpmath.mpf(S), mpmath.mpf(t)
        if S <= 0:
            raise DomainError("S must be > 0")
        delta = mpmath.mpf(market.sigma) ** 2 / 8
        rho_u = _family_rho_u(S, t, mpmath.mpf(params.m), delta, eps1, _MpOps, mpmath.mpf(4) / 3)
        return rho_u / market.rho + params.d1 * S + params.d2
    S = _positive_S(S)
    t = np.asarray(t, dtype=float)
    rho_u = _family_rho_u(S, t, params.m, delta, eps1, np, 4.0 / 3.0)
    return _scalar(rho_u / market.rho + params.d1 * S + params.d2)


def trivial_u(S, t, market: MarketParams, *, variant="linear", c1=0.0, d0=0.0, sign=1, delta=None):
    """Trivial invariant solutions.

    ``variant="linear"``: ``u = c1 S``.
    ``variant="loglinear"``: ``u = (1 + sign*sqrt(sigma^2/(2 delta))) (S ln S - delta S t) / rho + d0 S``.
    """
    S = _positive_S(S)
    t = np.asarray(t, dtype=float)
    if variant == "linear":
        return _scalar(c1 * S + 0.0 * t)
    if variant != "loglinear":
        raise ValueError(f"unknown trivial variant {variant!r}")
    market.require_nonlinear()
    if delta is None:
        delta = market.sigma**2 / 8.0
    if not delta > 0:
        raise DomainError(f"delta must be > 0, got {delta}")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    k = (1.0 + sign * math.sqrt(market.sigma**2 / (2.0 * delta))) / market.rho
    return _scalar(k * (S * np.log(S) - delta * S * t) + d0 * S)


def exceptional_y(delta, sigma, rho):
    """Discriminant-curve solution ``y = 1/rho``; exists only for ``delta = sigma^2/8``."""
    family = sigma**2 / 8.0
    if abs(delta - family) <= math.ulp(family):
        return 1.0 / rho
    return None


def ode_residual_v(v, v_z, v_zz, market: MarketParams, delta):
    """Residual of the reduced second-order ODE for ``v(z)``."""
    if delta == 0:
        raise DomainError("delta must be nonzero")
    v_z = np.asarray(v_z, dtype=float)
    q = v_z + np.asarray(v_zz, dtype=float)
    return _scalar(v_z * (1.0 + market.rho * q) ** 2 - market.sigma**2 / (2.0 * delta) * q)


def ode_residual_y(y, y_z, market: MarketParams, delta):
    """Residual of the first-order ODE for ``y = v_z``."""
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise ZeroDivisionError("ode_residual_y is undefined at y = 0")
    y_z = np.asarray(y_z, dtype=float)
    rho, sig2 = market.rho, market.sigma**2
    lin = y * y + y / rho - sig2 / (4.0 * rho**2 * delta)
    const = y * y + 2.0 * y / rho + (2.0 * delta - sig2) / (2.0 * rho**2 * delta)
    return _scalar(y_z**2 + 2.0 * y_z / y * lin + const)


def ode_residual_y_dyz(y, y_z, market: MarketParams, delta):
    """Partial derivative of :func:`ode_residual_y` with respect to ``y_z``."""
    y = np.asarray(y, dtype=float)
    rho = market.rho
    lin = y * y + y / rho - market.sigma**2 / (4.0 * rho**2 * delta)
    return _scalar(2.0 * np.asarray(y_z, dtype=float) + 2.0 / y * lin)


# -- symmetry group ----------------------------------------------------------


def apply_group(surface, g: GroupElement):
    """Push a surface ``u(S, t)`` through the group element ``g``.

    Returns a callable of the transformed coordinates. For a solution of the
    PDE the result is again a solution.
    """
    a1, a2, a3, a4, eps = g.a1, g.a2, g.a3, g.a4, g.epsilon
    scale = math.exp(a1 * eps)
    if not math.isfinite(scale):
        raise OverflowError("exp(a1*epsilon) overflows")
    # (e^{a1 eps} - 1)/a1, continuous at a1 = 0
    shift = a4 * (math.expm1(a1 * eps) / a1 if a1 != 0 else eps)

    def transformed(S_new, t_new, *args, **kw):
        S = np.asarray(S_new, dtype=float) / scale
        t = np.asarray(t_new, dtype=float) - a2 * eps
        u = np.asarray(surface(S, t, *args, **kw), dtype=float)
        return _scalar(scale * (u + a3 * S * eps) + shift)

    return transformed


def group_point(S, t, u, g: GroupElement):
    """Image ``(S~, t~, u~)`` of a single point under ``g``."""
    a1, a2, a3, a4, eps = g.a1, g.a2, g.a3, g.a4, g.epsilon
    scale = math.exp(a1 * eps)
    shift = a4 * (math.expm1(a1 * eps) / a1 if a1 != 0 else eps)
    S = np.asarray(S, dtype=float)
    return S * scale, np.asarray(t, dtype=float) + a2 * eps, scale * (np.asarray(u, dtype=float) + a3 * S * eps) + shift


def group_invariants(S, t, u, g: GroupElement):
    """The two functionally independent invariants of the orbit through ``g``'s generator."""
    S = _positive_S(S)
    inv1 = g.a1 * np.asarray(t, dtype=float) - g.a2 * np.log(S)
    inv2 = g.a1 * np.asarray(u, dtype=float) / S - g.a3 * np.log(S) + g.a4 / S
    return _scalar(inv1), _scalar(inv2)


# -- asymptotics -------------------------------------------------------------


def _expansion_args(S, t, params, market):
    """Common set-up of the two expansions; mpmath scalars stay in mpmath."""
    if params.m == 0:
        raise DegenerateFamily("asymptotics need m != 0")
    delta = params.resolved_delta(market)
    if _is_mp(S, t):
        S, t = mpmath.mpf(S), mpmath.mpf(t)
        if S <= 0:
            raise DomainError("S must be > 0")
        return S, t, mpmath.mpf(market.sigma) ** 2 / 8, abs(mpmath.mpf(params.m)), _MpOps, mpmath.mpf(1) / 3
    return _positive_S(S), np.asarray(t, dtype=float), delta, abs(params.m), np, 1.0 / 3.0


def asymptotic_small_S(S, t, params: ClosedFormParams, market: MarketParams):
    """Expansion of the family as ``S -> 0`` through the ``S^2`` term.

    The remainder is ``O(S^{5/2})`` (in fact the ``S^{5/2}`` coefficient
    vanishes). ``d1`` and ``d2`` are added as in :func:`invariant_u`.
    """
    S, t, delta, a, ops, third = _expansion_args(S, t, params, market)
    rho_u = (-a ** (4 * third) * ops.exp(delta * t)
             + S * ops.log(S)
             - S * (delta * t + 4 * third * ops.log(2 * a))
             + 8 * third * S * ops.sqrt(S) * ops.exp(-delta * t / 2) / a ** (2 * third)
             + S**2 * ops.exp(-delta * t) / a ** (4 * third))
    out = rho_u / market.rho + params.d1 * S + params.d2
    return out if ops is _MpOps else _scalar(out)


def asymptotic_large_S(S, t, params: ClosedFormParams, market: MarketParams):
    """Expansion of the family as ``S -> infinity`` through the ``S^{-1/2}`` term.

    The main term ``3 S ln S / rho`` is the same for every member.
    """
    S, t, delta, a, ops, third = _expansion_args(S, t, params, market)
    rho_u = (3 * S * ops.log(S)
             - S * (3 * delta * t + 4 * ops.log(2**third * a / 3) + 2)
             - (2 * third) ** 3 * a * a * ops.exp(3 * delta * t / 2) / ops.sqrt(S))
    out = rho_u / market.rho + params.d1 * S + params.d2
    return out if ops is _MpOps else _scalar(out)


# -- surfaces and Greeks ---------------------------------------------------


def family_surface(params: ClosedFormParams):
    """Callable ``u(S, t, market)`` for one family member."""
    def surface(S, t, market):
        return invariant_u(S, t, params, market)

    return surface


def greeks(surface, S, t, market: MarketParams, *, rel_bump=1e-4, abs_floor=1e-6):
    """Central-difference Greeks of ``surface(S, t, market)``.

    Returns a dict with ``delta = u_S``, ``gamma = u_SS``, ``theta = -u_t`` and
    ``vega = u_sigma``. Vega carries the conventional sign; figure output that
    follows the negative-sign convention flips it explicitly.
    """
    S = np.asarray(S, dtype=float)
    t = np.asarray(t, dtype=float)
    hS = np.maximum(rel_bump * np.abs(S), abs_floor)
    ht = np.maximum(rel_bump * np.abs(t), abs_floor)
    hsig = max(rel_bump * market.sigma, abs_floor)

    u0 = np.asarray(surface(S, t, market), dtype=float)
    up = np.asarray(surface(S + hS, t, market), dtype=float)
    dn = np.asarray(surface(S - hS, t, market), dtype=float)
    dt = (np.asarray(surface(S, t + ht, market)) - np.asarray(surface(S, t - ht, market))) / (2 * ht)
    dsig = (np.asarray(surface(S, t, replace(market, sigma=market.sigma + hsig)))
            - np.asarray(surface(S, t, replace(market, sigma=market.sigma - hsig)))) / (2 * hsig)
    return {
        "delta": _scalar((up - dn) / (2 * hS)),
        "gamma": _scalar((up - 2 * u0 + dn) / hS**2),
        "theta": _scalar(-dt),
        "vega": _scalar(dsig),
    }


def surface_residual(surface, S, t, market: MarketParams, *, accuracy=8, rel_step=0.02):
    """PDE residual of a callable ``surface(S, t)`` using high-order central differences.

    Returns ``(residual, u)``. The S-step is ``rel_step * S``; the t-step is
    fixed since the family depends on time only through smooth exponentials.
    """
    S = _positive_S(S)
    t = np.asarray(t, dtype=float)
    u = np.asarray(surface(S, t), dtype=float)
    u_SS = derivative(lambda x: surface(x, t), S, order=2, h=rel_step * S, accuracy=accuracy)
    u_t = derivative(lambda x: surface(S, x), t, order=1, h=0.05, accuracy=accuracy)
    return pde_residual(u, u_t, u_SS, S, market), u


def surface_residual_mp(surface, S, t, market: MarketParams, *, dps=40):
    """Relative PDE residual of ``surface(S, t)`` with ``mpmath`` derivatives.

    ``surface`` must accept ``mpmath.mpf`` scalars. Returns
    ``|u_t + F| / max(|u_t|, |F|)`` as a float, where ``F`` is the diffusion
    term. Used where float finite differences cannot resolve the residual,
    e.g. members with large ``|m|`` whose values are dominated by a constant.
    """
    with mpmath.workdps(dps):
        S, t = mpmath.mpf(S), mpmath.mpf(t)
        u_t = mpmath.diff(lambda x: surface(S, x), t)
        u_SS = mpmath.diff(lambda x: surface(x, t), S, 2)
        den = 1 - mpmath.mpf(market.rho) * S * u_SS
        F = mpmath.mpf(market.sigma) ** 2 * S**2 * u_SS / (2 * den**2)
        scale = max(abs(u_t), abs(F))
        return float(abs(u_t + F) / scale) if scale else 0.0
