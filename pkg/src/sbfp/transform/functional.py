"""The turning-point functional and the restricted moments derived from it.

The functional is a transform in ``x`` (dual of the horizon ``h``)

    (psi0 - psi1) + gamma0 * phi * (Gamma0 - Gamma1) * (1 + Dbar)**2 / (2 (1 + 2 Dbar))

with ``psi0 = gamma_0(v, theta)``, ``psi1 = gamma_0(v, theta + x)``, the
middle factors evaluated at ``(u + v, vartheta + theta + x)`` and
``Gamma0/1 = gamma_nu(v, theta [+ x])``.  The last factor is
``-1 / (phibar**2 - 2 phibar)`` written through ``phibar = 1/(1 + Dbar)``.
Every piece is a ratio of linear factors in ``x``, so the inverse is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .lst import GammaKind, LstParams, d_du_psi_rational, gamma_fn
from .numeric import lc_inverse_numeric
from .rational import RationalFn, lc_inverse_factored, lc_inverse_rational

FD_STEPS = (1e-4, 5e-5)


@dataclass(frozen=True)
class TransformContext:
    """Transform variables: ``u, v`` pair with ``A_{nu-1}, A_nu`` and
    ``vartheta, theta`` with ``tau_{nu-1}, tau_nu``; ``h`` is the horizon."""

    u: float = 0.0
    v: float = 0.0
    vartheta: float = 0.0
    theta: float = 0.0
    h: float = 1.0

    def check(self):
        if min(self.u, self.v, self.vartheta, self.theta) < 0:
            raise ValueError("transform variables must be non-negative")
        if self.h < 0:
            raise ValueError("h must be non-negative")


def _quad(p: LstParams, omega: float, slope: float) -> float:
    return 0.5 * p.sigma ** 2 * omega ** 2 + slope * omega


def phi_terms(ctx: TransformContext, p: LstParams):
    """The functional as ``[(scale, numerator, poles), ...]`` in ``x``."""
    dm, d0m = p.delta_mean, p.delta0_mean
    s = ctx.u + ctx.v
    shift = ctx.vartheta + ctx.theta
    terms = []
    # psi0 - psi1
    if d0m > 0:
        e0 = _quad(p, ctx.v, p.a0) + ctx.theta
        terms.append((1.0 / (1.0 + d0m * e0), [1.0], []))
        terms.append((-1.0 / d0m, [1.0], [(-e0 - 1.0 / d0m, 1)]))
    ev = _quad(p, ctx.v, p.w_exit) + ctx.theta
    k1 = 1.0 / (1.0 + dm * ev)
    cb = _quad(p, s, p.w_bar) + shift
    r3 = -cb - 1.0 / dm
    num = P.polyfromroots([0.0, r3, r3])
    poles = [(-_quad(p, s, p.w_prev) - shift - 1.0 / dm, 1),
             (-cb - 0.5 / dm, 1),
             (-ev - 1.0 / dm, 1)]
    if d0m > 0:
        poles.append((-_quad(p, s, p.a0) - shift - 1.0 / d0m, 1))
        scale = k1 / (4.0 * d0m)
    else:
        scale = k1 / 4.0
    terms.append((scale, num, poles))
    return terms


def phi_transform(x, ctx: TransformContext, p: LstParams):
    """The functional's transform at ``x``, assembled from the gamma functions."""
    s = ctx.u + ctx.v
    y = ctx.vartheta + ctx.theta + x
    psi0 = gamma_fn(GammaKind.INITIAL, ctx.v, ctx.theta, p)
    psi1 = gamma_fn(GammaKind.INITIAL, ctx.v, ctx.theta + x, p)
    g0 = gamma_fn(GammaKind.INITIAL, s, y, p)
    phi = gamma_fn(GammaKind.PREV, s, y, p)
    phibar = gamma_fn(GammaKind.AVERAGE, s, y, p)
    big0 = gamma_fn(GammaKind.EXIT, ctx.v, ctx.theta, p)
    big1 = gamma_fn(GammaKind.EXIT, ctx.v, ctx.theta + x, p)
    return (psi0 - psi1) - g0 * phi * (big0 - big1) / (2.0 * (phibar ** 2 - 2.0 * phibar))


def phi_rational(ctx: TransformContext, p: LstParams) -> RationalFn:
    total = RationalFn.constant(0.0)
    for scale, num, poles in phi_terms(ctx, p):
        total = total + RationalFn.from_factors(scale, num, poles)
    return total


def _phi_value(ctx: TransformContext, p: LstParams, method: str) -> float:
    if method == "exact":
        return math.fsum(lc_inverse_factored(sc, num, poles, ctx.h)
                         for sc, num, poles in phi_terms(ctx, p))
    if method == "partial":
        return lc_inverse_rational(phi_rational(ctx, p), ctx.h)
    if method == "numeric":
        return lc_inverse_numeric(lambda x: phi_transform(x, ctx, p), ctx.h)
    raise ValueError(f"unknown method {method!r}")


def phi_nu(ctx: TransformContext, p: LstParams, method: str = "exact") -> float:
    """Inverse Laplace-Carson transform of the functional at ``ctx.h``.

    ``method`` selects the inversion: ``"exact"`` (termwise divided
    differences, robust to nearly coincident poles), ``"partial"`` (partial
    fractions of the summed rational function) or ``"numeric"``
    (Gaver-Stehfest on the gamma-function assembly).
    """
    ctx.check()
    return _phi_value(ctx, p, method)


def _richardson_slope(fn, steps=FD_STEPS):
    """Central differences at two steps combined by Richardson extrapolation."""
    big, small = steps
    d_big = (fn(big) - fn(-big)) / (2 * big)
    d_small = (fn(small) - fn(-small)) / (2 * small)
    ratio = (big / small) ** 2
    return (ratio * d_small - d_big) / (ratio - 1.0)


def fd_moment(p: LstParams, h: float, variable: str) -> float:
    """``-d/d(variable)`` of the functional at the origin, by finite differences."""
    if variable not in ("u", "v", "vartheta", "theta"):
        raise ValueError(f"unknown variable {variable!r}")
    base = TransformContext(h=h)

    def at(step):
        return _phi_value(replace(base, **{variable: step}), p, "exact")

    return -_richardson_slope(at)


def a_prev_curve(p: LstParams):
    """``h -> E[A_{nu-1}; h]`` as an explicit exponential sum."""
    from .rational import lc_inverse_expsum
    return lc_inverse_expsum(d_du_psi_rational(p))


@dataclass(frozen=True)
class Moments:
    """Indicator-restricted moments at horizon ``h`` (not conditional means)."""

    h: float
    a_prev: float
    a_prev_fd: float
    tau_prev: float
    a_exit: float
    tau_exit: float
    nu: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("h", "a_prev", "a_prev_fd", "tau_prev", "a_exit", "tau_exit", "nu")}


def restricted_moments(p: LstParams, h: float) -> Moments:
    """Moments of the turning-point record at horizon ``h > 0``.

    ``a_prev`` comes from the exact u-derivative; ``a_prev_fd`` repeats it by
    finite differences as a cross-check.  The others are finite differences
    only.  ``nu`` is ``|E[tau_nu]| / delta``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    a_prev = float(lc_inverse_rational(d_du_psi_rational(p), h))
    tau_exit = fd_moment(p, h, "theta")
    return Moments(
        h=h,
        a_prev=a_prev,
        a_prev_fd=fd_moment(p, h, "u"),
        tau_prev=fd_moment(p, h, "vartheta"),
        a_exit=fd_moment(p, h, "v"),
        tau_exit=tau_exit,
        nu=abs(tau_exit) / p.delta_mean,
    )
