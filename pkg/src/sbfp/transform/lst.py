"""Laplace-Stieltjes building blocks for memoryless observation.

With exponential spacings of mean ``delta`` the spacing transform is
``(1 + delta * theta)**-1`` and the joint transform of one Gaussian
increment and its spacing is the same function evaluated at
``sigma**2/2 * omega**2 + w * omega + x``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import PoleHit
from .rational import POLE_GUARD, RationalFn


@dataclass(frozen=True)
class LstParams:
    """Inputs of the memoryless transforms.

    ``w_bar`` is the average drift slope, ``w_prev`` the slope of the step
    before the turning point and ``w_exit`` the slope of the turning step.
    """

    delta_mean: float
    delta0_mean: float
    sigma: float
    a0: float
    w_bar: float
    w_prev: float
    w_exit: float

    def __post_init__(self):
        vals = (self.delta_mean, self.delta0_mean, self.sigma, self.a0,
                self.w_bar, self.w_prev, self.w_exit)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("LstParams fields must be finite")
        if self.delta_mean <= 0:
            raise ValueError("delta_mean must be positive")
        if self.delta0_mean < 0:
            raise ValueError("delta0_mean must be non-negative")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @classmethod
    def from_schedule(cls, drift, nu: int, delta_mean: float, delta0_mean: float,
                      sigma: float, a0: float) -> "LstParams":
        """Slopes taken from a :class:`~sbfp.process.DriftSchedule` at exit index ``nu``.

        ``w_bar`` averages the first ``nu - 1`` slopes (at least one).
        """
        if nu < 2:
            raise ValueError("nu must be >= 2 to have a previous step")
        return cls(delta_mean, delta0_mean, sigma, a0,
                   w_bar=drift.mean(nu - 1), w_prev=drift.at(nu - 1), w_exit=drift.at(nu))


def delta_lst(theta, delta_mean):
    """Spacing transform ``E[exp(-theta * Delta)] = 1 / (1 + delta * theta)``."""
    return 1.0 / (1.0 + delta_mean * theta)


def delta0_lst(theta, delta0_mean):
    return 1.0 / (1.0 + delta0_mean * theta)


class GammaKind(str, enum.Enum):
    INITIAL = "initial"
    EXIT = "exit"
    PREV = "prev"
    AVERAGE = "average"


def _slope_and_mean(kind: GammaKind, params: LstParams):
    kind = GammaKind(kind)
    if kind is GammaKind.INITIAL:
        return params.a0, params.delta0_mean
    if kind is GammaKind.EXIT:
        return params.w_exit, params.delta_mean
    if kind is GammaKind.PREV:
        return params.w_prev, params.delta_mean
    return params.w_bar, params.delta_mean


def gamma_fn(kind, omega, x, params: LstParams):
    """Joint increment/spacing transform of the requested kind.

    ``(1 + d * (sigma**2/2 * omega**2 + w * omega + x))**-1`` where ``(w, d)``
    is ``(a0, delta0)`` for INITIAL and ``(w_exit | w_prev | w_bar, delta)``
    otherwise.
    """
    w, d = _slope_and_mean(kind, params)
    den = 1.0 + d * (0.5 * params.sigma ** 2 * omega ** 2 + w * omega + x)
    if abs(den) <= POLE_GUARD:
        raise PoleHit(f"gamma_{GammaKind(kind).value} has a pole at omega={omega}, x={x}")
    return 1.0 / den


@dataclass(frozen=True)
class PsiComponents:
    g0: float
    g1: float
    d: float
    d0: float
    d2: float


def psi_components(x, u, params: LstParams) -> PsiComponents:
    q = 0.5 * params.sigma ** 2 * u ** 2
    dm, d0m = params.delta_mean, params.delta0_mean
    return PsiComponents(
        g0=d0m * x / (d0m * x + 1.0),
        g1=dm * x / (dm * x + 1.0),
        d=dm * (q + params.w_bar * u + x),
        d0=d0m * (q + params.a0 * u + x),
        d2=dm * (q + params.w_prev * u + x),
    )


def psi_factored(x, u, params: LstParams):
    """Product form ``G0 + G1/2 * (1+D)**2 / ((2D+1)(1+D0)(1+D2))``."""
    c = psi_components(x, u, params)
    den = (2 * c.d + 1) * (1 + c.d0) * (1 + c.d2)
    if abs(den) <= POLE_GUARD:
        raise PoleHit(f"psi has a pole at x={x}, u={u}")
    return c.g0 + 0.5 * c.g1 * (1 + c.d) ** 2 / den


def psi_gamma_form(x, u, params: LstParams):
    """The same transform assembled from the gamma functions."""
    g0_0 = gamma_fn(GammaKind.INITIAL, 0.0, x, params)
    g0_u = gamma_fn(GammaKind.INITIAL, u, x, params)
    gp = gamma_fn(GammaKind.PREV, u, x, params)
    ge = gamma_fn(GammaKind.EXIT, 0.0, x, params)
    gh = gamma_fn(GammaKind.AVERAGE, u, x, params)
    quad = gh * gh - 2.0 * gh
    if abs(quad) <= POLE_GUARD:
        raise PoleHit(f"psi has a pole at x={x}, u={u}")
    return (1.0 - g0_0) - 0.5 * g0_u * gp * (1.0 - ge) / quad


def psi_transform(x, u, params: LstParams):
    """Transform (in ``x``) of the horizon-indexed ``E[exp(-u A_{nu-1})]``."""
    if x <= 0:
        raise ValueError("x must be positive")
    if u < 0:
        raise ValueError("u must be non-negative")
    return psi_factored(x, u, params)


def _psi_parts(u, params: LstParams):
    dm, d0m = params.delta_mean, params.delta0_mean
    q = 0.5 * params.sigma ** 2 * u ** 2
    c = q + params.w_bar * u
    c0 = q + params.a0 * u
    c2 = q + params.w_prev * u
    r_d = -c - 1.0 / dm
    r_2d = -c - 0.5 / dm
    r_g1 = -1.0 / dm
    r_d2 = -c2 - 1.0 / dm
    num = np.polynomial.polynomial.polyfromroots([0.0, r_d, r_d])
    if d0m > 0:
        g0 = RationalFn.from_factors(1.0, [0.0, 1.0], [(-1.0 / d0m, 1)])
        t1 = RationalFn.from_factors(1.0 / (4.0 * d0m), num,
                                     [(r_g1, 1), (r_2d, 1), (-c0 - 1.0 / d0m, 1), (r_d2, 1)])
    else:
        g0 = RationalFn.constant(0.0)
        t1 = RationalFn.from_factors(0.25, num, [(r_g1, 1), (r_2d, 1), (r_d2, 1)])
    return g0, t1


def psi_rational(u, params: LstParams) -> RationalFn:
    """``psi_transform(., u)`` as an exact rational function of ``x``."""
    g0, t1 = _psi_parts(u, params)
    return g0 + t1


def d_du_psi_rational(params: LstParams) -> RationalFn:
    """``-d/du psi(x, u)`` at ``u = 0`` as a rational function of ``x``.

    At the origin ``R = (1+D)^2/((2D+1)(1+D0)(1+D2))`` collapses to
    ``(1+dx)/((1+2dx)(1+d0 x))`` and

        -dPsi/du = -(G1/2) R [ (2 w_bar - w_prev) d/(1+dx)
                               - 2 d w_bar/(1+2dx) - d0 a0/(1+d0 x) ].
    """
    dm, d0m = params.delta_mean, params.delta0_mean
    a = -0.5 / dm
    c1 = -1.0 / dm
    x_poly = [0.0, 1.0]
    if d0m > 0:
        b = -1.0 / d0m
        pre_scale = -1.0 / (4.0 * d0m)
        pre = [(a, 1), (b, 1)]
    else:
        pre_scale = -0.25
        pre = [(a, 1)]
    total = RationalFn.from_factors(pre_scale * (2 * params.w_bar - params.w_prev),
                                    x_poly, pre + [(c1, 1)])
    total = total + RationalFn.from_factors(-pre_scale * params.w_bar, x_poly, pre + [(a, 1)])
    if d0m > 0:
        total = total + RationalFn.from_factors(-pre_scale * params.a0, x_poly, pre + [(b, 1)])
    return total
