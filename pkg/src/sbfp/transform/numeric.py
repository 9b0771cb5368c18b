"""Gaver-Stehfest inversion of the Laplace-Carson operator.

    f(h) ~ sum_{k=1}^{N} V_k g(k ln2 / h) / k

since the Laplace transform being inverted is ``g(x) / x``.  In double
precision the weights ``V_k`` grow like ``10**(N/2)`` and cancellation caps
useful orders at about 14-18; passing ``precision`` (decimal digits) runs
the sum in mpmath so higher orders become usable, provided ``g`` accepts
mpmath numbers.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import mpmath

from ..errors import Divergent

# relative disagreement between orders N-2 and N that counts as divergence
STABILITY_TOL = 0.1


@lru_cache(maxsize=None)
def stehfest_weights(order: int) -> tuple:
    """Exact Stehfest weights ``V_1..V_N`` as fractions."""
    if order < 2 or order % 2:
        raise ValueError("order must be an even integer >= 2")
    half = order // 2
    out = []
    for k in range(1, order + 1):
        s = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            s += Fraction(
                j ** half * math.factorial(2 * j),
                math.factorial(half - j) * math.factorial(j) * math.factorial(j - 1)
                * math.factorial(k - j) * math.factorial(2 * j - k),
            )
        out.append((-1) ** (k + half) * s)
    return tuple(out)


def _nodes(g, h, order, precision):
    """``g`` at the Stehfest nodes ``k ln2 / h``; shared by every order <= ``order``."""
    if precision is None:
        ln2 = math.log(2.0)
        return [g(k * ln2 / h) for k in range(1, order + 1)]
    with mpmath.workdps(precision):
        ln2 = mpmath.log(2)
        hh = mpmath.mpf(h)
        return [g(k * ln2 / hh) for k in range(1, order + 1)]


def _gs_sum(values, order, precision):
    weights = stehfest_weights(order)
    if precision is None:
        return math.fsum(float(v) * values[k - 1] / k for k, v in enumerate(weights, 1))
    with mpmath.workdps(precision):
        total = mpmath.fsum(mpmath.mpf(v.numerator) / v.denominator * values[k - 1] / k
                            for k, v in enumerate(weights, 1))
        return float(total)


def lc_inverse_numeric(g, h: float, order: int = 14, precision=None) -> float:
    """Invert the Laplace-Carson transform ``g`` at ``h > 0``.

    Parameters
    ----------
    g : callable
        Transform evaluated on the positive real axis.
    h : float
        Horizon, strictly positive.
    order : int
        Even number of Stehfest terms.
    precision : int, optional
        Decimal digits for an mpmath evaluation; ``None`` uses floats.

    Raises
    ------
    Divergent
        If the order-N and order-(N-2) estimates disagree by more than
        ``STABILITY_TOL`` relative (with a 1e-6 absolute floor) or are not
        finite.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    values = _nodes(g, h, order, precision)
    f = _gs_sum(values, order, precision)
    if order >= 4:
        f_lo = _gs_sum(values, order - 2, precision)
        if not (math.isfinite(f) and math.isfinite(f_lo)) or \
                abs(f - f_lo) > STABILITY_TOL * max(abs(f), abs(f_lo)) + 1e-6:
            raise Divergent(f"Gaver-Stehfest estimates {f_lo!r} (N={order - 2}) and "
                            f"{f!r} (N={order}) disagree at h={h}")
    elif not math.isfinite(f):
        raise Divergent(f"non-finite Gaver-Stehfest estimate at h={h}")
    return f


ADAPTIVE_ORDERS = (16, 24, 32, 48, 64, 96, 128, 192, 256, 320, 400)


def digits_for(order: int) -> int:
    """Working precision that keeps the order-``order`` weight cancellation exact."""
    return int(1.2 * order) + 20


def lc_inverse_adaptive(g, h: float, rtol: float = 1e-8, orders=ADAPTIVE_ORDERS) -> float:
    """Gaver-Stehfest in mpmath with the order raised until it settles.

    Consecutive orders from ``orders`` are tried at :func:`digits_for`
    precision; the first estimate within ``rtol`` of its predecessor is
    returned.  Rapidly decaying targets (``f(h) ~ exp(-c h)`` with large
    ``c h``) need the higher orders.  ``g`` must accept mpmath numbers.

    Raises :class:`Divergent` if no two consecutive orders agree.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    prev = None
    for order in orders:
        dps = digits_for(order)
        f = _gs_sum(_nodes(g, h, order, dps), order, dps)
        if prev is not None and math.isfinite(f) and abs(f - prev) <= rtol * abs(f):
            return f
        prev = f
    raise Divergent(f"Gaver-Stehfest did not settle by order {orders[-1]} at h={h}")
