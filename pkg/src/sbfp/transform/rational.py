"""Rational functions of the transform variable and their exact inversion.

In the memoryless case every transform is a ratio of polynomials in ``x``
whose denominator factors into known linear terms.  A :class:`RationalFn`
keeps the coefficient form (ascending powers) and, when the construction
knows them, the exact poles.  Inversion of the Laplace-Carson operator,

    f(h) = L^{-1}{ g(x) / x }(h),

goes through partial fractions and yields an :class:`ExpPoly`, a finite sum
of ``c * h**k / k! * exp(r h)`` terms that can be evaluated and
differentiated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import expm

from ..errors import IllConditioned, PoleHit

MERGE_TOL = 1e-8
POLE_GUARD = 1e-10
# distinct eigenvalue clusters closer than this (relative) are split repeated roots
CLUSTER_TOL = 1e-4


def _rel_close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def merge_poles(poles: Iterable, tol: float = MERGE_TOL, combine: str = "sum"):
    """Group ``(root, multiplicity)`` pairs whose roots agree within ``tol``.

    ``combine="sum"`` adds multiplicities (product of factors), ``"max"``
    keeps the largest (least common multiple).  Each group is represented
    by the multiplicity-weighted mean of its members.
    """
    groups = []
    for r, m in poles:
        for g in groups:
            if _rel_close(g["rep"], r, tol):
                g["members"].append((r, m))
                g["m"] = g["m"] + m if combine == "sum" else max(g["m"], m)
                w = sum(mm for _, mm in g["members"])
                g["rep"] = sum(rr * mm for rr, mm in g["members"]) / w
                break
        else:
            groups.append({"rep": r, "m": m, "members": [(r, m)]})
    out = []
    for g in groups:
        rep = g["rep"]
        if isinstance(rep, complex) and abs(rep.imag) <= MERGE_TOL * max(1.0, abs(rep.real)):
            rep = rep.real
        out.append((rep, g["m"]))
    return tuple(out)


def _trim(c):
    c = np.atleast_1d(np.asarray(c))
    nz = np.nonzero(c)[0]
    if len(nz) == 0:
        return c[:1] * 0
    return c[: nz[-1] + 1]


def _from_roots(poles):
    roots = [r for r, m in poles for _ in range(m)]
    if not roots:
        return np.array([1.0])
    c = P.polyfromroots(roots)
    if np.iscomplexobj(c) and np.allclose(c.imag, 0.0, atol=1e-13 * max(1.0, np.abs(c).max())):
        c = c.real
    return c


def _horner(coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + (float(c) if not isinstance(c, complex) else c)
    return acc


@dataclass(frozen=True)
class RationalFn:
    """``numerator(x) / denominator(x)``, coefficients in ascending powers.

    The denominator is normalized to be monic.  ``poles`` lists exact
    ``(root, multiplicity)`` pairs of the denominator when known; otherwise
    roots are found from the companion matrix on demand.
    """

    numerator: np.ndarray
    denominator: np.ndarray
    poles: Optional[tuple] = None

    def __post_init__(self):
        num = _trim(np.asarray(self.numerator, dtype=float))
        den = _trim(np.asarray(self.denominator, dtype=float))
        if not np.any(den):
            raise ValueError("denominator must be non-zero")
        lead = den[-1]
        object.__setattr__(self, "numerator", num / lead)
        object.__setattr__(self, "denominator", den / lead)
        if self.poles is not None:
            object.__setattr__(self, "poles", tuple(self.poles))

    @classmethod
    def from_factors(cls, scale: float, numerator: Sequence[float], poles) -> "RationalFn":
        """``scale * numerator(x) / prod (x - r)**m`` over ``poles``."""
        poles = merge_poles(poles)
        return cls(scale * np.asarray(numerator, dtype=float), _from_roots(poles), poles)

    @classmethod
    def constant(cls, c: float) -> "RationalFn":
        return cls([c], [1.0], ())

    @property
    def num_degree(self) -> int:
        return len(self.numerator) - 1 if np.any(self.numerator) else -1

    @property
    def den_degree(self) -> int:
        return len(self.denominator) - 1

    @property
    def proper(self) -> bool:
        return self.num_degree <= self.den_degree

    def roots(self):
        """Denominator roots as merged ``(root, multiplicity)`` pairs."""
        if self.poles is not None:
            return self.poles
        if self.den_degree == 0:
            return ()
        raw = P.polyroots(self.denominator)
        return merge_poles([(complex(r), 1) for r in raw])

    def __call__(self, x):
        for r, _ in self.roots():
            if abs(x - r) <= POLE_GUARD * max(1.0, abs(r)):
                raise PoleHit(f"x={x!r} is within guard distance of pole {r!r}")
        return _horner(self.numerator, x) / _horner(self.denominator, x)

    def __neg__(self):
        return RationalFn(-self.numerator, self.denominator, self.poles)

    def scaled(self, c: float) -> "RationalFn":
        return RationalFn(c * self.numerator, self.denominator, self.poles)

    def __add__(self, other: "RationalFn") -> "RationalFn":
        if self.poles is None or other.poles is None:
            num = P.polyadd(P.polymul(self.numerator, other.denominator),
                            P.polymul(other.numerator, self.denominator))
            return RationalFn(num, P.polymul(self.denominator, other.denominator))
        lcm = merge_poles(list(self.poles) + list(other.poles), combine="max")

        def cofactor(own):
            rest = []
            for r, m in lcm:
                mine = sum(mm for rr, mm in own if _rel_close(rr, r, MERGE_TOL))
                if m - mine > 0:
                    rest.append((r, m - mine))
            return _from_roots(rest)

        num = P.polyadd(P.polymul(self.numerator, cofactor(self.poles)),
                        P.polymul(other.numerator, cofactor(other.poles)))
        return RationalFn(num, _from_roots(lcm), lcm)

    def __sub__(self, other):
        return self + (-other)


def _taylor_shift(coeffs, r):
    """Coefficients of ``p(r + t)`` in powers of ``t``."""
    coeffs = np.asarray(coeffs, dtype=complex if isinstance(r, complex) else float)
    n = len(coeffs)
    out = np.array(coeffs, dtype=coeffs.dtype)
    # repeated synthetic division
    for i in range(n):
        for j in range(n - 2, i - 1, -1):
            out[j] += r * out[j + 1]
    return out


def _series_div(num, den, order):
    """First ``order`` Taylor coefficients of ``num(t) / den(t)`` (den[0] != 0)."""
    num = np.concatenate([num, np.zeros(max(0, order - len(num)))])
    den = np.concatenate([den, np.zeros(max(0, order - len(den)))])
    q = np.zeros(order, dtype=np.result_type(num, den))
    for k in range(order):
        q[k] = (num[k] - np.dot(q[:k], den[k:0:-1])) / den[0]
    return q


def partial_fractions(numerator, poles):
    """Residue coefficients of ``numerator(x) / prod (x - r)**m``.

    Returns ``[(r, [a_1, ..., a_m])]`` with ``a_j`` the coefficient of
    ``1/(x - r)**j``.  Requires a strictly proper ratio.
    """
    out = []
    for i, (r, m) in enumerate(poles):
        others = [(rr - r, mm) for j, (rr, mm) in enumerate(poles) if j != i]
        # denominator cofactor in powers of t = x - r
        q_shift = _from_roots(others)
        if np.iscomplexobj(q_shift) or isinstance(r, complex):
            q_shift = np.asarray(q_shift, dtype=complex)
        n_shift = _taylor_shift(numerator, r)
        series = _series_div(n_shift, q_shift, m)
        # numerator/(t^m q(t)) = sum series[k] t^(k-m)
        out.append((r, [series[m - j] for j in range(1, m + 1)]))
    return out


@dataclass(frozen=True)
class ExpPoly:
    """``f(h) = Re sum_r exp(r h) * sum_k c[r][k] * h**k / k!``."""

    terms: tuple

    def __call__(self, h):
        h_arr = np.asarray(h, dtype=float)
        total = np.zeros(h_arr.shape, dtype=complex)
        for r, coeffs in self.terms:
            poly = np.zeros(h_arr.shape, dtype=complex)
            for k, c in enumerate(coeffs):
                poly = poly + c * h_arr ** k / math.factorial(k)
            total = total + np.exp(r * h_arr) * poly
        out = total.real
        return float(out) if out.ndim == 0 else out

    def derivative(self) -> "ExpPoly":
        new = []
        for r, coeffs in self.terms:
            m = len(coeffs)
            # d/dh [h^k/k!] = h^(k-1)/(k-1)!
            d = [r * coeffs[k] + (coeffs[k + 1] if k + 1 < m else 0.0) for k in range(m)]
            new.append((r, d))
        return ExpPoly(tuple(new))

    @property
    def rates(self):
        return [r for r, _ in self.terms]


def _check_clusters(poles, exact):
    if exact:
        return
    for i in range(len(poles)):
        for j in range(i + 1, len(poles)):
            if _rel_close(poles[i][0], poles[j][0], CLUSTER_TOL):
                raise IllConditioned(
                    f"denominator roots {poles[i][0]!r} and {poles[j][0]!r} cluster; "
                    "use lc_inverse_numeric instead")


def lc_inverse_expsum(g: RationalFn) -> ExpPoly:
    """Closed-form inverse Laplace-Carson transform of a proper ``g``."""
    if not g.proper:
        raise ValueError("transform must be proper (deg num <= deg den)")
    poles = list(g.roots())
    _check_clusters(poles, exact=g.poles is not None)
    # divide by x: add a simple pole at the origin
    poles = list(merge_poles(poles + [(0.0, 1)]))
    # 1/(x-r)^j  <->  h^(j-1)/(j-1)! e^{rh}
    return ExpPoly(tuple((r, list(c)) for r, c in partial_fractions(g.numerator, poles)))


def lc_inverse_rational(g: RationalFn, h):
    """Evaluate the inverse Laplace-Carson transform of ``g`` at ``h >= 0``."""
    if np.any(np.asarray(h) < 0):
        raise ValueError("h must be non-negative")
    return lc_inverse_expsum(g)(h)


def lc_inverse_factored(scale: float, numerator, poles, h: float) -> float:
    """Inverse Laplace-Carson transform of ``scale * N(x) / prod(x - r_i)``.

    Uses the confluent divided-difference identity
    ``L^{-1}{N(x)/prod(x - r_i)}(h) = (N(r) e^{rh})[r_1, ..., r_n]`` evaluated
    as the corner entry of a matrix function of a bidiagonal matrix, which
    stays accurate when poles nearly coincide.
    """
    nodes = [r for r, m in poles for _ in range(m)] + [0.0]
    n = len(nodes)
    num = np.asarray(numerator, dtype=float)
    if len(num) > n:
        raise ValueError("transform must be proper")
    J = np.diag(np.asarray(nodes, dtype=complex if any(isinstance(r, complex) for r in nodes) else float))
    J = J + np.diag(np.ones(n - 1), 1)
    E = expm(h * J)
    NJ = np.zeros_like(J)
    for c in reversed(num):
        NJ = NJ @ J + c * np.eye(n)
    val = (NJ[0] @ E[:, n - 1]) * scale
    return float(np.real(val))
