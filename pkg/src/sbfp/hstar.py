"""Optimal turning-point moment ``h*``.

Two independent routes:

* paper mode solves the closed-form transcendental equation
  ``A exp(h / (2 delta)) = (U - h) / (h - V)`` for memoryless observation;
* direct mode inverts ``-dPsi/du`` at ``u = 0`` into the explicit curve
  ``m(h) = E[A_{nu-1}; h]`` and finds its first stationary point.

The two are not expected to coincide (paper mode ignores ``a0`` and
``delta0``); :func:`compare_modes` tabulates both.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import DegenerateDrift, NoRootInBracket, NoStationaryPoint, SbfpError
from .transform.functional import a_prev_curve
from .transform.lst import LstParams

PAPER_GRID = 512
DIRECT_GRID = 4096
POLE_CLEARANCE = 1e-8
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class HstarProblem:
    delta_mean: float
    w_bar: float
    w_prev: float
    a0: float = 0.0
    delta0_mean: Optional[float] = None

    def __post_init__(self):
        if not self.delta_mean > 0:
            raise ValueError("delta_mean must be positive")
        if self.delta0_mean is None:
            object.__setattr__(self, "delta0_mean", self.delta_mean)

    def lst_params(self, sigma: float = 0.0, w_exit: Optional[float] = None) -> LstParams:
        """Transform parameters for direct mode (sigma does not enter ``m``)."""
        return LstParams(self.delta_mean, self.delta0_mean, sigma, self.a0,
                         self.w_bar, self.w_prev,
                         self.w_prev if w_exit is None else w_exit)


@dataclass(frozen=True)
class UvaConstants:
    u_const: float
    v_const: float
    a_const: float


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    lower: float
    upper: float


@dataclass(frozen=True)
class HstarResult:
    h_star: float
    residual: float
    mode: str
    bracket: tuple
    feasible: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bracket"] = list(self.bracket)
        d["status"] = "ok"
        return d


def uva_constants(p: HstarProblem) -> UvaConstants:
    """Constants of the closed-form equation.

    U = ((2+d) w_prev - (3+d) w_bar) / (w_bar - w_prev)
    V = ((3+2d) w_bar - 2 w_prev) / w_bar
    A = w_bar / (2 (w_prev - w_bar))

    Evaluated in exact rational arithmetic on the inputs' shortest decimal
    representations and rounded once, so decimal inputs such as 1.4 give
    correctly rounded constants.
    """
    d, wb, wp = (Fraction(repr(float(v))) for v in (p.delta_mean, p.w_bar, p.w_prev))
    if wb == wp:
        raise DegenerateDrift("w_bar equals w_prev")
    if wb == 0:
        raise DegenerateDrift("w_bar is zero")
    return UvaConstants(
        u_const=float(((2 + d) * wp - (3 + d) * wb) / (wb - wp)),
        v_const=float(((3 + 2 * d) * wb - 2 * wp) / wb),
        a_const=float(wb / (2 * (wp - wb))),
    )


def feasibility(p: HstarProblem) -> Feasibility:
    """Turning-point condition ``(3+d)/(2+d) w_bar <= w_prev <= (3+2d)/2 w_bar``."""
    d = p.delta_mean
    lo = (3 + d) / (2 + d) * p.w_bar
    hi = (3 + 2 * d) / 2 * p.w_bar
    return Feasibility(bool(lo <= p.w_prev <= hi), lo, hi)


def paper_residual(p: HstarProblem, consts: Optional[UvaConstants] = None) -> Callable:
    """``g(h) = A exp(h/(2d)) - (U - h)/(h - V)``."""
    c = consts or uva_constants(p)
    d = p.delta_mean

    def g(h):
        return c.a_const * np.exp(h / (2 * d)) - (c.u_const - h) / (h - c.v_const)

    return g


def bisect(fn: Callable, a: float, b: float, fa: Optional[float] = None,
           xtol: float = 0.0, max_iter: int = 200) -> float:
    """Bisection on a sign-changing bracket down to floating-point resolution."""
    fa = fn(a) if fa is None else fa
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b or (b - a) <= xtol:
            break
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    return a if abs(fa) <= abs(fn(b)) else b


def _sign_brackets(grid, vals):
    out = []
    for i in range(len(grid) - 1):
        if vals[i] == 0:
            out.append((grid[i], grid[i]))
        elif np.sign(vals[i]) != np.sign(vals[i + 1]) and vals[i + 1] != 0:
            out.append((grid[i], grid[i + 1]))
    return out


def _scan_interval(p: HstarProblem, v: float):
    # for v <= 0 the pole lies outside the fallback interval
    return (0.0, v) if v > 0 else (0.0, 20.0 * p.delta_mean)


def solve_paper(p: HstarProblem, tol: float = DEFAULT_TOL) -> HstarResult:
    """Smallest positive root of the closed-form turning-point equation.

    Scans a 512-point grid on ``(0, V)`` (or ``(0, 20 d)`` when ``V <= 0``),
    refines every sign change by bisection and keeps the roots whose
    residual is below ``tol``.
    """
    consts = uva_constants(p)
    g = paper_residual(p, consts)
    feas = feasibility(p)
    bracket = _scan_interval(p, consts.v_const)
    grid = np.linspace(*bracket, PAPER_GRID + 2)[1:-1]
    grid = grid[np.abs(grid - consts.v_const) > POLE_CLEARANCE]
    vals = g(grid)
    k = int(np.argmin(np.abs(vals)))
    grid_min = (float(abs(vals[k])), float(grid[k]))
    roots = []
    for a, b in _sign_brackets(grid, vals):
        r = a if a == b else bisect(lambda h: float(g(h)), a, b)
        if abs(g(r)) < tol:
            roots.append(float(r))
    diag = {"roots": roots, "grid_min_abs_g": grid_min[0], "grid_min_at": grid_min[1],
            "U": consts.u_const, "V": consts.v_const, "A": consts.a_const}
    if not roots:
        raise NoRootInBracket(
            f"no sign change of g on {bracket}; min |g| = {grid_min[0]:.3g} at h = {grid_min[1]}",
            diag)
    h = min(roots)
    return HstarResult(h, float(abs(g(h))), "paper", bracket, feas.feasible, diag)


def solve_direct(p: HstarProblem, params: Optional[LstParams] = None,
                 tol: float = 1e-12) -> HstarResult:
    """First stationary point of ``m(h) = E[A_{nu-1}; h]`` on ``(0, 50 d)``.

    ``m`` is the exact inverse of ``-dPsi/du`` at ``u = 0``; its derivative
    is taken term by term and its sign changes are refined by bisection.
    ``tol`` is the relative bracket width at which bisection stops.
    """
    params = params or p.lst_params()
    if (params.delta_mean, params.w_bar, params.w_prev) != (p.delta_mean, p.w_bar, p.w_prev):
        raise ValueError("params disagree with the problem's delta_mean, w_bar, w_prev")
    m = a_prev_curve(params)
    dm = m.derivative()
    d2m = dm.derivative()
    bracket = (0.0, 50.0 * p.delta_mean)
    grid = np.linspace(*bracket, DIRECT_GRID + 1)[1:]
    vals = dm(grid)
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0:
        raise NoStationaryPoint("m(h) is constant on the search interval",
                                {"stationary_points": [], "max_abs_dm": 0.0})
    points = []
    for a, b in _sign_brackets(grid, vals):
        r = a if a == b else bisect(lambda h: float(dm(h)), a, b, xtol=tol * b)
        curv = float(d2m(r))
        points.append({"h": float(r), "m": float(m(r)), "dm": float(dm(r)),
                       "kind": "maximum" if curv < 0 else "minimum" if curv > 0 else "flat"})
    diag = {"stationary_points": points, "max_abs_dm": scale}
    if not points:
        raise NoStationaryPoint(f"m'(h) has no sign change on {bracket}", diag)
    first = points[0]
    diag["kind"] = first["kind"]
    feas = feasibility(p)
    return HstarResult(first["h"], abs(first["dm"]), "direct", bracket, feas.feasible, diag)


def failure_record(exc: Exception, status: str = "failed") -> dict:
    rec = {"status": status, "reason": str(exc), "error": type(exc).__name__}
    diag = getattr(exc, "diagnostics", None)
    if diag:
        rec["diagnostics"] = diag
    return rec


def compare_modes(problems: Iterable[HstarProblem], tol: float = DEFAULT_TOL) -> list:
    """Paper vs direct ``h*`` for each problem; failures are embedded per row."""
    rows = []
    for p in problems:
        row = {"delta_mean": p.delta_mean, "w_bar": p.w_bar, "w_prev": p.w_prev,
               "a0": p.a0, "delta0_mean": p.delta0_mean,
               "feasible": feasibility(p).feasible}
        for name, solve in (("paper", lambda q: solve_paper(q, tol)), ("direct", solve_direct)):
            try:
                res = solve(p)
                row[name] = {"status": "ok", "h_star": res.h_star, "residual": res.residual}
            except SbfpError as exc:
                row[name] = failure_record(exc)
        if row["paper"]["status"] == "ok" and row["direct"]["status"] == "ok":
            row["difference"] = abs(row["paper"]["h_star"] - row["direct"]["h_star"])
        else:
            row["difference"] = None
        rows.append(row)
    return rows


def plot_data(p: HstarProblem, n: int = 200, h_max: Optional[float] = None):
    """Rows ``(h, m(h), g(h))`` for external plotting; ``g`` is NaN when undefined."""
    m = a_prev_curve(p.lst_params())
    h_max = h_max or 10.0 * p.delta_mean
    hs = np.linspace(h_max / n, h_max, n)
    try:
        g = paper_residual(p)
        ok = np.abs(hs - uva_constants(p).v_const) > POLE_CLEARANCE
        gv = np.full(n, np.nan)
        gv[ok] = g(hs[ok])
    except DegenerateDrift:
        gv = np.full(n, np.nan)
    return [(float(h), float(mv), float(gg)) for h, mv, gg in zip(hs, m(hs), gv)]
