"""Two-player 2x2 decision game: controller (Hold/Action) against nature (Up/Down).

Entry ``[i][j]`` of each payoff matrix is that player's payoff when the
controller plays row ``i`` and nature plays column ``j``.  ``p`` is the
probability of "Hold" and ``q`` the probability of "Up".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

ROW_LABELS = ("Hold", "Action")
COL_LABELS = ("Up", "Down")


@dataclass(frozen=True)
class Game2x2:
    payoff1: np.ndarray
    payoff2: np.ndarray
    row_labels: tuple = ROW_LABELS
    col_labels: tuple = COL_LABELS

    def __post_init__(self):
        a = np.array(self.payoff1, dtype=float)
        b = np.array(self.payoff2, dtype=float)
        if a.shape != (2, 2) or b.shape != (2, 2):
            raise ValueError("payoff matrices must be 2x2")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("payoffs must be finite")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "payoff1", a)
        object.__setattr__(self, "payoff2", b)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))

    @classmethod
    def from_dict(cls, d: Mapping) -> "Game2x2":
        return cls(d["payoff1"], d["payoff2"],
                   tuple(d.get("row_labels", ROW_LABELS)),
                   tuple(d.get("col_labels", COL_LABELS)))

    def to_dict(self) -> dict:
        return {"row_labels": list(self.row_labels), "col_labels": list(self.col_labels),
                "payoff1": self.payoff1.tolist(), "payoff2": self.payoff2.tolist()}


def load_game(path) -> Game2x2:
    with open(path, encoding="utf-8") as fh:
        return Game2x2.from_dict(json.load(fh))


@dataclass(frozen=True)
class MixedEquilibrium:
    p: float
    q: float
    value1: float
    value2: float
    kind: str  # "interior" | "pure" | "continuum"

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "value1": self.value1,
                "value2": self.value2, "kind": self.kind}


def expected_payoff(g: Game2x2, p: float, q: float):
    """Expected payoffs ``(value1, value2)`` under the mixed profile ``(p, q)``."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("p and q must lie in [0, 1]")
    rows = np.array([p, 1.0 - p])
    cols = np.array([q, 1.0 - q])
    return float(rows @ g.payoff1 @ cols), float(rows @ g.payoff2 @ cols)


def _p1_advantage(g: Game2x2):
    """Hold-minus-Action payoff for player 1 as ``alpha * q + beta``."""
    a = g.payoff1
    beta = a[0, 1] - a[1, 1]
    alpha = (a[0, 0] - a[1, 0]) - beta
    return alpha, beta


def _p2_advantage(g: Game2x2):
    """Up-minus-Down payoff for player 2 as ``gamma * p + eta``."""
    b = g.payoff2
    eta = b[1, 0] - b[1, 1]
    gamma = (b[0, 0] - b[0, 1]) - eta
    return gamma, eta


def _best(adv: float) -> Optional[float]:
    """Pure best response (1.0 / 0.0) to an advantage, ``None`` if indifferent."""
    if adv > 0:
        return 1.0
    if adv < 0:
        return 0.0
    return None


def _pack(g, p, q, kind):
    v1, v2 = expected_payoff(g, p, q)
    return MixedEquilibrium(float(p), float(q), v1, v2, kind)


def _strict_choice(alpha, beta):
    lo, hi = beta, alpha + beta  # advantage at 0 and at 1
    if lo > 0 and hi > 0:
        return 1.0
    if lo < 0 and hi < 0:
        return 0.0
    return None


def deviation_gain(g: Game2x2, p: float, q: float) -> float:
    """Largest gain either player gets from a pure unilateral deviation."""
    v1, v2 = expected_payoff(g, p, q)
    r1 = g.payoff1 @ np.array([q, 1 - q])
    c2 = np.array([p, 1 - p]) @ g.payoff2
    return float(max(r1.max() - v1, c2.max() - v2))


def solve_mixed(g: Game2x2) -> MixedEquilibrium:
    """Mixed-strategy equilibrium of a 2x2 game.

    A strictly dominant strategy fixes that player's choice and the other
    best-responds.  Otherwise each mix solves the opponent's indifference
    condition; if that is impossible a pure equilibrium is enumerated.  A
    player who is indifferent everywhere yields kind ``"continuum"`` with
    the representative mix 0.5.
    """
    alpha, beta = _p1_advantage(g)
    gamma, eta = _p2_advantage(g)
    p_dom = _strict_choice(alpha, beta)
    q_dom = _strict_choice(gamma, eta)

    if p_dom is not None:
        q = q_dom if q_dom is not None else _best(gamma * p_dom + eta)
        if q is None:
            return _pack(g, p_dom, 0.5, "continuum")
        return _pack(g, p_dom, q, "pure")
    if q_dom is not None:
        p = _best(alpha * q_dom + beta)
        if p is None:
            return _pack(g, 0.5, q_dom, "continuum")
        return _pack(g, p, q_dom, "pure")

    flat1 = alpha == 0 and beta == 0
    flat2 = gamma == 0 and eta == 0
    if flat1 or flat2:
        if flat1 and flat2:
            return _pack(g, 0.5, 0.5, "continuum")
        if flat1:
            # nature's own indifference mix, else its best response to p = 0.5
            q = _best(gamma * 0.5 + eta)
            return _pack(g, 0.5, 0.5 if q is None else q, "continuum")
        p = _best(alpha * 0.5 + beta)
        return _pack(g, 0.5 if p is None else p, 0.5, "continuum")

    if alpha != 0 and gamma != 0:
        q = -beta / alpha
        p = -eta / gamma
        if 0.0 <= p <= 1.0 and 0.0 <= q <= 1.0:
            return _pack(g, p, q, "interior")

    for p in (1.0, 0.0):
        for q in (1.0, 0.0):
            if deviation_gain(g, p, q) <= 0.0:
                return _pack(g, p, q, "pure")
    raise AssertionError("a 2x2 game always has an equilibrium")


@dataclass(frozen=True)
class GridEquilibrium:
    p: float
    q: float
    gain: float
    candidates: tuple = field(default=())


def _gain_grid(g: Game2x2, ps: np.ndarray, qs: np.ndarray) -> np.ndarray:
    """Largest unilateral deviation gain on the product grid ``ps x qs``."""
    P, Q = np.meshgrid(ps, qs, indexing="ij")
    a, b = g.payoff1, g.payoff2
    hold = a[0, 0] * Q + a[0, 1] * (1 - Q)
    act = a[1, 0] * Q + a[1, 1] * (1 - Q)
    v1 = P * hold + (1 - P) * act
    up = b[0, 0] * P + b[1, 0] * (1 - P)
    down = b[0, 1] * P + b[1, 1] * (1 - P)
    v2 = Q * up + (1 - Q) * down
    gain = np.maximum(np.maximum(hold, act) - v1, np.maximum(up, down) - v2)
    return np.maximum(gain, 0.0)


def _zoom(g: Game2x2, p: float, q: float, step: float, levels: int, width: int = 4,
          points: int = 41) -> tuple:
    # rescan a shrinking window around (p, q) with the same objective
    for _ in range(levels):
        ps = np.clip(np.linspace(p - width * step, p + width * step, points), 0.0, 1.0)
        qs = np.clip(np.linspace(q - width * step, q + width * step, points), 0.0, 1.0)
        gain = _gain_grid(g, ps, qs)
        i, j = np.unravel_index(int(np.argmin(gain)), gain.shape)
        p, q = float(ps[i]), float(qs[j])
        step = 2.0 * width * step / (points - 1)
    return p, q


def brute_force(g: Game2x2, grid_n: int = 1001, refine: int = 4) -> GridEquilibrium:
    """Grid search for the profile minimising the largest deviation gain.

    ``(p, q)`` is the best grid point.  Exact ties go to the most mixed
    profile (largest distance to the boundary of the unit square).
    ``candidates`` lists every grid local minimum whose gain is within the
    grid-resolution bound, each polished by ``refine`` rounds of zoomed
    sub-grid search, so games with several equilibria, or with one player
    nearly indifferent, can be checked against all of them.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    s = np.linspace(0.0, 1.0, grid_n)
    gain = _gain_grid(g, s, s)
    best = gain == gain.min()
    edge = np.minimum(np.minimum(s, 1 - s)[:, None], np.minimum(s, 1 - s)[None, :])
    i, j = np.unravel_index(int(np.argmax(np.where(best, edge, -1.0))), gain.shape)

    spread = max(np.ptp(g.payoff1), np.ptp(g.payoff2), 1e-300)
    bound = 4.0 * spread / (grid_n - 1)
    padded = np.pad(gain, 1, constant_values=np.inf)
    is_min = np.ones_like(gain, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= gain <= padded[1 + di:1 + di + grid_n, 1 + dj:1 + dj + grid_n]
    idx = np.argwhere(is_min & (gain <= bound))
    step = 1.0 / (grid_n - 1)
    cands = tuple(_zoom(g, float(s[r]), float(s[c]), step, refine) for r, c in idx)
    return GridEquilibrium(float(s[i]), float(s[j]), float(gain[i, j]), cands)


def payoff_from_analytics(a_prev: float, a_exit: float, mean_step: float, cost: float = 0.0,
                          overrides: Optional[Mapping] = None, zero_sum: bool = False) -> Game2x2:
    """Stand-in payoff builder from turning-point analytics.

    Controller: acting locks in ``a_prev - cost`` whatever nature does;
    holding earns ``a_prev + mean_step`` if the process keeps rising and
    ``a_exit`` if it turns.  Nature's payoff is zero (or ``-payoff1`` with
    ``zero_sum``).  ``overrides`` maps ``(matrix, i, j)`` with matrix
    ``"payoff1"``/``"payoff2"`` to replacement entries.
    """
    vals = (a_prev, a_exit, mean_step, cost)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("builder inputs must be finite")
    if cost < 0:
        raise ValueError("cost must be non-negative")
    p1 = np.array([[a_prev + mean_step, a_exit],
                   [a_prev - cost, a_prev - cost]], dtype=float)
    p2 = -p1 if zero_sum else np.zeros((2, 2))
    for (name, i, j), value in (overrides or {}).items():
        if name not in ("payoff1", "payoff2"):
            raise KeyError(f"unknown matrix {name!r}")
        (p1 if name == "payoff1" else p2)[i, j] = float(value)
    return Game2x2(p1, p2)
