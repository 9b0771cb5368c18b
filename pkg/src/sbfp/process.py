"""Simulation of the shifted Brownian fluctuation process.

The process is a Brownian motion whose drift slope changes from step to step
(``w_k``) and which is only observed at the epochs of a renewal process.
Between consecutive observations the increment is Gaussian,

    W_k = w_k * Delta_k + sigma * sqrt(Delta_k) * Z_k,

which is the diffusion limit of the +/-chi random walk with
``chi**2 = sigma**2 * ds``; the walk itself is never materialised.

A path stops at its first turning point: for a concave (rising) process the
first observation whose increment falls below its threshold, for a convex one
the mirror image.  Monte Carlo replications draw from per-replication Philox
substreams so that replication ``i`` is the same no matter how the work is
split across processes.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import AllTruncated, NoExitWithinCap

DEFAULT_MAX_STEPS = 10_000
_BLOCK = 32


class Shape(str, enum.Enum):
    CONCAVE = "concave"
    CONVEX = "convex"


class ThresholdMode(str, enum.Enum):
    ZERO_SIGN = "zero"
    PAPER_LITERAL = "paper"


@dataclass(frozen=True)
class DriftSchedule:
    """Per-step drift slopes ``w_1, w_2, ...`` (value per unit time).

    ``w_0`` is never stored: the starting level is carried by ``a0``.
    Indices past the end of ``values`` either repeat the last slope
    (``"hold"``) or wrap around (``"cycle"``).
    """

    values: tuple
    extension: str = "hold"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("drift schedule must be non-empty")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("drift values must be finite")
        if self.extension not in ("hold", "cycle"):
            raise ValueError(f"unknown drift extension {self.extension!r}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, w: float) -> "DriftSchedule":
        return cls((w,))

    def at(self, k: int) -> float:
        """Slope for step ``k >= 1``."""
        if k < 1:
            raise ValueError("drift steps are indexed from 1")
        n = len(self.values)
        if k <= n:
            return self.values[k - 1]
        if self.extension == "hold":
            return self.values[-1]
        return self.values[(k - 1) % n]

    def mean(self, k: Optional[int] = None) -> float:
        """Average slope over the first ``k`` steps (whole list by default)."""
        k = len(self.values) if k is None else k
        return sum(self.at(j) for j in range(1, k + 1)) / k


@dataclass(frozen=True)
class ProcessParams:
    sigma: float
    a0: float
    drift: DriftSchedule
    shape: Shape = Shape.CONCAVE
    threshold_mode: ThresholdMode = ThresholdMode.ZERO_SIGN

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError("sigma must be finite and non-negative")
        if not math.isfinite(self.a0):
            raise ValueError("a0 must be finite")
        object.__setattr__(self, "shape", Shape(self.shape))
        object.__setattr__(self, "threshold_mode", ThresholdMode(self.threshold_mode))


@dataclass(frozen=True)
class Exponential:
    mean: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise ValueError("exponential mean must be positive")


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value > 0):
            raise ValueError("deterministic spacing must be positive")


Law = Union[Exponential, Deterministic]


@dataclass(frozen=True)
class ObservationModel:
    """Observation epochs: ``tau_0`` from ``initial_delay`` (``None`` means
    zero), then i.i.d. spacings from ``interarrival``."""

    interarrival: Law
    initial_delay: Optional[Exponential] = None

    def __post_init__(self):
        if not isinstance(self.interarrival, (Exponential, Deterministic)):
            raise TypeError("interarrival must be Exponential or Deterministic")
        if self.initial_delay is not None and not isinstance(self.initial_delay, Exponential):
            raise TypeError("initial_delay must be Exponential or None")

    @property
    def delta_mean(self) -> float:
        law = self.interarrival
        return law.mean if isinstance(law, Exponential) else law.value

    @property
    def delta0_mean(self) -> float:
        return 0.0 if self.initial_delay is None else self.initial_delay.mean

    @property
    def memoryless(self) -> bool:
        return isinstance(self.interarrival, Exponential)


@dataclass(frozen=True)
class SbfpPath:
    """Observed path.  Row 0 is the initial observation at ``tau_0``; row
    ``k >= 1`` holds the k-th spacing, position, increment and the drift slope
    used for that step."""

    k: np.ndarray
    tau: np.ndarray
    delta: np.ndarray
    a: np.ndarray
    w_inc: np.ndarray
    w_slope: np.ndarray
    truncated: bool = False

    def __len__(self):
        return len(self.k)

    @classmethod
    def from_increments(cls, increments, a0=0.0, deltas=1.0, slopes=0.0, tau0=0.0):
        """Build a path from explicit increments (mainly for tests and replays)."""
        inc = np.asarray(increments, dtype=float)
        n = len(inc)
        d = np.broadcast_to(np.asarray(deltas, dtype=float), (n,))
        w = np.broadcast_to(np.asarray(slopes, dtype=float), (n,))
        tau = np.concatenate([[tau0], tau0 + np.cumsum(d)])
        a = np.concatenate([[a0], a0 + np.cumsum(inc)])
        return cls(
            k=np.arange(n + 1),
            tau=tau,
            delta=np.concatenate([[tau0], d]),
            a=a,
            w_inc=np.concatenate([[0.0], inc]),
            w_slope=np.concatenate([[0.0], w]),
        )

    def prefix(self, n: int) -> "SbfpPath":
        """The first ``n`` post-``tau_0`` steps."""
        s = slice(0, n + 1)
        return SbfpPath(self.k[s], self.tau[s], self.delta[s], self.a[s],
                        self.w_inc[s], self.w_slope[s])


@dataclass(frozen=True)
class ExitRecord:
    nu: int
    tau_prev: float
    a_prev: float
    tau_exit: float
    a_exit: float
    condition_held: bool


def sample_interarrival(law: Law, rng: np.random.Generator) -> float:
    """One spacing from ``law``; exponential draws are strictly positive."""
    if isinstance(law, Deterministic):
        return float(law.value)
    while True:
        e = rng.standard_exponential()
        if e > 0.0:
            return float(law.mean * e)


def _crosses(w_inc: float, thr: float, shape: Shape) -> bool:
    if shape is Shape.CONCAVE:
        return w_inc < thr
    return w_inc > thr


def _holds(w_inc: float, thr: float, shape: Shape) -> bool:
    if shape is Shape.CONCAVE:
        return w_inc > thr
    return w_inc < thr


def detect_exit(path: SbfpPath, shape=Shape.CONCAVE,
                threshold_mode=ThresholdMode.ZERO_SIGN,
                thresholds: Optional[Sequence[float]] = None) -> Optional[ExitRecord]:
    """Locate the first turning point of ``path``.

    Returns ``None`` when no increment in the available path crosses its
    threshold.  In zero-sign mode the threshold is 0; in paper-literal mode
    it is the step's drift slope (or ``thresholds[k-1]`` when given).  An
    increment exactly on its threshold never triggers an exit.
    """
    shape = Shape(shape)
    mode = ThresholdMode(threshold_mode)
    if len(path) < 2:
        raise ValueError("path has no post-tau_0 entries")
    held = True
    for k in range(1, len(path)):
        if mode is ThresholdMode.ZERO_SIGN:
            thr = 0.0
        elif thresholds is not None:
            thr = float(thresholds[k - 1])
        else:
            thr = float(path.w_slope[k])
        w = float(path.w_inc[k])
        if _crosses(w, thr, shape):
            return ExitRecord(
                nu=k,
                tau_prev=float(path.tau[k - 1]),
                a_prev=float(path.a[k - 1]),
                tau_exit=float(path.tau[k]),
                a_exit=float(path.a[k]),
                condition_held=held,
            )
        held = held and _holds(w, thr, shape)
    return None


class _Draws:
    """Block-buffered exponential/normal draws from one replication stream."""

    def __init__(self, gen: np.random.Generator):
        self.gen = gen
        self._e = self._z = ()
        self._i = _BLOCK

    def next(self):
        if self._i >= _BLOCK:
            self._e = self.gen.standard_exponential(_BLOCK)
            self._z = self.gen.standard_normal(_BLOCK)
            self._i = 0
        i = self._i
        self._i += 1
        return self._e[i], self._z[i]


def _spacing(law: Law, e: float) -> float:
    if isinstance(law, Deterministic):
        return law.value
    # a zero exponential draw has probability ~2**-53; keep the clock strict
    return law.mean * e if e > 0.0 else law.mean * 2.0 ** -53


def _initial_delay(obs: ObservationModel, gen: np.random.Generator) -> float:
    if obs.initial_delay is None:
        return 0.0
    return sample_interarrival(obs.initial_delay, gen)


def _run(params: ProcessParams, obs: ObservationModel, gen, max_steps: int,
         record: bool, stop_at_exit: bool = True):
    """Core stepping loop.  Returns (rows or None, exit tuple or None)."""
    shape = params.shape
    literal = params.threshold_mode is ThresholdMode.PAPER_LITERAL
    sigma = params.sigma
    law = obs.interarrival
    draws = _Draws(gen)

    tau = _initial_delay(obs, gen)
    a = params.a0
    rows = [(0, tau, tau, a, 0.0, 0.0)] if record else None
    held = True
    exit_ = None
    for k in range(1, max_steps + 1):
        e, z = draws.next()
        d = _spacing(law, e)
        w = params.drift.at(k)
        inc = w * d + sigma * math.sqrt(d) * z
        tau_new = tau + d
        a_new = a + inc
        if record:
            rows.append((k, tau_new, d, a_new, inc, w))
        if exit_ is None:
            thr = w if literal else 0.0
            if _crosses(inc, thr, shape):
                exit_ = (k, tau, a, tau_new, a_new, held)
                if stop_at_exit:
                    return rows, exit_
            else:
                held = held and _holds(inc, thr, shape)
        tau, a = tau_new, a_new
    return rows, exit_


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based substream ``index`` of master ``seed``.

    The Philox key is derived from ``seed``; replication ``index`` starts at
    counter block ``index * 2**64`` so streams never overlap.
    """
    key = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, index, 0, 0]))


def _path_from_rows(rows, truncated):
    arr = np.array(rows, dtype=float)
    return SbfpPath(arr[:, 0].astype(int), arr[:, 1], arr[:, 2], arr[:, 3],
                    arr[:, 4], arr[:, 5], truncated=truncated)


def simulate_path(params: ProcessParams, obs: ObservationModel, seed: int = 0,
                  max_steps: int = DEFAULT_MAX_STEPS, stream: int = 0):
    """Simulate one path up to its first turning point.

    Returns ``(path, exit_record)``.  Raises :class:`NoExitWithinCap` if the
    exit condition is still unmet after ``max_steps`` steps; the truncated
    path is attached to the exception as ``.path``.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    rows, ex = _run(params, obs, replication_rng(seed, stream), max_steps, record=True)
    if ex is None:
        err = NoExitWithinCap(f"no turning point within {max_steps} steps")
        err.path = _path_from_rows(rows, truncated=True)
        raise err
    return _path_from_rows(rows, truncated=False), ExitRecord(*ex)


def simulate_series(params: ProcessParams, obs: ObservationModel, n_steps: int,
                    seed: int = 0, stream: int = 0) -> SbfpPath:
    """Simulate ``n_steps`` observations without stopping at the turning point."""
    rows, _ = _run(params, obs, replication_rng(seed, stream), n_steps,
                   record=True, stop_at_exit=False)
    return _path_from_rows(rows, truncated=False)


@dataclass(frozen=True)
class ExitSample:
    """Exit records of ``reps`` replications, in replication order.

    Truncated replications have ``exited == False`` and NaN/0 fields.
    """

    exited: np.ndarray
    nu: np.ndarray
    tau_prev: np.ndarray
    a_prev: np.ndarray
    tau_exit: np.ndarray
    a_exit: np.ndarray

    @property
    def reps(self) -> int:
        return len(self.exited)


def _simulate_range(params, obs, seed, start, stop, max_steps):
    n = stop - start
    out = np.full((6, n), np.nan)
    for j, i in enumerate(range(start, stop)):
        _, ex = _run(params, obs, replication_rng(seed, i), max_steps, record=False)
        if ex is None:
            out[0, j] = 0.0
            out[1, j] = 0.0
        else:
            out[0, j] = 1.0
            out[1:, j] = ex[:5]
    return out


def simulate_exits(params: ProcessParams, obs: ObservationModel, reps: int,
                   seed: int = 0, max_steps: int = DEFAULT_MAX_STEPS,
                   workers: int = 1) -> ExitSample:
    """Run ``reps`` independent replications, optionally across processes.

    The result is bit-identical for every value of ``workers``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    workers = max(1, min(workers or os.cpu_count() or 1, reps))
    if workers == 1:
        out = _simulate_range(params, obs, seed, 0, reps, max_steps)
    else:
        edges = np.linspace(0, reps, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_simulate_range, params, obs, seed, int(a), int(b), max_steps)
                    for a, b in zip(edges[:-1], edges[1:])]
            out = np.concatenate([f.result() for f in futs], axis=1)
    return ExitSample(
        exited=out[0].astype(bool),
        nu=out[1].astype(int),
        tau_prev=out[2],
        a_prev=out[3],
        tau_exit=out[4],
        a_exit=out[5],
    )


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float

    @classmethod
    def of(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=float)
        if len(x) == 0:
            return cls(math.nan, math.nan)
        se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        return cls(float(np.mean(x)), se)


@dataclass(frozen=True)
class McSummary:
    reps: int
    exits: int
    truncation_rate: float
    a_prev: Estimate
    tau_prev: Estimate
    a_exit: Estimate
    tau_exit: Estimate
    nu: Estimate
    nu_from_tau: Estimate
    phi: Estimate
    point: tuple = field(default=(0.0, 0.0, 0.0, 0.0))

    def to_dict(self) -> dict:
        d = {"reps": self.reps, "exits": self.exits,
             "truncation_rate": self.truncation_rate,
             "point": dict(zip(("u", "v", "vartheta", "theta"), self.point))}
        for name in ("a_prev", "tau_prev", "a_exit", "tau_exit", "nu", "nu_from_tau", "phi"):
            est = getattr(self, name)
            d[name] = {"mean": est.mean, "se": est.se}
        return d


def summarize(sample: ExitSample, delta_mean: float, u=0.0, v=0.0,
              vartheta=0.0, theta=0.0) -> McSummary:
    """Moment and functional estimates from an :class:`ExitSample`.

    Moments average over exited replications.  The functional estimate
    averages over *all* replications with truncated ones contributing 0, so
    at the origin it equals the exit fraction.
    """
    ok = sample.exited
    if not ok.any():
        raise AllTruncated(f"all {sample.reps} replications hit max_steps")
    weights = np.zeros(sample.reps)
    weights[ok] = np.exp(-u * sample.a_prev[ok] - v * sample.a_exit[ok]
                         - vartheta * sample.tau_prev[ok] - theta * sample.tau_exit[ok])
    tau_exit = sample.tau_exit[ok]
    return McSummary(
        reps=sample.reps,
        exits=int(ok.sum()),
        truncation_rate=float(1.0 - ok.mean()),
        a_prev=Estimate.of(sample.a_prev[ok]),
        tau_prev=Estimate.of(sample.tau_prev[ok]),
        a_exit=Estimate.of(sample.a_exit[ok]),
        tau_exit=Estimate.of(tau_exit),
        nu=Estimate.of(sample.nu[ok]),
        nu_from_tau=Estimate.of(np.abs(tau_exit) / delta_mean),
        phi=Estimate.of(weights),
        point=(float(u), float(v), float(vartheta), float(theta)),
    )


def mc_estimate(params: ProcessParams, obs: ObservationModel, u=0.0, v=0.0,
                vartheta=0.0, theta=0.0, reps: int = 10_000, seed: int = 0,
                max_steps: int = DEFAULT_MAX_STEPS, workers: int = 1) -> McSummary:
    """Monte Carlo estimate of the turning-point functional and its moments."""
    if min(u, v, vartheta, theta) < 0:
        raise ValueError("transform variables must be non-negative")
    sample = simulate_exits(params, obs, reps, seed, max_steps, workers)
    return summarize(sample, obs.delta_mean, u, v, vartheta, theta)
