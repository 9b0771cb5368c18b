"""Windowed drift / volatility estimation from an observed series."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import TooShort, ZeroSpan
from .data import SeriesData

TIME_UNITS = {"sec": 1.0, "day": 86400.0}
DEFAULT_WINDOW = 5


@dataclass(frozen=True)
class DriftWindow:
    start: int
    end: int
    span: float
    drift: float


@dataclass(frozen=True)
class FitResult:
    sigma_hat: float
    drift_windows: tuple
    w_bar_hat: float
    w_bar_se: float
    w_prev_hat: float
    delta_hat: float
    a0: float
    time_unit: str
    unit_seconds: float
    window: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["drift_windows"] = [asdict(w) for w in self.drift_windows]
        d["estimator"] = "windowed drift (artifact choice, not from the model)"
        return d


def _time_scale(series: SeriesData, time_unit: str) -> float:
    if time_unit == "obs":
        return float(np.mean(np.diff(series.timestamps)))
    try:
        return TIME_UNITS[time_unit]
    except KeyError:
        raise ValueError(f"unknown time unit {time_unit!r}") from None


def fit_params(series: SeriesData, window: int = DEFAULT_WINDOW,
               time_unit: str = "obs") -> FitResult:
    """Estimate spacing, per-window drift and volatility.

    Windows are consecutive blocks of ``window`` increments (the trailing
    partial block is dropped).  Each window's drift is its level change over
    its time span.  The volatility estimate pools the standardized residuals
    ``(dA - w_k dt) / sqrt(dt)`` and divides by ``n_increments - n_windows``,
    which is unbiased because each window spends one degree of freedom on
    its drift.

    ``time_unit`` is ``"obs"`` (one mean spacing = 1), ``"sec"`` or ``"day"``.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    n = len(series)
    if n < 2 * window:
        raise TooShort(f"series of {n} points is shorter than 2 * window = {2 * window}")
    scale = _time_scale(series, time_unit)
    t = series.timestamps / scale
    a = series.values
    dt = np.diff(t)
    da = np.diff(a)

    n_win = (n - 1) // window
    windows, resid_ss = [], 0.0
    for k in range(n_win):
        lo, hi = k * window, (k + 1) * window
        span = t[hi] - t[lo]
        if not span > 0:
            raise ZeroSpan(f"window {k} spans zero time")
        w = (a[hi] - a[lo]) / span
        windows.append(DriftWindow(lo, hi, float(span), float(w)))
        r = da[lo:hi] - w * dt[lo:hi]
        resid_ss += float(np.sum(r * r / dt[lo:hi]))
    dof = n_win * window - n_win
    sigma2 = resid_ss / dof
    drifts = np.array([w.drift for w in windows])
    spans = np.array([w.span for w in windows])
    w_bar = float(np.mean(drifts))
    w_bar_se = math.sqrt(sigma2 * np.sum(1.0 / spans)) / n_win
    return FitResult(
        sigma_hat=math.sqrt(sigma2),
        drift_windows=tuple(windows),
        w_bar_hat=w_bar,
        w_bar_se=w_bar_se,
        w_prev_hat=float(drifts[-1]),
        delta_hat=float(np.mean(dt)),
        a0=float(a[-1]),
        time_unit=time_unit,
        unit_seconds=scale,
        window=window,
    )
