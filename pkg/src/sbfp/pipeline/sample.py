"""Generator for the bundled synthetic sample series.

The shipped ``data/sample_series.csv`` is ``write_sample(path)`` with the
defaults below: 126 daily closes (about six months of sessions) from a
process whose drift slope ramps up over time, so the last window runs
ahead of the average the way a rally into a peak does.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from importlib import resources

from ..process import (Deterministic, DriftSchedule, ObservationModel, ProcessParams,
                       simulate_series)

SAMPLE_SEED = 20220517
SAMPLE_STEPS = 125
START = datetime(2022, 1, 3, tzinfo=timezone.utc)


def sample_drift(n_steps: int = SAMPLE_STEPS) -> DriftSchedule:
    return DriftSchedule(tuple(0.2 + 0.4 * k / n_steps for k in range(1, n_steps + 1)))


def write_sample(path, seed: int = SAMPLE_SEED, n_steps: int = SAMPLE_STEPS,
                 sigma: float = 0.15, a0: float = 100.0) -> None:
    params = ProcessParams(sigma, a0, sample_drift(n_steps))
    path_ = simulate_series(params, ObservationModel(Deterministic(1.0)), n_steps, seed=seed)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,value\n")
        for tau, a in zip(path_.tau, path_.a):
            stamp = (START + timedelta(days=float(tau))).strftime("%Y-%m-%dT%H:%M:%SZ")
            fh.write(f"{stamp},{a:.4f}\n")


def sample_path():
    """Filesystem path of the bundled sample CSV."""
    return resources.files("sbfp") / "data" / "sample_series.csv"
