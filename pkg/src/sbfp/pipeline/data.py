"""CSV ingestion for observed level series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..errors import EmptySeries, ParseError

HEADER = ["timestamp", "value"]


@dataclass(frozen=True)
class SeriesData:
    """Strictly increasing timestamps (epoch seconds) with finite values."""

    timestamps: np.ndarray
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("timestamps and values must be 1-d and equally long")
        if not (np.isfinite(t).all() and np.isfinite(v).all()):
            raise ValueError("series entries must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


def parse_timestamp(text: str) -> float:
    """Epoch seconds from an integer/decimal epoch or an ISO-8601 string.

    Naive ISO times are taken as UTC.
    """
    s = text.strip()
    try:
        val = float(s)
    except ValueError:
        pass
    else:
        if not math.isfinite(val):
            raise ValueError(f"non-finite timestamp {text!r}")
        return val
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def load_csv(path, source: str | None = None) -> SeriesData:
    """Read a ``timestamp,value`` CSV.

    Raises :class:`ParseError` (1-based line numbers, header is line 1) on
    malformed rows, non-finite values and non-increasing timestamps, and
    :class:`EmptySeries` when no data rows follow the header.
    """
    path = Path(path)
    times, values = [], []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptySeries(f"{path} is empty")
        if [h.strip().lower() for h in header] != HEADER:
            raise ParseError(f"expected header 'timestamp,value', got {','.join(header)!r}", 1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line)
            try:
                t = parse_timestamp(row[0])
            except ValueError as exc:
                raise ParseError(f"bad timestamp {row[0]!r} ({exc})", line, "timestamp") from None
            try:
                v = float(row[1])
            except ValueError:
                raise ParseError(f"bad value {row[1]!r}", line, "value") from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {row[1]!r}", line, "value")
            if times and t <= times[-1]:
                raise ParseError("non-increasing timestamp", line, "timestamp")
            times.append(t)
            values.append(v)
    if not times:
        raise EmptySeries(f"{path} has no observations")
    return SeriesData(np.array(times), np.array(values), source or str(path))
