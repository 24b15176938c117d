"""Uniformly sampled scalar series: windowing, differencing, detrending and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    MissingColumn,
    NonNumericEntry,
    NonUniformSampling,
    TooShort,
    WindowTooLong,
)

UNIFORM_RTOL = 1e-6


@dataclass(frozen=True)
class TimeSeries:
    """Scalar series sampled at ``t0 + k*dt``.

    ``values`` is stored as a read-only float64 array.
    """

    values: np.ndarray
    dt: float = 1.0
    t0: float = 0.0
    unit_label: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise TooShort("series must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise NonNumericEntry(f"non-finite value at index {bad}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def time_at(self, index: int) -> float:
        return self.t0 + self.dt * index

    def with_values(self, values, t0=None) -> "TimeSeries":
        return TimeSeries(values, self.dt, self.t0 if t0 is None else t0, self.unit_label)


@dataclass(frozen=True)
class Window:
    start_index: int
    length: int

    @property
    def stop(self) -> int:
        return self.start_index + self.length

    @property
    def end_index(self) -> int:
        """Index of the final point; results are stamped with this point's time."""
        return self.start_index + self.length - 1

    def slice(self, values):
        return values[self.start_index:self.stop]


def difference(series: TimeSeries, d: int) -> TimeSeries:
    """d-th forward difference; the result is stamped from index ``d`` on."""
    if d < 0:
        raise ValueError("d must be non-negative")
    if d > len(series) - 1:
        raise TooShort(f"cannot difference {len(series)} points {d} times")
    if d == 0:
        return series
    return series.with_values(np.diff(series.values, n=d), t0=series.time_at(d))


def detrend_linear(values: Sequence[float]) -> np.ndarray:
    """Residuals of an ordinary least-squares line through ``values``."""
    y = np.asarray(values, dtype=float)
    n = y.size
    if n < 2:
        raise TooShort("detrending needs at least 2 points")
    x = np.arange(n, dtype=float)
    x -= x.mean()
    ybar = y.mean()
    slope = np.dot(x, y - ybar) / np.dot(x, x)
    return y - ybar - slope * x


def windows(series: TimeSeries | int, tau: int, stride: int = 1) -> list[Window]:
    """Sliding windows of ``tau`` points starting at 0, advancing by ``stride``.

    Pure index arithmetic; minimum lengths for model fitting are enforced
    where models are fitted.
    """
    n = series if isinstance(series, int) else len(series)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if tau < 1:
        raise ValueError(f"window length must be positive, got {tau}")
    if tau > n:
        raise WindowTooLong(f"window length {tau} exceeds series length {n}")
    return [Window(s, tau) for s in range(0, n - tau + 1, stride)]


# --------------------------------------------------------------------------- CSV


def format_float(x: float) -> str:
    # 17 significant digits round-trip every double
    return format(float(x), ".17g")


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NonNumericEntry(f"row {row}: column {column!r} holds {text!r}") from None
    if not np.isfinite(value):
        raise NonNumericEntry(f"row {row}: column {column!r} holds non-finite {text!r}")
    return value


def load_csv(path, column: str | int, dt: float | None = None, unit_label: str = "") -> TimeSeries:
    """Read one numeric column of a headed, comma-separated file.

    If a leading column named ``t`` exists, ``t0`` and ``dt`` are taken from it
    (and it must be uniformly spaced); otherwise ``dt`` must be supplied or
    defaults to 1. Row numbers in error messages count the header as row 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TooShort(f"{path}: empty file") from None
        rows = [r for r in reader if r]

    if isinstance(column, int) or (isinstance(column, str) and column.isdigit() and column not in header):
        idx = int(column)
        if not 0 <= idx < len(header):
            raise MissingColumn(f"{path}: no column index {idx} (have {len(header)})")
    else:
        if column not in header:
            raise MissingColumn(f"{path}: no column {column!r} (have {header})")
        idx = header.index(column)
    name = header[idx]

    values = []
    times = []
    has_t = header[0] == "t"
    for k, r in enumerate(rows, start=2):
        if idx >= len(r) or r[idx].strip() == "":
            raise NonNumericEntry(f"row {k}: missing value in column {name!r}")
        values.append(_parse_float(r[idx].strip(), k, name))
        if has_t:
            times.append(_parse_float(r[0].strip(), k, "t"))
    if not values:
        raise TooShort(f"{path}: no data rows")

    t0 = 0.0
    if has_t:
        t = np.asarray(times)
        t0 = float(t[0])
        if t.size > 1:
            steps = np.diff(t)
            inferred = (t[-1] - t[0]) / (t.size - 1)
            bad = np.flatnonzero(np.abs(steps - inferred) > UNIFORM_RTOL * abs(inferred))
            if inferred <= 0 or bad.size:
                row = int(bad[0]) + 3 if bad.size else 3
                raise NonUniformSampling(f"row {row}: time column is not uniformly spaced")
            if dt is None:
                # 12 digits recovers the writer's nominal step (e.g. 0.2) exactly
                dt = float(format(inferred, ".12g"))
    return TimeSeries(np.asarray(values), dt if dt is not None else 1.0, t0, unit_label or name)


def write_columns(path, columns: dict[str, Sequence]) -> None:
    """Write equal-length columns; floats use 17 significant digits."""
    names = list(columns)
    n = {len(columns[c]) for c in names}
    if len(n) != 1:
        raise ValueError("columns differ in length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*(columns[c] for c in names)):
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_csv(path, series: TimeSeries, column: str | None = None) -> None:
    write_columns(path, {"t": series.times, column or series.unit_label or "x": series.values})
