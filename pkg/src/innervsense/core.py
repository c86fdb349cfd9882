"""Unit-safe domain types shared by every other module.

Time is stored internally as integer microseconds and exposed in seconds at
API boundaries; this keeps long sessions free of float drift and makes the
common rates (50/100/1000 Hz) exact on the grid.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySeries, GridOutOfRange, RangeError, UnitMismatch

ADC_SCALE_PA_PER_COUNT = 0.1
ADC_MAX_PA = 3276.7  # |P| above this is not encodable as a signed 16-bit count


class Unit(enum.Enum):
    PA = "Pa"
    N = "N"
    NM = "N.m"
    MM = "mm"
    DEG = "deg"
    DIMENSIONLESS = "dimensionless"


def counts_to_pascals(counts: int) -> float:
    """Convert a signed 16-bit ADC count to pascals (0.1 Pa/count, exact)."""
    return counts / 10.0


def pascals_to_counts(pascals: float) -> int:
    """Inverse of counts_to_pascals; rejects values outside the ADC range."""
    if abs(pascals) > ADC_MAX_PA:
        raise RangeError(f"{pascals} Pa outside representable range +/-{ADC_MAX_PA} Pa")
    return int(round(pascals * 10.0))


def seconds_to_us(t_s) -> np.ndarray:
    return np.asarray(np.round(np.asarray(t_s, dtype=np.float64) * 1e6), dtype=np.int64)


@dataclass(frozen=True)
class TimeSeries:
    """Immutable timestamped scalar channel.

    t_us is strictly increasing after construction (duplicate microsecond
    timestamps are dropped, first occurrence kept).
    """

    t_us: np.ndarray
    v: np.ndarray
    unit: Unit
    rate_hint: float | None = None

    def __post_init__(self):
        t_us = np.asarray(self.t_us, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.float64)
        if t_us.shape != v.shape or t_us.ndim != 1:
            raise ValueError("t and v must be 1-D arrays of equal length")
        if t_us.size and np.any(np.diff(t_us) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if t_us.size:
            keep = np.concatenate(([True], np.diff(t_us) > 0))
            t_us, v = t_us[keep], v[keep]
        t_us.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t_us", t_us)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_seconds(cls, t_s, v, unit: Unit, rate_hint: float | None = None) -> "TimeSeries":
        return cls(seconds_to_us(t_s), np.asarray(v, dtype=np.float64), unit, rate_hint)

    @property
    def t(self) -> np.ndarray:
        """Timestamps in seconds."""
        return self.t_us / 1e6

    def __len__(self) -> int:
        return len(self.t_us)

    @property
    def span(self) -> tuple[float, float]:
        if not len(self):
            raise EmptySeries("empty series has no span")
        return float(self.t_us[0] / 1e6), float(self.t_us[-1] / 1e6)

    def with_values(self, v) -> "TimeSeries":
        return TimeSeries(self.t_us, np.asarray(v, dtype=np.float64), self.unit, self.rate_hint)

    def _check_compatible(self, other: "TimeSeries"):
        if self.unit is not other.unit:
            raise UnitMismatch(f"cannot combine {self.unit.value} with {other.unit.value}")
        if len(self) != len(other) or not np.array_equal(self.t_us, other.t_us):
            raise ValueError("series must share the same timebase")

    def __add__(self, other: "TimeSeries") -> "TimeSeries":
        self._check_compatible(other)
        return self.with_values(self.v + other.v)

    def __sub__(self, other: "TimeSeries") -> "TimeSeries":
        self._check_compatible(other)
        return self.with_values(self.v - other.v)

    def slice_time(self, t0: float, t1: float) -> "TimeSeries":
        """Samples with t0 <= t < t1 (half-open, microsecond resolution)."""
        lo, hi = int(round(t0 * 1e6)), int(round(t1 * 1e6))
        i0 = int(np.searchsorted(self.t_us, lo, side="left"))
        i1 = int(np.searchsorted(self.t_us, hi, side="left"))
        return TimeSeries(self.t_us[i0:i1], self.v[i0:i1], self.unit, self.rate_hint)

    def to_csv(self, path_or_buf) -> None:
        """Write `t_s,<unit>` CSV. repr() formatting makes the round trip exact."""
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        f = open(path_or_buf, "w", encoding="utf-8") if own else path_or_buf
        try:
            f.write(f"t_s,{self.unit.value}\n")
            for t_us, v in zip(self.t_us, self.v):
                f.write(f"{repr(int(t_us) / 1e6)},{repr(float(v))}\n")
        finally:
            if own:
                f.close()

    @classmethod
    def from_csv(cls, path_or_buf, rate_hint: float | None = None) -> "TimeSeries":
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        f = open(path_or_buf, "r", encoding="utf-8") if own else path_or_buf
        try:
            header = f.readline().strip()
            if not header.startswith("t_s,"):
                raise ValueError(f"not a TimeSeries CSV (header {header!r})")
            unit = Unit(header.split(",", 1)[1])
            t, v = [], []
            for line in f:
                line = line.strip()
                if not line:
                    continue
                a, b = line.split(",")
                t.append(float(a))
                v.append(float(b))
            return cls.from_seconds(t, v, unit, rate_hint)
        finally:
            if own:
                f.close()

    def to_csv_str(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


@dataclass(frozen=True)
class PressureSample:
    """One wire-level pad reading: microsecond timestamp plus Pa channels."""

    timestamp_us: int
    channels: tuple[float, ...]
    seq: int

    def __post_init__(self):
        for p in self.channels:
            # representable count range is -32768..32767 -> [-3276.8, +3276.7] Pa
            if not (-3276.8 - 1e-9 <= p <= ADC_MAX_PA + 1e-9):
                raise RangeError(f"channel value {p} Pa not representable")


def merge_on_grid(series_list: list[TimeSeries], grid_s) -> np.ndarray:
    """Linearly interpolate each series onto a common grid (seconds).

    Returns an array of shape (len(grid), len(series_list)); no
    extrapolation — every series must span the grid interval.
    """
    grid_us = seconds_to_us(grid_s)
    if grid_us.size == 0:
        return np.empty((0, len(series_list)))
    cols = []
    for s in series_list:
        if not len(s):
            raise EmptySeries("cannot merge an empty series")
        if grid_us[0] < s.t_us[0] or grid_us[-1] > s.t_us[-1]:
            raise GridOutOfRange(
                f"grid [{grid_us[0]/1e6}, {grid_us[-1]/1e6}] s exceeds series span "
                f"[{s.t_us[0]/1e6}, {s.t_us[-1]/1e6}] s"
            )
        cols.append(np.interp(grid_us, s.t_us, s.v))
    return np.column_stack(cols)
