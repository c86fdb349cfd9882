"""Cycle segmentation, percent-cycle normalization, ensemble statistics, and
steady-state extraction by minimum coefficient of variation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeSeries
from .errors import (
    BoundaryOutOfRange,
    EmptyCycleSet,
    NonUniformSampling,
    SeriesTooShort,
    TooShortCycle,
)

COV_EPS_PA = 1e-9
MIN_CYCLE_SAMPLES = 10


@dataclass
class CycleSet:
    """Per-cycle slices plus (after normalize_cycles) a percent-cycle matrix."""

    cycles: list[TimeSeries]
    source_boundaries: list[tuple[float, float]]
    normalized: np.ndarray | None = None  # n_cycles x n_points
    grid: np.ndarray | None = None  # percent positions, 0..100


@dataclass(frozen=True)
class SteadyState:
    value: float  # window mean
    window_start: float  # s
    window_len: float  # s, actual span of the reported window
    cov: float


def segment_cycles(x: TimeSeries, boundaries: list[tuple[float, float]]) -> CycleSet:
    """Slice x into half-open [t_start, t_end) cycles; no resampling.

    Boundaries must be increasing and non-overlapping (a shared edge is fine)
    and each cycle must contain at least 10 samples.
    """
    if not boundaries:
        return CycleSet([], [])
    lo, hi = x.span
    # the end boundary is exclusive, so it may sit one sample period past the
    # last sample (a 4 s cycle in a stream whose last sample is at 19.98 s)
    slack = float(np.median(np.diff(x.t_us))) / 1e6 if len(x) > 1 else 0.0
    prev_end = None
    cycles = []
    for t0, t1 in boundaries:
        if t1 <= t0 or (prev_end is not None and t0 < prev_end - 1e-9):
            raise BoundaryOutOfRange(f"boundaries overlap or decrease at ({t0}, {t1})")
        if t0 < lo - 1e-9 or t1 > hi + slack + 1e-9:
            raise BoundaryOutOfRange(f"cycle ({t0}, {t1}) outside series span ({lo}, {hi})")
        prev_end = t1
        cyc = x.slice_time(t0, t1)
        if len(cyc) < MIN_CYCLE_SAMPLES:
            raise TooShortCycle(f"cycle ({t0}, {t1}) has {len(cyc)} samples, need {MIN_CYCLE_SAMPLES}")
        cycles.append(cyc)
    return CycleSet(cycles, [tuple(b) for b in boundaries])


def normalize_cycles(cs: CycleSet, n_points: int = 100) -> CycleSet:
    """Interpolate every cycle onto n_points percent-cycle positions.

    The grid includes both endpoints (0% and 100%, n_points-1 intervals), so
    the first/last normalized values equal the cycle's raw first/last values.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    rows = []
    idx = np.arange(n_points)
    for cyc in cs.cycles:
        if len(cyc) < 2:
            raise TooShortCycle("cannot normalize a cycle with fewer than 2 samples")
        tt = cyc.t_us.astype(np.float64)
        # multiply by the integer index before dividing so that positions which
        # coincide with source samples are hit exactly
        target = tt[0] + (tt[-1] - tt[0]) * idx / (n_points - 1)
        rows.append(np.interp(target, tt, cyc.v))
    normalized = np.asarray(rows) if rows else np.empty((0, n_points))
    return CycleSet(cs.cycles, cs.source_boundaries, normalized, 100.0 * idx / (n_points - 1))


def ensemble_stats(cs: CycleSet) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise sample mean and sd (n-1 denominator; sd = 0 when n = 1)."""
    if cs.normalized is None or cs.normalized.shape[0] == 0:
        raise EmptyCycleSet("no normalized cycles")
    mean = cs.normalized.mean(axis=0)
    if cs.normalized.shape[0] == 1:
        sd = np.zeros_like(mean)
    else:
        sd = cs.normalized.std(axis=0, ddof=1)
    # identical values must yield exactly that value and exactly zero spread;
    # plain float summation can be a ulp off (5x/5 != x for odd mantissas)
    same = np.ptp(cs.normalized, axis=0) == 0
    mean[same] = cs.normalized[0, same]
    sd[same] = 0.0
    return mean, sd


def steady_state_cov(x: TimeSeries, window_len: float = 2.0) -> SteadyState:
    """Sliding-window minimum coefficient of variation.

    The window is slid one sample at a time; cov = sd / (|mean| + eps).
    Ties resolve to the earliest window.
    """
    n = len(x)
    if n < 2:
        raise SeriesTooShort("need at least 2 samples")
    steps = np.diff(x.t_us)
    dt_us = steps[0]
    if np.any(steps != dt_us):
        raise NonUniformSampling("steady-state extraction requires uniform sampling")
    w = int(round(window_len * 1e6 / dt_us)) + 1  # samples spanning window_len
    if w > n:
        raise SeriesTooShort(f"window {window_len} s ({w} samples) exceeds series length {n}")
    windows = np.lib.stride_tricks.sliding_window_view(x.v, w)
    means = windows.mean(axis=1)
    sds = windows.std(axis=1, ddof=1)
    covs = sds / (np.abs(means) + COV_EPS_PA)
    k = int(np.argmin(covs))  # argmin returns the first minimum: earliest window
    return SteadyState(
        value=float(means[k]),
        window_start=float(x.t_us[k] / 1e6),
        window_len=float((w - 1) * dt_us / 1e6),
        cov=float(covs[k]),
    )


def ensemble_csv(cs: CycleSet, mean: np.ndarray, sd: np.ndarray) -> str:
    """CSV export: pct, mean, sd, plus one column per cycle."""
    if cs.normalized is None:
        raise EmptyCycleSet("normalize before exporting")
    n_cyc = cs.normalized.shape[0]
    header = "pct,mean,sd," + ",".join(f"cycle{i}" for i in range(n_cyc))
    lines = [header]
    for j, pct in enumerate(cs.grid):
        cells = [repr(float(pct)), repr(float(mean[j])), repr(float(sd[j]))]
        cells += [repr(float(cs.normalized[i, j])) for i in range(n_cyc)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
