"""Signal conditioning applied before every analysis: zero-phase lowpass
filtering, rest-window offset removal, and rate conversion.

The lowpass is a second-order Butterworth biquad (bilinear transform with
cutoff prewarping) run forward then backward, so the single-pass -3 dB point
sits at the cutoff and the two-pass response is -6 dB there. Edges are
handled by mirror padding of 3x the filter's characteristic length plus
steady-state initial conditions, which keeps a constant input exactly
constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import TimeSeries
from .errors import (
    CutoffOutOfRange,
    EmptySeries,
    NonUniformSampling,
    SeriesTooShort,
    TooFewSamples,
    WindowOutOfRange,
)

FILTER_ORDER = 2


@dataclass(frozen=True)
class FilterSpec:
    cutoff: float
    sample_rate: float

    def __post_init__(self):
        if not (0.0 < self.cutoff < self.sample_rate / 2.0):
            raise CutoffOutOfRange(
                f"cutoff {self.cutoff} Hz must be in (0, {self.sample_rate / 2}) Hz"
            )


def butter2_coeffs(spec: FilterSpec) -> tuple[np.ndarray, np.ndarray]:
    """Biquad (b, a) for a 2nd-order Butterworth lowpass, a[0] == 1."""
    k = math.tan(math.pi * spec.cutoff / spec.sample_rate)  # prewarped
    k2 = k * k
    norm = 1.0 / (1.0 + math.sqrt(2.0) * k + k2)
    b = np.array([k2 * norm, 2.0 * k2 * norm, k2 * norm])
    a = np.array([1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - math.sqrt(2.0) * k + k2) * norm])
    return b, a


def butter2_gain(freq_hz: float, spec: FilterSpec, passes: int = 2) -> float:
    """Analytic magnitude response of the bilinear-transformed filter.

    |H|^2 = 1 / (1 + (tan(pi f/fs) / tan(pi fc/fs))^4) per pass.
    """
    ratio = math.tan(math.pi * freq_hz / spec.sample_rate) / math.tan(
        math.pi * spec.cutoff / spec.sample_rate
    )
    single_sq = 1.0 / (1.0 + ratio**4)
    return single_sq ** (passes / 2.0)


def _biquad(x: np.ndarray, b: np.ndarray, a: np.ndarray) -> np.ndarray:
    # direct form II transposed with steady-state initial conditions for x[0],
    # so a constant input produces a constant output from the first sample
    b0, b1, b2 = b
    _, a1, a2 = a
    dc = (b0 + b1 + b2) / (1.0 + a1 + a2)
    z1 = x[0] * (dc - b0)
    z2 = x[0] * (b2 - a2 * dc)
    y = np.empty_like(x)
    for n in range(len(x)):
        xn = x[n]
        yn = b0 * xn + z1
        z1 = b1 * xn - a1 * yn + z2
        z2 = b2 * xn - a2 * yn
        y[n] = yn
    return y


def characteristic_length(spec: FilterSpec) -> int:
    """Samples per cutoff period; the edge-padding unit."""
    return int(math.ceil(spec.sample_rate / spec.cutoff))


def _check_uniform(x: TimeSeries, sample_rate: float, tol: float = 0.01) -> None:
    dt_nom_us = 1e6 / sample_rate
    steps = np.diff(x.t_us)
    if steps.size == 0:
        return
    if np.any(np.abs(steps - dt_nom_us) > tol * dt_nom_us):
        raise NonUniformSampling(
            f"sampling deviates more than {tol:.0%} from {sample_rate} Hz"
        )


def lowpass_zero_phase(x: TimeSeries, spec: FilterSpec) -> TimeSeries:
    """Two-pass Butterworth lowpass; same length and timebase out.

    The two pass orders (forward-backward and backward-forward) are averaged:
    both have the same |H|^2 response, and the average makes time-reversal
    symmetry exact instead of pad-length dependent.
    """
    n = len(x)
    if n < 3 * FILTER_ORDER:
        raise SeriesTooShort(f"need at least {3 * FILTER_ORDER} samples, got {n}")
    _check_uniform(x, spec.sample_rate)
    b, a = butter2_coeffs(spec)
    pad = min(3 * characteristic_length(spec), n - 1)
    v = x.v
    padded = np.concatenate([v[pad:0:-1], v, v[-2 : -pad - 2 : -1]]) if pad else v.copy()
    fwd_then_back = _biquad(_biquad(padded, b, a)[::-1], b, a)[::-1]
    back_then_fwd = _biquad(_biquad(padded[::-1], b, a)[::-1], b, a)
    out = 0.5 * (fwd_then_back + back_then_fwd)
    return x.with_values(out[pad : pad + n])


def offset_by_rest(x: TimeSeries, t0: float, t1: float) -> TimeSeries:
    """Subtract the mean over the rest window [t0, t1] (inclusive)."""
    if not len(x):
        raise EmptySeries("cannot offset an empty series")
    lo, hi = x.span
    if t0 < lo - 1e-9 or t1 > hi + 1e-9 or t1 <= t0:
        raise WindowOutOfRange(f"window [{t0}, {t1}] s outside span [{lo}, {hi}] s")
    mask = (x.t_us >= round(t0 * 1e6)) & (x.t_us <= round(t1 * 1e6))
    if int(mask.sum()) < 10:
        raise TooFewSamples(f"only {int(mask.sum())} samples in rest window, need 10")
    return x.with_values(x.v - float(np.mean(x.v[mask])))


def resample(x: TimeSeries, target_rate: float) -> TimeSeries:
    """Resample onto a uniform grid at target_rate by linear interpolation.

    The grid runs from the first to the last timestamp; no extrapolation.
    """
    if not len(x):
        raise EmptySeries("cannot resample an empty series")
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if len(x) == 1:
        return TimeSeries(x.t_us, x.v, x.unit, target_rate)
    step_us = int(round(1e6 / target_rate))
    n_out = int((x.t_us[-1] - x.t_us[0]) // step_us) + 1
    grid_us = x.t_us[0] + step_us * np.arange(n_out, dtype=np.int64)
    v = np.interp(grid_us, x.t_us, x.v)
    return TimeSeries(grid_us, v, x.unit, target_rate)
