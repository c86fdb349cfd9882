import numpy as np
import pytest

from innervsense.core import TimeSeries, Unit


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def make_series(values, rate=50.0, unit=Unit.PA, t0=0.0):
    values = np.asarray(values, dtype=np.float64)
    t = t0 + np.arange(len(values)) / rate
    return TimeSeries.from_seconds(t, values, unit, rate)


def sine_series(freq_hz, rate, duration_s, amp=1.0, unit=Unit.PA):
    n = int(round(duration_s * rate)) + 1
    t = np.arange(n) / rate
    return TimeSeries.from_seconds(t, amp * np.sin(2 * np.pi * freq_hz * t), unit, rate)


def fitted_amplitude(series, freq_hz, drop=0):
    """Least-squares amplitude of a sinusoid, excluding `drop` edge samples."""
    t = series.t[drop : len(series) - drop if drop else None]
    v = series.v[drop : len(series) - drop if drop else None]
    design = np.column_stack([
        np.sin(2 * np.pi * freq_hz * t),
        np.cos(2 * np.pi * freq_hz * t),
        np.ones_like(t),
    ])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return float(np.hypot(coef[0], coef[1]))
