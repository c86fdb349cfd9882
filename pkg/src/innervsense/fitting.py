"""Numerical fitting: least-squares calibration with R^2, exponential
relaxation fitting, and the torque-pressure condition pipeline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .core import TimeSeries, merge_on_grid
from .dsp import FilterSpec, lowpass_zero_phase, offset_by_rest, resample
from .errors import DegenerateX, FlatSignal, LengthMismatch, NoDecay, TooFewSamples

TAU_GRID_POINTS = 60
GN_MAX_ITER = 100
GN_REL_TOL = 1e-10


@dataclass(frozen=True)
class LinFit:
    slope: float
    intercept: float
    r2: float
    n: int
    residual_sd: float
    degenerate_y: bool = False  # SS_tot == 0; r2 reported as 0 by convention

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass(frozen=True)
class ExpFit:
    y_inf: float
    amplitude: float
    tau: float
    rmse: float
    iterations: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def linfit(x, y) -> LinFit:
    """Ordinary least squares y = slope*x + intercept, centered for stability."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"len(x)={x.size} != len(y)={y.size}")
    n = x.size
    if n < 3:
        raise TooFewSamples(f"need at least 3 points, got {n}")
    xm = x - x.mean()
    ym = y - y.mean()
    sxx = float(xm @ xm)
    if sxx == 0.0:
        raise DegenerateX("x has zero variance")
    slope = float(xm @ ym) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(ym @ ym)
    degenerate = ss_tot == 0.0
    r2 = 0.0 if degenerate else 1.0 - ss_res / ss_tot
    residual_sd = float(np.sqrt(ss_res / (n - 2)))
    return LinFit(slope, intercept, r2, n, residual_sd, degenerate)


def _exp_linear_ls(t: np.ndarray, y: np.ndarray, tau: float):
    """For fixed tau, solve min ||y - (y_inf + A e^(-t/tau))|| for (y_inf, A)."""
    e = np.exp(-t / tau)
    design = np.column_stack([np.ones_like(t), e])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(coef[0]), float(coef[1]), float(resid @ resid)


def _gauss_newton(t: np.ndarray, y: np.ndarray, theta0):
    """Refine (y_inf, A, tau); returns (theta, sse, iterations)."""
    theta = np.asarray(theta0, dtype=np.float64).copy()

    def sse_of(th):
        r = th[0] + th[1] * np.exp(-t / th[2]) - y
        return float(r @ r)

    sse = sse_of(theta)
    iterations = 0
    for _ in range(GN_MAX_ITER):
        iterations += 1
        y_inf, amp, tau = theta
        e = np.exp(-t / tau)
        r = y_inf + amp * e - y
        jac = np.column_stack([np.ones_like(t), e, amp * e * t / tau**2])
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        # plain GN with a backtracking guard to keep tau positive and sse non-increasing
        scale = 1.0
        for _ in range(30):
            cand = theta + scale * step
            if cand[2] > 0:
                cand_sse = sse_of(cand)
                if cand_sse <= sse * (1.0 + 1e-15):
                    break
            scale *= 0.5
        else:
            break
        rel = float(np.linalg.norm(scale * step) / max(np.linalg.norm(theta), 1e-30))
        theta, sse = cand, cand_sse
        if rel < GN_REL_TOL:
            break
    return theta, sse, iterations


def expfit(t, y) -> ExpFit:
    """Fit y = y_inf + A*exp(-t/tau).

    Coarse log-spaced grid over tau in [0.1*span, 10*span] with linear LS for
    (y_inf, A) at each tau, then Gauss-Newton refinement from the grid optimum.
    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if t.shape != y.shape:
        raise LengthMismatch(f"len(t)={t.size} != len(y)={y.size}")
    if t.size < 10:
        raise TooFewSamples(f"need at least 10 points, got {t.size}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be strictly increasing")
    if float(np.var(y)) <= 1e-12 * float(np.mean(y)) ** 2:
        raise FlatSignal("signal variance too small to identify tau")

    span = float(t[-1] - t[0])
    t0 = t - t[0]  # conditioning; A is reported relative to t[0]
    taus = np.geomspace(0.1 * span, 10.0 * span, TAU_GRID_POINTS)
    best = None
    for tau in taus:
        y_inf, amp, sse = _exp_linear_ls(t0, y, tau)
        if best is None or sse < best[3]:
            best = (y_inf, amp, tau, sse)

    theta, sse, iterations = _gauss_newton(t0, y, best[:3])
    y_inf, amp, tau = (float(v) for v in theta)
    if abs(amp) < 1e-8 * max(abs(y_inf), 1.0):
        raise NoDecay(f"fitted amplitude {amp} indistinguishable from zero")
    rmse = float(np.sqrt(sse / t.size))
    return ExpFit(y_inf, amp, tau, rmse, iterations)


def condition_correlation(
    torque: TimeSeries,
    pressure: TimeSeries,
    rest_window: tuple[float, float] = (0.5, 2.0),
    cutoff: float = 6.0,
    rate: float = 50.0,
) -> LinFit:
    """Pooled torque-pressure fit for one condition.

    Pipeline: resample both channels to a common 50 Hz grid, offset each by
    its rest-window mean, zero-phase lowpass, then OLS of pressure on torque
    across the full record.
    """
    lo_us = max(torque.t_us[0], pressure.t_us[0])
    hi_us = min(torque.t_us[-1], pressure.t_us[-1])
    step_us = int(round(1e6 / rate))
    n = int((hi_us - lo_us) // step_us) + 1
    grid = (lo_us + step_us * np.arange(n, dtype=np.int64)) / 1e6
    cols = merge_on_grid([torque, pressure], grid)
    tq = TimeSeries.from_seconds(grid, cols[:, 0], torque.unit, rate)
    pr = TimeSeries.from_seconds(grid, cols[:, 1], pressure.unit, rate)
    spec = FilterSpec(cutoff=cutoff, sample_rate=rate)
    t0, t1 = rest_window
    tq = lowpass_zero_phase(offset_by_rest(tq, t0, t1), spec)
    pr = lowpass_zero_phase(offset_by_rest(pr, t0, t1), spec)
    return linfit(tq.v, pr.v)


