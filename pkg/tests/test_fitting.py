import numpy as np
import pytest

from innervsense.core import TimeSeries, Unit, merge_on_grid
from innervsense.errors import DegenerateX, FlatSignal, LengthMismatch, NoDecay, TooFewSamples
from innervsense.fitting import condition_correlation, expfit, linfit, _gauss_newton
from innervsense.padsim import PadParams, run_scenario


def fd_objective_gradient(t, y, theta, h_rel=1e-7):
    """Central-difference gradient of the SSE objective (independent oracle)."""

    def sse(th):
        r = th[0] + th[1] * np.exp(-t / th[2]) - y
        return float(r @ r)

    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros(3)
    for i in range(3):
        h = h_rel * max(abs(theta[i]), 1.0)
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (sse(up) - sse(dn)) / (2 * h)
    return grad


def test_linfit_exact_line():
    x = np.arange(10.0)
    fit = linfit(x, 2.0 * x + 1.0)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(1.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.n == 10


def test_linfit_recovers_simulator_calibration():
    data = run_scenario("ramp_hold_unload", params=PadParams(noise_sigma=0.0), seed=1)
    force = merge_on_grid([data.truth["force_n"]], data.pressure.t)[:, 0]
    fit = linfit(force, data.pressure.v)
    assert fit.slope == pytest.approx(30.7, rel=1e-6)
    assert fit.intercept == pytest.approx(13.9, rel=1e-6)


def test_linfit_constant_y_convention():
    fit = linfit(np.arange(5.0), np.full(5, 3.0))
    assert fit.slope == 0.0
    assert fit.r2 == 0.0
    assert fit.degenerate_y


def test_linfit_degenerate_x():
    with pytest.raises(DegenerateX):
        linfit(np.full(5, 1.0), np.arange(5.0))


def test_linfit_length_mismatch():
    with pytest.raises(LengthMismatch):
        linfit(np.arange(5.0), np.arange(6.0))
    with pytest.raises(TooFewSamples):
        linfit(np.arange(2.0), np.arange(2.0))


def test_linfit_permutation_invariance(rng):
    x = rng.normal(size=100)
    y = 3.0 * x + rng.normal(size=100)
    fit = linfit(x, y)
    perm = rng.permutation(100)
    fit_p = linfit(x[perm], y[perm])
    assert fit.slope == pytest.approx(fit_p.slope, rel=1e-12)
    assert fit.r2 == pytest.approx(fit_p.r2, rel=1e-12)


def test_linfit_affine_equivariance(rng):
    x = rng.normal(size=50)
    y = rng.normal(size=50)
    base = linfit(x, y)
    scaled = linfit(x, 4.0 * y + 7.0)
    assert scaled.slope == pytest.approx(4.0 * base.slope, rel=1e-9)
    assert scaled.intercept == pytest.approx(4.0 * base.intercept + 7.0, rel=1e-9)
    assert scaled.r2 == pytest.approx(base.r2, rel=1e-9)


def _decay(t, y_inf=100.0, amp=50.0, tau=26.6):
    return y_inf + amp * np.exp(-t / tau)


def test_expfit_noise_free_recovery():
    t = np.arange(0, 120.0, 0.02)
    fit = expfit(t, _decay(t))
    assert fit.tau == pytest.approx(26.6, abs=0.01)
    assert fit.y_inf == pytest.approx(100.0, rel=1e-6)
    assert fit.amplitude == pytest.approx(50.0, rel=1e-6)


def test_expfit_monte_carlo_tau_within_2pct():
    t = np.arange(0, 120.0, 0.02)
    clean = _decay(t)
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        fit = expfit(t, clean + rng.normal(0.0, 2.0, size=t.size))
        worst = max(worst, abs(fit.tau - 26.6) / 26.6)
    assert worst < 0.02


def test_expfit_flat_signal():
    t = np.arange(0, 10.0, 0.1)
    with pytest.raises(FlatSignal):
        expfit(t, np.full_like(t, 5.0))


def test_expfit_no_decay():
    t = np.arange(0, 10.0, 0.1)
    with pytest.raises(NoDecay):
        expfit(t, 1e-12 * np.exp(-t))


def test_expfit_gradient_at_convergence():
    t = np.arange(0, 120.0, 0.02)
    y = _decay(t)
    fit = expfit(t, y)
    grad = fd_objective_gradient(t, y, (fit.y_inf, fit.amplitude, fit.tau))
    assert np.linalg.norm(grad) < 1e-8


def test_expfit_recovery_from_any_grid_cell():
    # Gauss-Newton lands on the same optimum to 6 significant digits no
    # matter which tau grid cell seeds it
    t = np.arange(0, 60.0, 0.05)
    y = _decay(t, y_inf=10.0, amp=200.0, tau=7.5)
    span = t[-1] - t[0]
    for tau0 in np.geomspace(0.1 * span, 10.0 * span, 12):
        e = np.exp(-t / tau0)
        design = np.column_stack([np.ones_like(t), e])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        theta, _, _ = _gauss_newton(t, y, (coef[0], coef[1], tau0))
        assert theta[2] == pytest.approx(7.5, rel=1e-6)
        assert theta[0] == pytest.approx(10.0, rel=1e-6)


def test_expfit_too_short_and_nonmonotone():
    with pytest.raises(TooFewSamples):
        expfit(np.arange(5.0), np.arange(5.0))
    t = np.arange(20.0)
    t[10] = t[9]
    with pytest.raises(ValueError):
        expfit(t, np.exp(-np.arange(20.0)))


def _trapezoid_series(gain_pa_per_nm, noise, seed):
    data = run_scenario(
        "dynamometer_trial",
        params=PadParams(noise_sigma=noise),
        scenario_params={"condition_gains": {"above_knee/flexion": gain_pa_per_nm}},
        seed=seed,
    )
    return data.truth["torque_nm"], data.pressure


def test_condition_correlation_strong_condition():
    torque, pressure = _trapezoid_series(0.6, 5.0, 2)
    fit = condition_correlation(torque, pressure)
    assert fit.r2 >= 0.9


def test_condition_correlation_exact_proportionality():
    t = np.arange(0, 15.0, 0.02)
    torque = np.clip(np.sin(2 * np.pi * t / 15.0), 0, None) * 10.0
    tq = TimeSeries.from_seconds(t, torque, Unit.NM, 50.0)
    pr = TimeSeries.from_seconds(t, 20.0 * torque, Unit.PA, 50.0)
    fit = condition_correlation(tq, pr)
    assert fit.slope == pytest.approx(20.0, rel=1e-6)
    assert fit.r2 == pytest.approx(1.0, abs=1e-9)


def test_condition_correlation_zero_gain_noise_floor():
    torque, pressure = _trapezoid_series(0.0, 5.0, 7)
    fit = condition_correlation(torque, pressure)
    assert fit.r2 < 0.1
