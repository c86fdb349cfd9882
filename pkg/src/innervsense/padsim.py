"""Forward model of the fluidically innervated pad plus generators for the
four experiment families, producing ground-truth and measured streams.

The pad is linear from force to pressure by construction (p = a*f + b up to
bend offset, noise and saturation); the nonlinearity and stress relaxation
live in the displacement-to-force path, which is what bench testing shows.
Relaxation is modeled in the force domain: under a held displacement the
total force decays as f_hold * (r + (1 - r) * exp(-dt/tau)), so pressure
follows the same exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import TimeSeries, Unit
from .errors import BadParams, NonFiniteInput, UnknownScenario

PRESSURE_RATE_HZ = 50.0
RAMP_TRUTH_RATE_HZ = 100.0
DYNO_TRUTH_RATE_HZ = 1000.0

# default condition gains (pad force per joint torque, N per N.m); these are
# configuration that reproduces the qualitative strong/weak condition ordering
DEFAULT_CONDITION_GAINS = {
    ("above_knee", "flexion"): 0.6,
    ("above_knee", "extension"): 0.0,
    ("below_knee", "flexion"): 0.1,
    ("below_knee", "extension"): 0.2,
}

BICEP_MASSES_KG = (0.0, 0.5, 1.0, 2.27, 4.54)
BICEP_PAUSE_ANGLES_DEG = (120.0, 135.0, 150.0)


@dataclass(frozen=True)
class PadParams:
    a: float = 30.7  # Pa/N calibration slope
    b: float = 13.9  # Pa intercept
    tau: float = 26.6  # s relaxation time constant
    r: float = 0.5  # retained force fraction after full relaxation
    p_sat: float = 3114.0  # Pa saturation ceiling
    k1: float = 8.0  # N/mm linear stiffness
    k3: float = 0.128  # N/mm^3 cubic stiffness (~100 N near 7 mm)
    c_h: float = 2.0  # N.s/mm rate term producing hysteresis
    kappa_bend: float = 2.0  # Pa/deg bend sensitivity (reports negative pressure)
    noise_sigma: float = 5.0  # Pa

    def __post_init__(self):
        if not (self.a > 0 and self.tau > 0 and self.p_sat > 0):
            raise BadParams("require a > 0, tau > 0, p_sat > 0")
        if not (0.0 <= self.r <= 1.0):
            raise BadParams(f"r must be in [0, 1], got {self.r}")
        if self.noise_sigma < 0:
            raise BadParams("noise_sigma must be >= 0")


@dataclass(frozen=True)
class PadState:
    d: float = 0.0  # mm current compression
    f_relax: float = 0.0  # N relaxing force component
    t: float = 0.0  # s

    def __post_init__(self):
        if self.d < 0 or self.f_relax < 0:
            raise BadParams("state requires d >= 0 and f_relax >= 0")


def elastic_force(d_mm: float, params: PadParams) -> float:
    return params.k1 * d_mm + params.k3 * d_mm**3


def displacement_for_force(f_n: float, params: PadParams) -> float:
    """Invert the cubic elastic law by bisection (monotone for d >= 0)."""
    if f_n <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while elastic_force(hi, params) < f_n:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if elastic_force(mid, params) < f_n:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def measure_pressure(f_n, bend_deg, params: PadParams, rng=None):
    """Force (plus bend) to measured pressure: linear map, noise, saturation.

    Negative force cannot pull on the transducer, so the force term floors at
    zero; bending alone drives the reading below the rest intercept.
    """
    f = np.maximum(np.asarray(f_n, dtype=np.float64), 0.0)
    p = params.a * f + params.b - params.kappa_bend * np.asarray(bend_deg, dtype=np.float64)
    if rng is not None and params.noise_sigma > 0:
        p = p + rng.normal(0.0, params.noise_sigma, size=np.shape(p))
    return np.minimum(p, params.p_sat)


def step_pad(state: PadState, d_next: float, bend: float, dt: float, params: PadParams,
             rng=None) -> tuple[PadState, float, float]:
    """Advance the displacement-driven pad model by one step.

    Returns (new_state, f_meas in N, p_meas in Pa).
    """
    if not (math.isfinite(d_next) and math.isfinite(bend)):
        raise NonFiniteInput(f"d_next={d_next}, bend={bend}")
    if dt <= 0:
        raise BadParams(f"dt must be positive, got {dt}")
    f_e_prev = elastic_force(state.d, params)
    f_e_next = elastic_force(max(d_next, 0.0), params)
    # relaxing component: exact per-step exponential decay plus the
    # non-retained share of any elastic force change
    f_relax = state.f_relax * math.exp(-dt / params.tau) + (1.0 - params.r) * (f_e_next - f_e_prev)
    f_relax = max(f_relax, 0.0)
    f_c = params.c_h * (d_next - state.d) / dt
    f_c = max(f_c, -f_e_next)
    f_meas = max(params.r * f_e_next + f_relax + f_c, 0.0)
    p_meas = float(measure_pressure(f_meas, bend, params, rng))
    new_state = PadState(d=max(d_next, 0.0), f_relax=f_relax, t=state.t + dt)
    return new_state, f_meas, p_meas


@dataclass(frozen=True)
class Event:
    t_s: float
    label: str
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"t_s": self.t_s, "label": self.label, "payload": dict(self.payload)}


@dataclass
class SessionData:
    """One simulated run: measured pressure, ground truth, annotations."""

    scenario: str
    seed: int
    params: PadParams
    pressure: TimeSeries  # Pa at 50 Hz
    truth: dict[str, TimeSeries]
    events: list[Event]
    scenario_params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SteadyStateTable:
    """(angle, mass) -> pad force map, linear in angle, exact-match in mass."""

    angles_deg: tuple[float, ...]
    masses_kg: tuple[float, ...]
    forces_n: np.ndarray  # shape (n_masses, n_angles)

    def force(self, angle_deg, mass_kg: float) -> np.ndarray:
        try:
            row = self.masses_kg.index(mass_kg)
        except ValueError:
            raise BadParams(f"mass {mass_kg} kg not in table {self.masses_kg}") from None
        return np.interp(np.asarray(angle_deg, dtype=np.float64), self.angles_deg, self.forces_n[row])


def _pressure_targets_to_forces(p_targets: np.ndarray, params: PadParams) -> np.ndarray:
    return np.maximum((p_targets - params.b) / params.a, 0.0)


def default_bicep_table(params: PadParams) -> SteadyStateTable:
    """Angle/mass force table tuned to the reported peak pressures.

    Peaks at full flexion: 2000 Pa unloaded, 1200 Pa at 1 kg, 600-800 Pa for
    the other masses (a non-monotonic mass effect); each mass row rises
    strictly with elbow angle.
    """
    angles = (90.0, 120.0, 135.0, 150.0, 160.0)
    shape = np.array([0.0, 0.45, 0.7, 0.9, 1.0])  # fraction of (peak - rest)
    rest_pa = 100.0
    peaks_pa = {0.0: 2000.0, 0.5: 800.0, 1.0: 1200.0, 2.27: 700.0, 4.54: 600.0}
    rows = []
    for mass in BICEP_MASSES_KG:
        p = rest_pa + (peaks_pa[mass] - rest_pa) * shape
        rows.append(_pressure_targets_to_forces(p, params))
    return SteadyStateTable(angles, BICEP_MASSES_KG, np.asarray(rows))


def default_squat_table(params: PadParams) -> SteadyStateTable:
    """Knee-angle force table for the thigh-strap pad (single mass row)."""
    angles = (0.0, 30.0, 60.0, 90.0)
    p = np.array([150.0, 300.0, 550.0, 800.0])
    return SteadyStateTable(angles, (0.0,), _pressure_targets_to_forces(p, params)[None, :])


def _pressure_grid(duration_s: float) -> np.ndarray:
    n = int(round(duration_s * PRESSURE_RATE_HZ)) + 1
    return np.arange(n) / PRESSURE_RATE_HZ


def _series(t_s, v, unit: Unit, rate: float) -> TimeSeries:
    return TimeSeries.from_seconds(t_s, v, unit, rate)


def _run_displacement_scenario(d_of_t, bend_of_t, duration_s, params: PadParams, rng):
    """Step the pad at 100 Hz; sample pressure on the 50 Hz grid."""
    dt = 1.0 / RAMP_TRUTH_RATE_HZ
    n = int(round(duration_s * RAMP_TRUTH_RATE_HZ)) + 1
    t = np.arange(n) * dt
    state = PadState()
    force = np.zeros(n)
    p_clean = np.zeros(n)
    disp = np.zeros(n)
    for i, ti in enumerate(t):
        d_next = float(d_of_t(ti))
        bend = float(bend_of_t(ti))
        if i == 0:
            state = PadState(d=max(d_next, 0.0), f_relax=0.0, t=0.0)
            f = elastic_force(state.d, params) * params.r + state.f_relax
            force[i] = max(f, 0.0)
        else:
            state, f_meas, _ = step_pad(state, d_next, bend, dt, params, rng=None)
            force[i] = f_meas
        disp[i] = state.d
        p_clean[i] = measure_pressure(force[i], bend, params, rng=None)
    # pressure on the 50 Hz grid: every other 100 Hz step, noise per sample
    idx = np.arange(0, n, int(RAMP_TRUTH_RATE_HZ // PRESSURE_RATE_HZ))
    p = p_clean[idx].copy()
    if params.noise_sigma > 0:
        p = p + rng.normal(0.0, params.noise_sigma, size=p.shape)
        p = np.minimum(p, params.p_sat)
    return t, disp, force, t[idx], p


def _scenario_ramp_hold_unload(params: PadParams, sp: dict, rng) -> SessionData:
    rate = float(sp.get("rate_mm_s", 1.0))
    f_max = float(sp.get("f_max_n", 100.0))
    hold_s = float(sp.get("hold_s", 10.0))
    if rate <= 0 or f_max <= 0 or hold_s < 0:
        raise BadParams("ramp_hold_unload requires positive rate, f_max, hold_s")
    # displacement where the elastic branch alone reaches f_max; the rate term
    # means measured force crosses f_max slightly earlier, which is fine
    d_top = displacement_for_force(f_max, params)
    t_up = d_top / rate
    duration = 2.0 * t_up + hold_s

    def d_of_t(ti):
        if ti < t_up:
            return rate * ti
        if ti < t_up + hold_s:
            return d_top
        return max(d_top - rate * (ti - t_up - hold_s), 0.0)

    t, disp, force, tp, p = _run_displacement_scenario(d_of_t, lambda ti: 0.0, duration, params, rng)
    events = [
        Event(0.0, "phase", {"phase": "load"}),
        Event(t_up, "phase", {"phase": "hold"}),
        Event(t_up + hold_s, "phase", {"phase": "unload"}),
        Event(duration, "phase", {"phase": "end"}),
    ]
    truth = {
        "force_n": _series(t, force, Unit.N, RAMP_TRUTH_RATE_HZ),
        "displacement_mm": _series(t, disp, Unit.MM, RAMP_TRUTH_RATE_HZ),
    }
    return SessionData("ramp_hold_unload", sp["seed"], params,
                       _series(tp, p, Unit.PA, PRESSURE_RATE_HZ), truth, events, sp)


def _scenario_step_hold_relax(params: PadParams, sp: dict, rng) -> SessionData:
    f_target = float(sp.get("f_target_n", 20.0))
    hold_s = float(sp.get("hold_s", 120.0))
    rest_s = float(sp.get("rest_s", 2.0))
    tail_s = float(sp.get("tail_s", 2.0))
    if f_target <= 0 or hold_s <= 0:
        raise BadParams("step_hold_relax requires positive f_target and hold_s")
    d_step = displacement_for_force(f_target, params)
    duration = rest_s + hold_s + tail_s

    def d_of_t(ti):
        return d_step if rest_s <= ti < rest_s + hold_s else 0.0

    t, disp, force, tp, p = _run_displacement_scenario(d_of_t, lambda ti: 0.0, duration, params, rng)
    # the step transient (rate term) occupies exactly the jump sample; the
    # hold window for fitting starts one pressure sample later
    hold_start = math.ceil(rest_s * PRESSURE_RATE_HZ + 1) / PRESSURE_RATE_HZ
    events = [
        Event(0.0, "phase", {"phase": "rest"}),
        Event(hold_start, "phase", {"phase": "hold"}),
        Event(rest_s + hold_s, "phase", {"phase": "unload"}),
        Event(duration, "phase", {"phase": "end"}),
    ]
    truth = {
        "force_n": _series(t, force, Unit.N, RAMP_TRUTH_RATE_HZ),
        "displacement_mm": _series(t, disp, Unit.MM, RAMP_TRUTH_RATE_HZ),
    }
    return SessionData("step_hold_relax", sp["seed"], params,
                       _series(tp, p, Unit.PA, PRESSURE_RATE_HZ), truth, events, sp)


def _torque_profile(t: np.ndarray, t0: float, torque_nm: float, ramp_s: float = 0.5,
                    hold_s: float = 5.0) -> np.ndarray:
    """One trial: smooth rise to the target, hold, smooth release."""
    out = np.zeros_like(t)
    rel = t - t0
    rise = (rel >= 0) & (rel < ramp_s)
    out[rise] = torque_nm * 0.5 * (1 - np.cos(np.pi * rel[rise] / ramp_s))
    hold = (rel >= ramp_s) & (rel < ramp_s + hold_s)
    out[hold] = torque_nm
    fall = (rel >= ramp_s + hold_s) & (rel < 2 * ramp_s + hold_s)
    out[fall] = torque_nm * 0.5 * (1 + np.cos(np.pi * (rel[fall] - ramp_s - hold_s) / ramp_s))
    return out


def _scenario_dynamometer(params: PadParams, sp: dict, rng) -> SessionData:
    direction = sp.get("direction", "flexion")
    location = sp.get("location", "above_knee")
    torque_nm = float(sp.get("torque_nm", 10.0))
    n_trials = int(sp.get("n_trials", 4))
    rest_s = float(sp.get("rest_s", 5.0))
    hold_s = float(sp.get("hold_s", 5.0))
    if direction not in ("flexion", "extension") or location not in ("above_knee", "below_knee"):
        raise BadParams(f"unknown condition ({location}, {direction})")
    if n_trials < 1 or torque_nm <= 0:
        raise BadParams("dynamometer needs n_trials >= 1 and positive torque")
    gains = dict(DEFAULT_CONDITION_GAINS)
    gains.update({tuple(k.split("/")): v for k, v in sp.get("condition_gains", {}).items()})
    gain = float(gains[(location, direction)])

    trial_len = rest_s + hold_s + rest_s
    duration = n_trials * trial_len
    nt = int(round(duration * DYNO_TRUTH_RATE_HZ)) + 1
    t = np.arange(nt) / DYNO_TRUTH_RATE_HZ
    torque = np.zeros(nt)
    events = []
    for k in range(n_trials):
        start = k * trial_len
        torque += _torque_profile(t, start + rest_s - 0.5, torque_nm, ramp_s=0.5, hold_s=hold_s)
        events.append(Event(start, "trial_start", {"trial": k, "direction": direction,
                                                   "location": location}))
        events.append(Event(start + rest_s, "phase", {"phase": "hold", "trial": k}))
        events.append(Event(start + rest_s + hold_s, "phase", {"phase": "rest", "trial": k}))
        events.append(Event(start + trial_len, "trial_stop", {"trial": k}))

    tp = _pressure_grid(duration)
    torque_at_tp = np.interp(tp, t, torque)
    p = measure_pressure(gain * torque_at_tp, 0.0, params, rng)
    truth = {"torque_nm": _series(t, torque, Unit.NM, DYNO_TRUTH_RATE_HZ)}
    return SessionData("dynamometer_trial", sp["seed"], params,
                       _series(tp, p, Unit.PA, PRESSURE_RATE_HZ), truth, events, sp)


def _scenario_bicep_full_cycles(params: PadParams, sp: dict, rng) -> SessionData:
    mass = float(sp.get("mass_kg", 0.0))
    n_cycles = int(sp.get("n_cycles", 5))
    cycle_s = float(sp.get("cycle_s", 4.0))
    lead_s = float(sp.get("lead_s", 2.0))
    if n_cycles < 1 or cycle_s <= 0:
        raise BadParams("bicep_full_cycles needs n_cycles >= 1 and positive cycle_s")
    table = sp.get("table") or default_bicep_table(params)
    a_lo, a_hi = 90.0, float(sp.get("full_flexion_deg", 160.0))
    duration = lead_s + n_cycles * cycle_s
    tp = _pressure_grid(duration)
    angle = np.full_like(tp, a_lo)
    active = tp >= lead_s
    phase = (tp[active] - lead_s) / cycle_s * 2 * np.pi
    angle[active] = a_lo + (a_hi - a_lo) * 0.5 * (1 - np.cos(phase))
    force = table.force(angle, mass)
    p = measure_pressure(force, 0.0, params, rng)
    events = [Event(0.0, "phase", {"phase": "rest", "mass_kg": mass})]
    for k in range(n_cycles):
        events.append(Event(lead_s + k * cycle_s, "cycle_start", {"cycle": k, "mass_kg": mass}))
    events.append(Event(duration, "cycle_end", {"cycle": n_cycles - 1, "mass_kg": mass}))
    truth = {"angle_deg": _series(tp, angle, Unit.DEG, PRESSURE_RATE_HZ)}
    return SessionData("bicep_full_cycles", sp["seed"], params,
                       _series(tp, p, Unit.PA, PRESSURE_RATE_HZ), truth, events, sp)


def _scenario_bicep_stepwise(params: PadParams, sp: dict, rng) -> SessionData:
    masses = tuple(float(m) for m in sp.get("masses_kg", BICEP_MASSES_KG))
    angles = tuple(float(a) for a in sp.get("angles_deg", BICEP_PAUSE_ANGLES_DEG))
    n_cycles = int(sp.get("n_cycles", 5))
    hold_s = float(sp.get("hold_s", 4.0))
    move_s = float(sp.get("move_s", 1.0))
    if n_cycles < 1 or hold_s <= 0 or move_s <= 0:
        raise BadParams("bicep_stepwise needs n_cycles >= 1, positive hold_s and move_s")
    table = sp.get("table") or default_bicep_table(params)
    for m in masses:
        table.force(90.0, m)  # validates the mass list up front

    # piecewise angle profile: 90 -> hold(angle_1) -> ... -> back to 90
    seg_angles = []
    events = []
    t_cursor = 0.0
    base = 90.0

    def add_seg(a0, a1, dur):
        nonlocal t_cursor
        seg_angles.append((t_cursor, t_cursor + dur, a0, a1))
        t_cursor += dur

    for mass in masses:
        events.append(Event(t_cursor, "mass_start", {"mass_kg": mass}))
        for k in range(n_cycles):
            events.append(Event(t_cursor, "cycle_start", {"cycle": k, "mass_kg": mass}))
            prev = base
            for angle in angles:
                add_seg(prev, angle, move_s)
                events.append(Event(t_cursor, "hold", {"angle_deg": angle, "mass_kg": mass,
                                                       "cycle": k, "hold_s": hold_s}))
                add_seg(angle, angle, hold_s)
                prev = angle
            add_seg(prev, base, move_s)
        events.append(Event(t_cursor, "mass_end", {"mass_kg": mass}))
    duration = t_cursor

    tp = _pressure_grid(duration)
    angle = np.empty_like(tp)
    bounds = np.array([s[0] for s in seg_angles] + [duration])
    seg_idx = np.clip(np.searchsorted(bounds, tp, side="right") - 1, 0, len(seg_angles) - 1)
    for i, (t0, t1, a0, a1) in enumerate(seg_angles):
        m = seg_idx == i
        if not np.any(m):
            continue
        frac = (tp[m] - t0) / (t1 - t0)
        angle[m] = a0 + (a1 - a0) * np.clip(frac, 0.0, 1.0)

    mass_of_t = np.empty_like(tp)
    block = duration / len(masses)
    for i, mass in enumerate(masses):
        m = (tp >= i * block - 1e-9) & (tp < (i + 1) * block + 1e-9)
        mass_of_t[m] = mass
    force = np.empty_like(tp)
    for mass in masses:
        m = mass_of_t == mass
        force[m] = table.force(angle[m], mass)
    p = measure_pressure(force, 0.0, params, rng)
    truth = {"angle_deg": _series(tp, angle, Unit.DEG, PRESSURE_RATE_HZ)}
    return SessionData("bicep_stepwise", sp["seed"], params,
                       _series(tp, p, Unit.PA, PRESSURE_RATE_HZ), truth, events, sp)


def _scenario_squats(params: PadParams, sp: dict, rng) -> SessionData:
    n_reps = int(sp.get("n_reps", 10))
    cycle_s = float(sp.get("cycle_s", 2.0))
    stand_s = float(sp.get("stand_s", 4.0))
    max_knee_deg = float(sp.get("max_knee_deg", 90.0))
    if n_reps < 1 or cycle_s <= 0:
        raise BadParams("squats needs n_reps >= 1 and positive cycle_s")
    table = sp.get("table") or default_squat_table(params)
    duration = stand_s + n_reps * cycle_s
    tp = _pressure_grid(duration)
    angle = np.zeros_like(tp)
    active = tp >= stand_s
    phase = (tp[active] - stand_s) / cycle_s * 2 * np.pi
    angle[active] = max_knee_deg * 0.5 * (1 - np.cos(phase))
    force = table.force(angle, table.masses_kg[0])
    p = measure_pressure(force, 0.0, params, rng)
    events = [Event(0.0, "phase", {"phase": "stand"})]
    for k in range(n_reps):
        events.append(Event(stand_s + k * cycle_s, "cycle_start", {"cycle": k}))
        events.append(Event(stand_s + (k + 0.5) * cycle_s, "metronome", {"half_cycle": 2 * k + 1}))
    events.append(Event(duration, "cycle_end", {"cycle": n_reps - 1}))
    truth = {"angle_deg": _series(tp, angle, Unit.DEG, PRESSURE_RATE_HZ)}
    return SessionData("squats", sp["seed"], params,
                       _series(tp, p, Unit.PA, PRESSURE_RATE_HZ), truth, events, sp)


_SCENARIOS = {
    "ramp_hold_unload": _scenario_ramp_hold_unload,
    "step_hold_relax": _scenario_step_hold_relax,
    "dynamometer_trial": _scenario_dynamometer,
    "bicep_full_cycles": _scenario_bicep_full_cycles,
    "bicep_stepwise": _scenario_bicep_stepwise,
    "squats": _scenario_squats,
}

SCENARIO_NAMES = tuple(_SCENARIOS)


def run_scenario(name: str, params: PadParams | None = None, scenario_params: dict | None = None,
                 seed: int = 0) -> SessionData:
    """Run one named scenario deterministically for (name, params, seed)."""
    if name not in _SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")
    params = params or PadParams()
    sp = dict(scenario_params or {})
    sp["seed"] = int(seed)
    rng = np.random.default_rng(int(seed))
    return _SCENARIOS[name](params, sp, rng)


def params_from_config(cfg: dict) -> PadParams:
    """PadParams from a flat config dict, unknown keys ignored."""
    fields = {f for f in PadParams.__dataclass_fields__}
    kwargs = {k: float(v) for k, v in cfg.items() if k in fields}
    return replace(PadParams(), **kwargs) if kwargs else PadParams()
