"""Single executable: simulation, device emulation, recording, serving,
analysis, and reporting as subcommands.

Conventions: analysis subcommands print one JSON summary to stdout;
diagnostics and pretty tables go to stderr; exit 0 on success, 2 on usage
errors, 1 on runtime errors. INNERVSENSE_LOG sets log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import cycles as cyc
from . import fitting, stats
from .core import TimeSeries, merge_on_grid
from .errors import InnervsenseError
from .padsim import Event, PadParams, SCENARIO_NAMES, params_from_config, run_scenario
from .session import Session, read_session, write_derived, write_session
from .telemetry import session_frames

log = logging.getLogger("innervsense.cli")


def load_config(path) -> dict:
    """Flat `key = value` config; values are JSON fragments, else strings."""
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        key, _, value = line.partition("=")
        value = value.strip()
        try:
            cfg[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            cfg[key.strip()] = value
    return cfg


def _emit(obj) -> None:
    print(json.dumps(obj))


def _simulate_session(args) -> Session:
    cfg = load_config(args.config) if args.config else {}
    params = params_from_config(cfg)
    data = run_scenario(args.scenario, params=params, scenario_params=cfg, seed=args.seed)
    return Session.from_sessiondata(data)


def cmd_simulate(args) -> int:
    session = _simulate_session(args)
    write_session(args.out, session, overwrite=args.overwrite)
    _emit({
        "session": str(args.out),
        "scenario": args.scenario,
        "seed": args.seed,
        "samples": len(session.pressure_series()),
        "events": len(session.events),
    })
    return 0


def cmd_device_emu(args) -> int:
    from .server import emulator_listen

    cfg = load_config(args.config) if args.config else {}
    params = params_from_config(cfg)
    data = run_scenario(args.scenario, params=params, scenario_params=cfg, seed=args.seed)
    frames = session_frames(
        data.pressure, [(e.t_s, json.dumps(e.to_dict())) for e in data.events]
    )

    def on_ready(host, port):
        print(json.dumps({"listening": f"{host}:{port}"}), flush=True)

    report = emulator_listen(frames, args.listen, pacing=args.pacing, on_ready=on_ready)
    _emit({
        "frames_sent": report.frames_sent,
        "events_sent": report.events_sent,
        "duration_s": report.duration_s,
        "completed": report.completed,
    })
    return 0


def cmd_record(args) -> int:
    from .server import record_stream

    health = record_stream(args.connect, args.out, max_seconds=args.max_seconds)
    _emit({"session": str(args.out), **health.snapshot()})
    return 0


def cmd_serve(args) -> int:
    import time as _time

    from .server import (
        DashboardServer,
        IngestClient,
        Publisher,
        Recorder,
        SessionReplayer,
        default_ui_root,
        start_static_server,
    )

    publisher = Publisher()
    source = args.source
    session_dir = None
    recorder = None
    if Path(source).is_dir():
        session_dir = Path(source)
        feeder = SessionReplayer(source, publisher, pacing="realtime")
    else:
        if args.out:
            recorder = Recorder(args.out, source)
            session_dir = Path(args.out)
        feeder = IngestClient(source, publisher, raw_sink=recorder)

    ws_port = args.ui_port + 1
    dashboard = DashboardServer(publisher, ws_port, session_dir=session_dir,
                                health=feeder.health)
    httpd, _ = start_static_server(args.ui_root or default_ui_root(), args.ui_port)
    dashboard.start()
    feeder.start()
    print(json.dumps({
        "ui": f"http://127.0.0.1:{args.ui_port}/",
        "stream": f"ws://127.0.0.1:{ws_port}/stream",
        "control": f"ws://127.0.0.1:{ws_port}/control",
    }), flush=True)
    deadline = _time.monotonic() + args.max_seconds if args.max_seconds else None
    try:
        while deadline is None or _time.monotonic() < deadline:
            _time.sleep(0.25)
    except KeyboardInterrupt:
        pass
    finally:
        feeder.stop()
        dashboard.stop()
        httpd.shutdown()
        publisher.close()
        if recorder is not None:
            recorder.finalize(feeder.health)
    return 0


def _load_session(path) -> Session:
    return read_session(path)


def _phase_time(session: Session, phase: str) -> float | None:
    for e in session.events_with_payload("phase"):
        if e.payload.get("phase") == phase:
            return e.t_s
    return None


def cmd_analyze_calibrate(args) -> int:
    session = _load_session(args.session)
    pressure = session.pressure_series()
    truth = session.truth.get("force_n")
    if truth is None:
        raise InnervsenseError("session has no force ground truth (need a ramp scenario)")
    cols = merge_on_grid([truth], pressure.t)
    fit = fitting.linfit(cols[:, 0], pressure.v)
    out = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
           "n": fit.n, "residual_sd": fit.residual_sd}
    write_derived(args.session, "calibration.json", json.dumps(out, indent=2) + "\n")
    _emit(out)
    return 0


def cmd_analyze_relax(args) -> int:
    session = _load_session(args.session)
    pressure = session.pressure_series()
    t0 = _phase_time(session, "hold")
    t1 = _phase_time(session, "unload")
    if t0 is None:
        raise InnervsenseError("session has no hold phase annotation")
    if t1 is None:
        t1 = pressure.span[1]
    window = pressure.slice_time(t0, t1)
    fit = fitting.expfit(window.t - window.t[0], window.v)
    out = {"tau": fit.tau, "y_inf": fit.y_inf, "amplitude": fit.amplitude,
           "rmse": fit.rmse, "iterations": fit.iterations}
    write_derived(args.session, "relaxation.json", json.dumps(out, indent=2) + "\n")
    _emit(out)
    return 0


def cmd_analyze_condition(args) -> int:
    session = _load_session(args.session)
    pressure = session.pressure_series()
    torque = session.truth.get("torque_nm")
    if torque is None:
        raise InnervsenseError("session has no torque ground truth (need dynamometer_trial)")
    fit = fitting.condition_correlation(
        torque, pressure, rest_window=tuple(args.rest), cutoff=args.cutoff
    )
    out = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2, "n": fit.n,
           "rest_window_s": list(args.rest), "cutoff_hz": args.cutoff}
    write_derived(args.session, "condition.json", json.dumps(out, indent=2) + "\n")
    _emit(out)
    return 0


def _cycle_boundaries(session: Session) -> list[tuple[float, float]]:
    starts = [e for e in session.events_with_payload("cycle_start")]
    if not starts:
        raise InnervsenseError("session has no cycle_start annotations")
    ends = session.events_with_payload("cycle_end")
    bounds = []
    for i, e in enumerate(starts):
        if i + 1 < len(starts):
            t1 = starts[i + 1].t_s
        elif ends:
            t1 = ends[-1].t_s
        else:
            raise InnervsenseError("last cycle has no end annotation")
        bounds.append((e.t_s, t1))
    return bounds


def cmd_analyze_cycles(args) -> int:
    session = _load_session(args.session)
    pressure = session.pressure_series()
    cs = cyc.segment_cycles(pressure, _cycle_boundaries(session))
    cs = cyc.normalize_cycles(cs, n_points=args.points)
    mean, sd = cyc.ensemble_stats(cs)
    csv_text = cyc.ensemble_csv(cs, mean, sd)
    path = write_derived(args.session, "ensemble.csv", csv_text)
    out = {
        "n_cycles": len(cs.cycles),
        "n_points": args.points,
        "peak_mean_pa": float(mean.max()),
        "peak_pct": float(cs.grid[int(mean.argmax())]),
        "max_sd_pa": float(sd.max()),
        "csv": str(path),
    }
    write_derived(args.session, "cycles.json", json.dumps(out, indent=2) + "\n")
    _emit(out)
    return 0


def _steady_records(session: Session, window_s: float) -> list[dict]:
    pressure = session.pressure_series()
    holds = session.events_with_payload("hold")
    records = []
    for e in holds:
        hold_s = float(e.payload.get("hold_s", window_s * 2))
        window = pressure.slice_time(e.t_s, e.t_s + hold_s)
        ss = cyc.steady_state_cov(window, window_len=window_s)
        records.append({
            "angle_deg": e.payload.get("angle_deg"),
            "mass_kg": e.payload.get("mass_kg"),
            "rep": e.payload.get("cycle"),
            "pressure_pa": ss.value,
            "cov": ss.cov,
            "window_start_s": ss.window_start,
        })
    return records


def cmd_analyze_steady(args) -> int:
    session = _load_session(args.session)
    records = _steady_records(session, args.window)
    if not records:
        pressure = session.pressure_series()
        ss = cyc.steady_state_cov(pressure, window_len=args.window)
        records = [{"angle_deg": None, "mass_kg": None, "rep": None,
                    "pressure_pa": ss.value, "cov": ss.cov,
                    "window_start_s": ss.window_start}]
    out = {"window_s": args.window, "holds": records}
    write_derived(args.session, "steady.json", json.dumps(out, indent=2) + "\n")
    _emit(out)
    return 0


def cmd_analyze_anova(args) -> int:
    if args.table:
        table = stats.FactorialTable.from_csv(args.table)
        session_dir = None
    else:
        if not args.session:
            raise InnervsenseError("need --table CSV or --session DIR")
        session = _load_session(args.session)
        records = _steady_records(session, args.window)
        if not records:
            raise InnervsenseError("session has no hold annotations (need bicep_stepwise)")
        table = stats.FactorialTable.from_records(records)
        session_dir = args.session
    result = stats.anova2(table)
    post = {
        factor: stats.posthoc(table, result, factor, method=args.method, alpha=args.alpha).to_dict()
        for factor in ("A", "B")
    }
    out = {
        "anova": result.to_dict(),
        "posthoc": post,
        "factor_a": "angle_deg",
        "factor_b": "mass_kg",
        "cell_means": {
            str(a): {str(b): float(table.observations[i, j].mean())
                     for j, b in enumerate(table.factor_b_levels)}
            for i, a in enumerate(table.factor_a_levels)
        },
    }
    print(result.format_table(), file=sys.stderr)
    if session_dir:
        write_derived(session_dir, "anova.json", json.dumps(out, indent=2) + "\n")
    _emit(out)
    return 0


def cmd_report(args) -> int:
    session = _load_session(args.session)
    scenario = session.manifest.get("scenario", "")
    report: dict = {"session": str(args.session), "scenario": scenario,
                    "manifest": session.manifest}
    lines = [f"# Session report: {session.manifest.get('id', args.session)}", ""]
    lines.append(f"- scenario: `{scenario or 'recorded'}`")
    pressure = session.pressure_series()
    lo, hi = pressure.span
    report["samples"] = len(pressure)
    report["duration_s"] = hi - lo
    lines.append(f"- samples: {len(pressure)} over {hi - lo:.2f} s")
    if session.health is not None:
        report["stream_health"] = session.health.snapshot()

    if "force_n" in session.truth:
        cols = merge_on_grid([session.truth["force_n"]], pressure.t)
        fit = fitting.linfit(cols[:, 0], pressure.v)
        report["calibration"] = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
        lines.append(f"- calibration: slope {fit.slope:.3f} Pa/N, intercept "
                     f"{fit.intercept:.2f} Pa, R^2 {fit.r2:.4f}")
    if scenario == "step_hold_relax":
        t0, t1 = _phase_time(session, "hold"), _phase_time(session, "unload")
        window = pressure.slice_time(t0, t1 if t1 is not None else pressure.span[1])
        efit = fitting.expfit(window.t - window.t[0], window.v)
        report["relaxation"] = {"tau_s": efit.tau, "y_inf": efit.y_inf,
                                "amplitude": efit.amplitude}
        lines.append(f"- relaxation: tau {efit.tau:.2f} s")
    if scenario == "dynamometer_trial" and "torque_nm" in session.truth:
        fit = fitting.condition_correlation(session.truth["torque_nm"], pressure)
        report["condition"] = {"slope": fit.slope, "r2": fit.r2}
        lines.append(f"- torque correlation: R^2 {fit.r2:.3f}")
    if scenario in ("bicep_full_cycles", "squats"):
        cs = cyc.normalize_cycles(cyc.segment_cycles(pressure, _cycle_boundaries(session)))
        mean, sd = cyc.ensemble_stats(cs)
        report["ensemble"] = {"n_cycles": len(cs.cycles),
                              "peak_mean_pa": float(mean.max()),
                              "max_sd_pa": float(sd.max())}
        lines.append(f"- ensemble: {len(cs.cycles)} cycles, peak mean {mean.max():.0f} Pa")
    if scenario == "bicep_stepwise":
        records = _steady_records(session, 2.0)
        table = stats.FactorialTable.from_records(records)
        result = stats.anova2(table)
        report["anova"] = result.to_dict()
        post = stats.posthoc(table, result, "B")
        report["posthoc_mass"] = post.to_dict()
        lines.append(f"- ANOVA: angle F({result.effect_a.df},{result.df_error}) = "
                     f"{result.effect_a.f:.1f}, p = {result.effect_a.p:.2g}")

    md = "\n".join(lines) + "\n"
    write_derived(args.session, "report.md", md)
    write_derived(args.session, "report.json", json.dumps(report, indent=2) + "\n")
    _emit(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="innervsense",
        description="Fluidically innervated pressure-pad toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and persist the session")
    sim.add_argument("--scenario", required=True, choices=SCENARIO_NAMES)
    sim.add_argument("--config", help="key = value config file")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="session directory to create")
    sim.add_argument("--overwrite", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    emu = sub.add_parser("device-emu", help="stream a scenario over TCP like a device")
    emu.add_argument("--scenario", required=True, choices=SCENARIO_NAMES)
    emu.add_argument("--config", help="key = value config file")
    emu.add_argument("--seed", type=int, default=0)
    emu.add_argument("--listen", default="127.0.0.1:0", help="host:port (0 = ephemeral)")
    emu.add_argument("--pacing", choices=("realtime", "max"), default="realtime")
    emu.set_defaults(func=cmd_device_emu)

    rec = sub.add_parser("record", help="ingest a device stream into a session")
    rec.add_argument("--connect", required=True, help="host:port of the device")
    rec.add_argument("--out", required=True)
    rec.add_argument("--max-seconds", type=float, default=None)
    rec.set_defaults(func=cmd_record)

    srv = sub.add_parser("serve", help="host the live dashboard endpoints")
    srv.add_argument("--source", required=True, help="device host:port or session dir")
    srv.add_argument("--ui-port", type=int, required=True)
    srv.add_argument("--ui-root", default=None, help="static asset root (default: frontend/dist)")
    srv.add_argument("--out", default=None, help="record the live stream into this session dir")
    srv.add_argument("--max-seconds", type=float, default=None, help="exit after this long")
    srv.set_defaults(func=cmd_serve)

    ana = sub.add_parser("analyze", help="run one analysis over a session")
    ana_sub = ana.add_subparsers(dest="analysis", required=True)

    cal = ana_sub.add_parser("calibrate", help="force-pressure linear calibration")
    cal.add_argument("--session", required=True)
    cal.set_defaults(func=cmd_analyze_calibrate)

    rel = ana_sub.add_parser("relax", help="stress-relaxation exponential fit")
    rel.add_argument("--session", required=True)
    rel.set_defaults(func=cmd_analyze_relax)

    con = ana_sub.add_parser("condition", help="torque-pressure condition correlation")
    con.add_argument("--session", required=True)
    con.add_argument("--rest", type=float, nargs=2, default=(0.5, 2.0),
                     metavar=("T0", "T1"))
    con.add_argument("--cutoff", type=float, default=6.0)
    con.set_defaults(func=cmd_analyze_condition)

    cyc_p = ana_sub.add_parser("cycles", help="segment, normalize, and ensemble-average")
    cyc_p.add_argument("--session", required=True)
    cyc_p.add_argument("--points", type=int, default=100)
    cyc_p.set_defaults(func=cmd_analyze_cycles)

    ste = ana_sub.add_parser("steady", help="min-CoV steady-state extraction")
    ste.add_argument("--session", required=True)
    ste.add_argument("--window", type=float, default=2.0)
    ste.set_defaults(func=cmd_analyze_steady)

    ano = ana_sub.add_parser("anova", help="two-way ANOVA with post-hoc letters")
    ano.add_argument("--session")
    ano.add_argument("--table", help="CSV with angle_deg, mass_kg, rep, pressure_pa")
    ano.add_argument("--window", type=float, default=2.0)
    ano.add_argument("--method", choices=("fisher_lsd", "tukey_hsd"), default="fisher_lsd")
    ano.add_argument("--alpha", type=float, default=0.05)
    ano.set_defaults(func=cmd_analyze_anova)

    rep = sub.add_parser("report", help="aggregated markdown + JSON for a session")
    rep.add_argument("--session", required=True)
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("INNERVSENSE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InnervsenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc.strerror or 'not found'}: {exc.filename}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
