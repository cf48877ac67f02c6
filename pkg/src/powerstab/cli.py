"""Command-line entry point.

Exit codes: 0 success, 1 compliance failure (``check`` and ``scenario``),
2 usage or input error (one-line diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backstop import BackstopConfig, events_csv, run_offline
from .compliance import UtilitySpec, check
from .firefly import FireflyConfig, simulate_firefly
from .plotting import plot_svg, spectrum_series, trace_series
from .scenario import Scenario, run_scenario, write_artifacts
from .smoothing import SmoothingProfile, apply_profile
from .spectral import NoACContent, analyze, band_energy_fraction, dominant_frequency, save_spectrum_csv
from .storage import StorageConfig, simulate_storage
from .trace import DeviceModel, WorkloadModel, gen_square_wave, gen_training_trace, load_csv, save_csv

PROG = "powerstab"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _json_file(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _device(path: str | None) -> DeviceModel:
    return DeviceModel.from_dict(_json_file(path))


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def cmd_gen(args) -> int:
    if args.kind == "square":
        missing = [f for f in ("period", "duty", "high", "low") if getattr(args, f) is None]
        if missing:
            raise UsageError(f"--kind square needs --{', --'.join(missing)}")
        trace = gen_square_wave(args.period, args.duty, args.high, args.low, args.duration, args.dt)
    else:
        workload = _json_file(args.workload)
        if args.seed is not None:
            workload["rng_seed"] = args.seed
        trace = gen_training_trace(_device(args.device), WorkloadModel.from_dict(workload), args.duration, args.dt)
    save_csv(trace, args.out)
    if args.svg:
        plot_svg([trace_series(trace, args.kind)], args.svg, title="Generated trace")
    return 0


def cmd_smooth(args) -> int:
    raw = load_csv(args.trace)
    res = apply_profile(raw, _device(args.device), SmoothingProfile.load(args.profile))
    save_csv(res.output, args.out)
    if args.timeline:
        _write(args.timeline, res.timeline_csv())
    if args.svg:
        plot_svg([trace_series(raw, "raw"), trace_series(res.output, "smoothed")], args.svg, title="Power smoothing")
    _emit({"overhead_frac": res.overhead_frac, "raw_energy_j": res.raw_energy_j,
           "output_energy_j": res.output_energy_j, "floor_engaged_s": res.floor_engaged_s})
    return 0


def cmd_firefly(args) -> int:
    raw = load_csv(args.trace)
    res = simulate_firefly(raw, _device(args.device), FireflyConfig.load(args.config))
    save_csv(res.output, args.out)
    if args.svg:
        plot_svg([trace_series(raw, "raw"), trace_series(res.output, "with filler")], args.svg, title="Filler workload")
    _emit({"energy_overhead_frac": res.energy_overhead_frac, "probe_notch_count": res.probe_notch_count,
           "max_detection_latency_s": max(res.detection_latencies_s, default=0.0),
           "engage_events": len(res.detection_latencies_s), "perf_overhead_frac": res.perf_overhead_frac})
    return 0


def cmd_storage(args) -> int:
    load = load_csv(args.trace)
    res = simulate_storage(load, StorageConfig.load(args.config))
    save_csv(res.grid, args.out)
    if args.soc:
        _write(args.soc, res.soc_trace_csv())
    if args.svg:
        plot_svg([trace_series(load, "load"), trace_series(res.grid, "grid"),
                  trace_series(res.grid.with_samples(res.soc), "state of charge", axis="right")],
                 args.svg, title="Rack storage", y2_label="stored energy (J)")
    _emit({"peak_grid_w": res.peak_grid_w, "trough_grid_w": res.trough_grid_w,
           "soc_final_j": float(res.soc[-1]), "soc_init_j": res.soc_init_j,
           "saturation_events": [{"time_s": t, "kind": k} for t, k in res.saturation_events]})
    return 0


def cmd_analyze(args) -> int:
    trace = load_csv(args.trace)
    spectrum = analyze(trace)
    if args.out:
        save_spectrum_csv(spectrum, args.out)
    if args.svg:
        plot_svg([spectrum_series(spectrum, "magnitude")], args.svg, title="Spectrum",
                 x_label="frequency (Hz)", y_label="magnitude (W)")
    summary = {"dominant_hz": None, "bands": {}}
    try:
        summary["dominant_hz"] = dominant_frequency(spectrum)
        for lo, hi in args.band or []:
            summary["bands"][f"{lo:g}-{hi:g}Hz"] = band_energy_fraction(spectrum, lo, hi, args.metric)
    except NoACContent:
        summary["note"] = "no AC content"
    _emit(summary)
    return 0


def cmd_check(args) -> int:
    report = check(load_csv(args.trace), UtilitySpec.load(args.spec))
    text = report.to_json()
    if args.report:
        _write(args.report, text)
    sys.stdout.write(text)
    return 0 if report.passed else 1


def cmd_backstop(args) -> int:
    trace = load_csv(args.trace)
    cfg = BackstopConfig.load(args.config) if args.config else BackstopConfig()
    events = run_offline(trace, cfg)
    text = events_csv(events)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_scenario(args) -> int:
    sc = Scenario.load(args.config)
    if args.seed is not None:
        sc.seed = args.seed
        sc.workload = WorkloadModel.from_dict(dict(sc.workload.to_dict(), rng_seed=args.seed))
    result = run_scenario(sc)
    outdir = args.outdir or sc.outdir
    if outdir:
        write_artifacts(sc, result, outdir)
    sys.stdout.write(result.report.to_json())
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Power-stabilization simulator for AI training fleets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic power trace")
    g.add_argument("--kind", choices=("square", "training"), required=True)
    g.add_argument("--period", type=float, help="square-wave period (s)")
    g.add_argument("--duty", type=float, help="fraction of each period at --high")
    g.add_argument("--high", type=float, help="high level (W)")
    g.add_argument("--low", type=float, help="low level (W)")
    g.add_argument("--workload", help="workload model JSON (training kind)")
    g.add_argument("--device", help="device model JSON (training kind)")
    g.add_argument("--seed", type=int, help="overrides the workload rng_seed")
    g.add_argument("--duration", type=float, required=True, help="seconds")
    g.add_argument("--dt", type=float, default=0.001, help="sample interval (s)")
    g.add_argument("--out", required=True)
    g.add_argument("--svg")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("smooth", help="apply a device-level smoothing profile")
    s.add_argument("--trace", required=True)
    s.add_argument("--profile", required=True)
    s.add_argument("--device")
    s.add_argument("--out", required=True)
    s.add_argument("--timeline", help="write the controller state timeline CSV")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_smooth)

    f = sub.add_parser("firefly", help="simulate the telemetry-triggered filler workload")
    f.add_argument("--trace", required=True)
    f.add_argument("--config", required=True)
    f.add_argument("--device")
    f.add_argument("--out", required=True)
    f.add_argument("--svg")
    f.set_defaults(func=cmd_firefly)

    st = sub.add_parser("storage", help="simulate rack-level energy storage")
    st.add_argument("--trace", required=True)
    st.add_argument("--config", required=True)
    st.add_argument("--out", required=True)
    st.add_argument("--soc", help="write the state-of-charge CSV")
    st.add_argument("--svg")
    st.set_defaults(func=cmd_storage)

    a = sub.add_parser("analyze", help="amplitude spectrum and band fractions")
    a.add_argument("--trace", required=True)
    a.add_argument("--out", help="spectrum CSV")
    a.add_argument("--band", nargs=2, type=float, action="append", metavar=("LO", "HI"))
    a.add_argument("--metric", choices=("energy", "amplitude", "peak"), default="energy")
    a.add_argument("--svg")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("check", help="check a trace against a utility spec")
    c.add_argument("--trace", required=True)
    c.add_argument("--spec", required=True)
    c.add_argument("--report", help="also write the report JSON here")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("backstop", help="run the spectral backstop over a trace")
    b.add_argument("--trace", required=True)
    b.add_argument("--config")
    b.add_argument("--out", help="event CSV (default: stdout)")
    b.set_defaults(func=cmd_backstop)

    sc = sub.add_parser("scenario", help="run an end-to-end fleet scenario")
    sc.add_argument("--config", required=True)
    sc.add_argument("--outdir", help="overrides the scenario outdir")
    sc.add_argument("--seed", type=int, help="overrides the scenario seed")
    sc.set_defaults(func=cmd_scenario)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"{PROG}: usage error: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"{PROG}: error: {msg}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
