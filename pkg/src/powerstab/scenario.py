"""End-to-end fleet scenarios: generate, mitigate, aggregate, check.

A scenario is one JSON document::

    {
      "workload": {... WorkloadModel fields ..., "duration_s": 300, "dt_s": 0.01},
      "device": {... DeviceModel fields ...},
      "fleet": {"gpus_per_server": 8, "servers_per_rack": 4, "racks": 1800,
                "host_overhead_w": 6000, "stagger_offsets_s": null, "label": ""},
      "mitigations": [{"kind": "smoothing", "profile": {...}},
                      {"kind": "firefly", "config": {...}},
                      {"kind": "storage", "config": {...}}],
      "spec": {... UtilitySpec fields ...} or "path/to/spec.json",
      "seed": 0,
      "outdir": "out",
      "backstop": {... BackstopConfig fields ...}      (optional)
    }

Every GPU in the fleet runs the same synchronized job, so one device trace
is simulated and the fleet is built by aggregation and exact scaling.
Device-level mitigations (smoothing, firefly) act on the device trace;
storage acts on the rack trace and must come after them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .backstop import BackstopConfig, BackstopEvent, events_csv, run_offline
from .compliance import ComplianceReport, UtilitySpec, check
from .firefly import FireflyConfig, simulate_firefly
from .hierarchy import ServerModel, aggregate
from .plotting import plot_svg, spectrum_series, trace_series
from .smoothing import SmoothingProfile, apply_profile
from .spectral import analyze, save_spectrum_csv
from .storage import StorageConfig, StorageResult, simulate_storage
from .trace import DeviceModel, PowerTrace, WorkloadModel, gen_training_trace, save_csv

DEVICE_LEVEL = ("smoothing", "firefly")
RACK_LEVEL = ("storage",)


class ScenarioError(ValueError):
    """Invalid scenario document."""


@dataclass(frozen=True)
class FleetModel:
    gpus_per_server: int = 8
    servers_per_rack: int = 4
    racks: int = 1
    host_overhead_w: float = 6000.0
    stagger_offsets_s: tuple[float, ...] | None = None
    label: str = ""

    def __post_init__(self):
        if self.servers_per_rack < 1 or self.racks < 1:
            raise ScenarioError("servers_per_rack and racks must be >= 1")

    @property
    def server(self) -> ServerModel:
        return ServerModel(self.gpus_per_server, self.host_overhead_w, self.stagger_offsets_s, self.label)


@dataclass
class Scenario:
    workload: WorkloadModel
    device: DeviceModel
    fleet: FleetModel
    mitigations: list[tuple[str, object]]
    spec: UtilitySpec
    duration_s: float
    dt_s: float
    seed: int = 0
    outdir: Path | None = None
    backstop: BackstopConfig | None = None

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "Scenario":
        base_dir = Path(base_dir or ".")
        try:
            wl = dict(doc["workload"])
            duration = float(wl.pop("duration_s"))
            dt = float(wl.pop("dt_s", 0.001))
            seed = int(doc.get("seed", wl.get("rng_seed", 0)))
            wl["rng_seed"] = seed
            workload = WorkloadModel.from_dict(wl)
            device = DeviceModel.from_dict(doc.get("device", {}))
            fleet = FleetModel(**doc.get("fleet", {}))
            spec = UtilitySpec.from_dict(_resolve(doc["spec"], base_dir))
            mitigations = [_parse_mitigation(m, base_dir) for m in doc.get("mitigations", [])]
            backstop = BackstopConfig.from_dict(_resolve(doc["backstop"], base_dir)) if doc.get("backstop") else None
        except KeyError as exc:
            raise ScenarioError(f"missing scenario field {exc}") from None
        except TypeError as exc:
            raise ScenarioError(str(exc)) from None
        seen_rack = False
        for kind, _ in mitigations:
            if kind in RACK_LEVEL:
                seen_rack = True
            elif seen_rack:
                raise ScenarioError(f"device-level mitigation {kind!r} cannot follow rack-level storage")
        outdir = doc.get("outdir")
        return cls(workload, device, fleet, mitigations, spec, duration, dt, seed,
                   (base_dir / outdir) if outdir else None, backstop)

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


def _resolve(value, base_dir: Path) -> dict:
    if isinstance(value, str):
        return json.loads((base_dir / value).read_text(encoding="utf-8"))
    return dict(value)


def _parse_mitigation(m: dict, base_dir: Path) -> tuple[str, object]:
    kind = m.get("kind")
    if kind == "smoothing":
        return kind, SmoothingProfile.from_dict(_resolve(m["profile"], base_dir))
    if kind == "firefly":
        return kind, FireflyConfig.from_dict(_resolve(m["config"], base_dir))
    if kind == "storage":
        return kind, StorageConfig.from_dict(_resolve(m["config"], base_dir))
    raise ScenarioError(f"unknown mitigation kind {kind!r}")


@dataclass
class ScenarioResult:
    device_raw: PowerTrace
    device_out: PowerTrace
    raw_aggregate: PowerTrace
    grid: PowerTrace
    report: ComplianceReport
    storage: StorageResult | None = None
    energy_overheads: dict[str, float] = field(default_factory=dict)
    backstop_events: list[BackstopEvent] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if self.report.passed else 1


def _fleet_trace(device_trace: PowerTrace, fleet: FleetModel) -> PowerTrace:
    server = aggregate([device_trace] * fleet.gpus_per_server, fleet.stagger_offsets_s, fleet.host_overhead_w)
    return server.scaled(fleet.servers_per_rack)


def run_scenario(sc: Scenario) -> ScenarioResult:
    device_raw = gen_training_trace(sc.device, sc.workload, sc.duration_s, sc.dt_s)
    device_out = device_raw
    overheads: dict[str, float] = {}
    storage_cfg = None
    for kind, cfg in sc.mitigations:
        if kind == "smoothing":
            res = apply_profile(device_out, sc.device, cfg)
            device_out = res.output
            overheads["smoothing"] = res.overhead_frac
        elif kind == "firefly":
            res = simulate_firefly(device_out, sc.device, cfg)
            device_out = res.output
            overheads["firefly"] = res.energy_overhead_frac
        else:
            storage_cfg = cfg

    raw_rack = _fleet_trace(device_raw, sc.fleet)
    rack = _fleet_trace(device_out, sc.fleet)
    storage = None
    if storage_cfg is not None:
        storage = simulate_storage(rack, storage_cfg)
        rack = storage.grid
        overheads["storage"] = (rack.energy() - _fleet_trace(device_out, sc.fleet).energy()) / raw_rack.energy()
    raw_fleet = raw_rack.scaled(sc.fleet.racks)
    grid = rack.scaled(sc.fleet.racks)
    report = check(grid, sc.spec)
    events = run_offline(grid, sc.backstop) if sc.backstop else []
    return ScenarioResult(device_raw, device_out, raw_fleet, grid, report, storage, overheads, events)


def write_artifacts(sc: Scenario, result: ScenarioResult, outdir: str | Path) -> list[Path]:
    """Write CSV/JSON/SVG outputs of a scenario run; returns the paths written."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def _p(name):
        p = out / name
        written.append(p)
        return p

    save_csv(result.raw_aggregate, _p("raw_aggregate.csv"))
    save_csv(result.grid, _p("grid.csv"))
    _p("report.json").write_text(result.report.to_json(), encoding="utf-8", newline="\n")
    summary = {"pass": result.report.passed, "energy_overheads": result.energy_overheads,
               "mitigations": [k for k, _ in sc.mitigations], "seed": sc.seed,
               "raw_energy_j": result.raw_aggregate.energy(), "grid_energy_j": result.grid.energy()}
    _p("summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8", newline="\n")
    spectrum = analyze(result.grid)
    save_spectrum_csv(spectrum, _p("spectrum.csv"))
    plot_svg([trace_series(result.raw_aggregate, "raw aggregate"), trace_series(result.grid, "grid")],
             _p("power.svg"), title="Fleet power", y_label="power (W)")
    plot_svg([spectrum_series(spectrum, "grid spectrum")], _p("spectrum.svg"),
             title="Grid spectrum", x_label="frequency (Hz)", y_label="magnitude (W)")
    if result.storage is not None:
        soc = result.storage
        _p("soc.csv").write_text(soc.soc_trace_csv(), encoding="utf-8", newline="\n")
        rack_grid = soc.grid
        plot_svg([trace_series(rack_grid, "rack grid power"),
                  trace_series(rack_grid.with_samples(soc.soc), "state of charge", axis="right")],
                 _p("storage.svg"), title="Rack storage", y_label="power (W)", y2_label="stored energy (J)")
    if sc.backstop is not None:
        _p("backstop_events.csv").write_text(events_csv(result.backstop_events), encoding="utf-8", newline="\n")
    return written
