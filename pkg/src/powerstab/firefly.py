"""Software-only mitigation: a filler workload triggered from sampled telemetry.

A secondary power-hungry workload is started when sampled GPU power falls
below a threshold. Because per-process counters do not exist, the filler
must periodically back off completely (a probe "notch") to see whether the
primary workload has resumed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .compliance import measure_dynamic_range, measure_ramps
from .smoothing import SmoothingProfile, apply_profile, overhead_fraction
from .spectral import NoACContent, analyze, band_energy_fraction
from .trace import DeviceModel, PowerTrace

TELEMETRY_MIN_S = 0.001
TELEMETRY_MAX_S = 0.1
RAMP_POLICIES = ("synchronous-step", "staggered")


@dataclass(frozen=True)
class FireflyConfig:
    """Filler controller settings.

    ``backoff_period_s`` may be ``math.inf`` (``null`` in JSON) to disable
    probing altogether. ``perf_overhead_frac`` is reported, not simulated.
    """

    telemetry_period_s: float = 0.001
    engage_threshold_w: float = 500.0
    fill_target_w: float = 950.0
    backoff_period_s: float = 1.0
    probe_duration_s: float = 0.01
    ramp_stagger: str = "synchronous-step"
    stagger_span_s: float = 0.0
    perf_overhead_frac: float = 0.05

    def __post_init__(self):
        if self.backoff_period_s is None:
            object.__setattr__(self, "backoff_period_s", math.inf)
        if not TELEMETRY_MIN_S <= self.telemetry_period_s <= TELEMETRY_MAX_S:
            raise ValueError(f"telemetry_period_s must lie in [{TELEMETRY_MIN_S}, {TELEMETRY_MAX_S}], "
                             f"got {self.telemetry_period_s}")
        if self.engage_threshold_w <= 0 or self.fill_target_w <= 0:
            raise ValueError("engage threshold and fill target must be positive")
        if not 0 < self.probe_duration_s < self.backoff_period_s:
            raise ValueError("need 0 < probe_duration_s < backoff_period_s")
        if self.ramp_stagger not in RAMP_POLICIES:
            raise ValueError(f"ramp_stagger must be one of {RAMP_POLICIES}")
        if self.ramp_stagger == "staggered" and self.stagger_span_s <= 0:
            raise ValueError("staggered ramp needs a positive stagger_span_s")
        if not 0 <= self.perf_overhead_frac < 1:
            raise ValueError("perf_overhead_frac must lie in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "FireflyConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["backoff_period_s"]):
            d["backoff_period_s"] = None
        return d

    @classmethod
    def load(cls, path: str | Path) -> "FireflyConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class FireflyResult:
    output: PowerTrace
    filler_trace: PowerTrace
    detection_latencies_s: list[float]
    energy_overhead_frac: float
    probe_notch_count: int
    perf_overhead_frac: float = 0.0


def simulate_firefly(raw: PowerTrace, device: DeviceModel, cfg: FireflyConfig) -> FireflyResult:
    """Simulate the filler controller against a raw device trace.

    Telemetry is read every ``telemetry_period_s`` on the trace grid. A
    reading below the threshold engages the filler from the next sample at
    ``fill_target - reading``; the level is refreshed at each later reading.
    Every ``backoff_period_s`` after engagement the filler drops to zero for
    ``probe_duration_s``; the last reading taken during that notch decides
    whether to re-engage or stop. Output is clamped at TDP.
    """
    if cfg.fill_target_w > device.tdp_w:
        raise ValueError(f"fill target {cfg.fill_target_w} W exceeds TDP {device.tdp_w} W")
    dt = raw.dt
    if dt > cfg.telemetry_period_s * (1 + 1e-9):
        raise ValueError("trace dt must not exceed the telemetry period")
    k = max(1, int(round(cfg.telemetry_period_s / dt)))
    backoff_n = None if math.isinf(cfg.backoff_period_s) else max(1, int(round(cfg.backoff_period_s / dt)))
    probe_n = max(1, int(round(cfg.probe_duration_s / dt)))
    stagger_n = int(round(cfg.stagger_span_s / dt)) if cfg.ramp_stagger == "staggered" else 0
    thr = cfg.engage_threshold_w
    fill = cfg.fill_target_w

    r = raw.samples.tolist()
    n = len(r)
    filler = [0.0] * n
    latencies = []
    notches = 0

    mode = "off"
    level = 0.0
    engage_start = 0
    next_probe = None
    probe_start = probe_end = 0
    reading = None
    onset = None

    for i in range(n):
        ri = r[i]
        if mode == "off":
            onset = (i if onset is None else onset) if ri < thr else None

        if mode == "probe" and i >= probe_end and reading is not None:
            if reading >= thr:
                mode = "off"
            else:
                mode = "on"
                level = max(fill - reading, 0.0)
                next_probe = probe_start + backoff_n
        if mode == "on" and i == next_probe:
            mode = "probe"
            probe_start, probe_end = i, i + probe_n
            reading = None
            notches += 1

        if mode == "on":
            f = level
            if stagger_n and i - engage_start < stagger_n:
                f *= (i - engage_start + 1) / stagger_n
            filler[i] = f

        if i % k == 0:
            if mode == "off" and ri < thr:
                mode = "on"
                engage_start = i + 1
                level = max(fill - ri, 0.0)
                next_probe = None if backoff_n is None else engage_start + backoff_n
                latencies.append((i + 1 - onset) * dt)
                onset = None
            elif mode == "on":
                level = max(fill - ri, 0.0)
            elif mode == "probe":
                reading = ri

    raw_s = raw.samples
    out = np.maximum(raw_s, np.minimum(raw_s + np.asarray(filler), device.tdp_w))
    output = raw.with_samples(out)
    e_raw = raw.energy("trapezoid")
    e_out = output.energy("trapezoid")
    overhead = overhead_fraction(e_raw, e_out)
    return FireflyResult(output, raw.with_samples(out - raw_s), latencies, overhead, notches,
                         cfg.perf_overhead_frac)


@dataclass
class MitigationMetrics:
    energy_overhead_frac: float
    max_ramp_up_w_per_s: float
    max_ramp_down_w_per_s: float
    dynamic_range_w: float
    band_fractions: dict[str, float | None]
    max_detection_latency_s: float | None = None
    risk_flags: list[str] = field(default_factory=list)


@dataclass
class MitigationComparison:
    raw: MitigationMetrics
    firefly: MitigationMetrics
    smoothing: MitigationMetrics

    def to_dict(self) -> dict:
        return {"raw": asdict(self.raw), "firefly": asdict(self.firefly), "smoothing": asdict(self.smoothing)}


def trace_metrics(trace: PowerTrace, bands: Sequence[tuple[float, float]],
                  ramp_window_s: float, dynamic_window_s: float) -> MitigationMetrics:
    up, _, down, _ = measure_ramps(trace, ramp_window_s)
    rng, _ = measure_dynamic_range(trace, dynamic_window_s)
    spectrum = analyze(trace)
    fractions: dict[str, float | None] = {}
    for lo, hi in bands:
        try:
            fractions[f"{lo:g}-{hi:g}Hz"] = band_energy_fraction(spectrum, lo, hi)
        except NoACContent:
            fractions[f"{lo:g}-{hi:g}Hz"] = None
    return MitigationMetrics(0.0, up, down, rng, fractions)


def compare_mitigations(raw: PowerTrace, device: DeviceModel, firefly_cfg: FireflyConfig,
                        smoothing_profile: SmoothingProfile,
                        bands: Sequence[tuple[float, float]] = ((0.1, 20.0),),
                        ramp_window_s: float = 1.0, dynamic_window_s: float = 1.0) -> MitigationComparison:
    """Run both device-level mitigations on ``raw`` and tabulate the metrics that matter for compliance."""
    ff = simulate_firefly(raw, device, firefly_cfg)
    sm = apply_profile(raw, device, smoothing_profile)

    base = trace_metrics(raw, bands, ramp_window_s, dynamic_window_s)
    ff_m = trace_metrics(ff.output, bands, ramp_window_s, dynamic_window_s)
    ff_m.energy_overhead_frac = ff.energy_overhead_frac
    ff_m.max_detection_latency_s = max(ff.detection_latencies_s, default=0.0)
    ff_m.risk_flags = ["shared GPU context couples primary and filler failure domains",
                       f"primary slowdown bounded at {ff.perf_overhead_frac:.0%} (accounting only)"]
    sm_m = trace_metrics(sm.output, bands, ramp_window_s, dynamic_window_s)
    sm_m.energy_overhead_frac = sm.overhead_frac
    return MitigationComparison(base, ff_m, sm_m)
