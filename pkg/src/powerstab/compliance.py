"""Utility time-domain and frequency-domain limits and compliance checks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .spectral import NoACContent, analyze, band_energy_fraction
from .trace import PowerTrace

# Measured values within this relative margin of a limit still pass; it only
# absorbs float rounding in windowed sums.
LIMIT_RTOL = 1e-9


@dataclass(frozen=True)
class Band:
    f_lo_hz: float
    f_hi_hz: float
    max_energy_fraction: float

    def __post_init__(self):
        if not 0 < self.f_lo_hz < self.f_hi_hz:
            raise ValueError(f"band needs 0 < f_lo < f_hi, got [{self.f_lo_hz}, {self.f_hi_hz}]")
        if not 0 < self.max_energy_fraction <= 1:
            raise ValueError(f"band fraction cap must lie in (0, 1], got {self.max_energy_fraction}")

    @property
    def label(self) -> str:
        return f"{self.f_lo_hz:g}-{self.f_hi_hz:g}Hz"

    @classmethod
    def coerce(cls, b) -> "Band":
        if isinstance(b, Band):
            return b
        if isinstance(b, dict):
            return cls(**b)
        return cls(*b)


@dataclass(frozen=True)
class UtilitySpec:
    """Limits a utility places on a load's power draw.

    Ramp limits are in W/s measured as finite differences over
    ``ramp_measure_window_s``; ``dynamic_range_w`` bounds max minus min over
    any ``dynamic_window_s`` window. Each band caps the share of non-DC
    spectral energy inside it.
    """

    ramp_up_limit_w_per_s: float
    ramp_down_limit_w_per_s: float
    dynamic_range_w: float
    dynamic_window_s: float = 1.0
    bands: tuple[Band, ...] = ()
    ramp_measure_window_s: float = 1.0
    metric: str = "energy"
    scheduling_interval_s: float = 300.0

    def __post_init__(self):
        for name in ("ramp_up_limit_w_per_s", "ramp_down_limit_w_per_s", "dynamic_range_w",
                     "dynamic_window_s", "ramp_measure_window_s", "scheduling_interval_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        bands = tuple(sorted((Band.coerce(b) for b in self.bands), key=lambda b: b.f_lo_hz))
        for a, b in zip(bands, bands[1:]):
            if b.f_lo_hz < a.f_hi_hz:
                raise ValueError(f"bands {a.label} and {b.label} overlap")
        object.__setattr__(self, "bands", bands)
        if self.metric not in ("energy", "amplitude", "peak"):
            raise ValueError(f"unknown spectral metric {self.metric!r}")

    def relaxed(self, **changes) -> "UtilitySpec":
        d = asdict(self)
        d.update(changes)
        return UtilitySpec.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "UtilitySpec":
        d = dict(d)
        d["bands"] = tuple(Band.coerce(b) for b in d.get("bands", ()))
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bands"] = [asdict(b) for b in self.bands]
        return d

    @classmethod
    def load(cls, path: str | Path) -> "UtilitySpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ComplianceRecord:
    id: str
    measured: float
    limit: float
    unit: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "measured": self.measured, "limit": self.limit,
                "unit": self.unit, "pass": self.passed, "detail": self.detail}


@dataclass
class ComplianceReport:
    records: list[ComplianceRecord] = field(default_factory=list)
    interval_means_w: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def __getitem__(self, record_id: str) -> ComplianceRecord:
        for r in self.records:
            if r.id == record_id:
                return r
        raise KeyError(record_id)

    def failures(self) -> list[ComplianceRecord]:
        return [r for r in self.records if not r.passed]

    def merged(self, other: "ComplianceReport") -> "ComplianceReport":
        return ComplianceReport(self.records + other.records,
                                self.interval_means_w or other.interval_means_w)

    def to_dict(self) -> dict:
        return {"pass": self.passed,
                "records": [r.to_dict() for r in self.records],
                "interval_means_w": self.interval_means_w}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _within(measured: float, limit: float) -> bool:
    return measured <= limit * (1 + LIMIT_RTOL)


def sliding_max(x: np.ndarray, m: int) -> np.ndarray:
    """Max over every length-``m`` window of ``x`` (van Herk / Gil-Werman)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if not 1 <= m <= n:
        raise ValueError(f"window {m} out of range for {n} samples")
    if m == 1:
        return x.copy()
    pad = (-n) % m
    xp = np.concatenate((x, np.full(pad, -np.inf))).reshape(-1, m)
    prefix = np.maximum.accumulate(xp, axis=1).reshape(-1)
    suffix = np.maximum.accumulate(xp[:, ::-1], axis=1)[:, ::-1].reshape(-1)
    starts = np.arange(n - m + 1)
    return np.maximum(suffix[starts], prefix[starts + m - 1])


def sliding_range(x: np.ndarray, m: int) -> np.ndarray:
    return sliding_max(x, m) + sliding_max(-np.asarray(x, dtype=float), m)


def measure_ramps(trace: PowerTrace, window_s: float) -> tuple[float, float, float, float]:
    """Worst ramp-up and ramp-down rates over ``window_s`` finite differences.

    Returns ``(up_w_per_s, up_time_s, down_w_per_s, down_time_s)``; rates
    are non-negative and times mark the start of the worst window.
    """
    k = max(1, int(round(window_s / trace.dt)))
    if len(trace) <= k:
        raise ValueError(f"trace of {trace.duration:g} s is shorter than the {window_s:g} s ramp window")
    x = trace.samples
    rates = (x[k:] - x[:-k]) / (k * trace.dt)
    iu, idn = int(np.argmax(rates)), int(np.argmin(rates))
    up = max(float(rates[iu]), 0.0)
    down = max(float(-rates[idn]), 0.0)
    t = trace.origin_time
    return up, t + iu * trace.dt, down, t + idn * trace.dt


def measure_dynamic_range(trace: PowerTrace, window_s: float) -> tuple[float, float]:
    """Largest max-minus-min over any ``window_s`` window, and where it starts."""
    m = max(1, int(round(window_s / trace.dt)))
    if len(trace) < m:
        raise ValueError(f"trace of {trace.duration:g} s is shorter than the {window_s:g} s dynamic window")
    r = sliding_range(trace.samples, m)
    i = int(np.argmax(r))
    return float(r[i]), trace.origin_time + i * trace.dt


def interval_means(trace: PowerTrace, interval_s: float) -> list[float]:
    """Mean power per scheduling interval (a trailing partial interval included)."""
    k = max(1, int(round(interval_s / trace.dt)))
    x = trace.samples
    return [float(np.mean(x[i:i + k])) for i in range(0, x.size, k)]


def check_time_domain(trace: PowerTrace, spec: UtilitySpec) -> ComplianceReport:
    up, t_up, down, t_down = measure_ramps(trace, spec.ramp_measure_window_s)
    rng, t_rng = measure_dynamic_range(trace, spec.dynamic_window_s)
    records = [
        ComplianceRecord("ramp_up", up, spec.ramp_up_limit_w_per_s, "W/s",
                         _within(up, spec.ramp_up_limit_w_per_s), f"worst window starts t={t_up:.6g} s"),
        ComplianceRecord("ramp_down", down, spec.ramp_down_limit_w_per_s, "W/s",
                         _within(down, spec.ramp_down_limit_w_per_s), f"worst window starts t={t_down:.6g} s"),
        ComplianceRecord("dynamic_range", rng, spec.dynamic_range_w, "W",
                         _within(rng, spec.dynamic_range_w), f"worst window starts t={t_rng:.6g} s"),
    ]
    return ComplianceReport(records, interval_means(trace, spec.scheduling_interval_s))


def check_frequency_domain(trace: PowerTrace, spec: UtilitySpec) -> ComplianceReport:
    records = []
    if not spec.bands:
        return ComplianceReport(records)
    for band in spec.bands:
        if trace.duration < 2.0 / band.f_lo_hz * (1 - 1e-12):
            raise ValueError(f"band {band.label}: trace of {trace.duration:g} s is shorter than "
                             f"2/f_lo = {2.0 / band.f_lo_hz:g} s")
        if band.f_hi_hz > 0.5 / trace.dt * (1 + 1e-12):
            raise ValueError(f"band {band.label}: upper edge above Nyquist {0.5 / trace.dt:g} Hz")
    spectrum = analyze(trace)
    for band in spec.bands:
        rid = f"band_{band.label}"
        try:
            frac = band_energy_fraction(spectrum, band.f_lo_hz, band.f_hi_hz, spec.metric)
        except NoACContent:
            records.append(ComplianceRecord(rid, 0.0, band.max_energy_fraction, "fraction", True,
                                            "no-AC-content: constant trace passes vacuously"))
            continue
        records.append(ComplianceRecord(rid, frac, band.max_energy_fraction, "fraction",
                                        _within(frac, band.max_energy_fraction),
                                        f"{spec.metric} fraction in [{band.f_lo_hz:g}, {band.f_hi_hz:g}] Hz"))
    return ComplianceReport(records)


def check(trace: PowerTrace, spec: UtilitySpec) -> ComplianceReport:
    """Run the time-domain and frequency-domain checks together."""
    return check_time_domain(trace, spec).merged(check_frequency_domain(trace, spec))
