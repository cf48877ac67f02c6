"""Streaming spectral backstop with tiered, hysteretic escalation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .spectral import MIN_SAMPLES, NoACContent, analyze_samples, band_energy_fraction
from .trace import PowerTrace


class Action(str, Enum):
    ALERT = "Alert"
    SOFT_THROTTLE = "SoftThrottle"
    SHED = "Shed"
    DEESCALATE = "Deescalate"


TIER_ACTIONS = (Action.ALERT, Action.SOFT_THROTTLE, Action.SHED)


@dataclass(frozen=True)
class BackstopConfig:
    window_s: float = 4.0
    hop_s: float = 1.0
    bands: tuple[tuple[float, float], ...] = ((0.1, 20.0),)
    tier_thresholds: tuple[float, float, float] = (0.2, 0.35, 0.5)
    deescalate_after: int = 3
    metric: str = "energy"

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple((float(lo), float(hi)) for lo, hi in self.bands))
        object.__setattr__(self, "tier_thresholds", tuple(float(t) for t in self.tier_thresholds))
        if not 0 < self.hop_s <= self.window_s:
            raise ValueError("need 0 < hop_s <= window_s")
        if not self.bands:
            raise ValueError("need at least one band")
        for lo, hi in self.bands:
            if not 0 < lo < hi:
                raise ValueError(f"bad band [{lo}, {hi}]")
        t = self.tier_thresholds
        if len(t) != len(TIER_ACTIONS):
            raise ValueError(f"need exactly {len(TIER_ACTIONS)} tier thresholds")
        if not (0 < t[0] < t[1] < t[2] <= 1):
            raise ValueError("tier thresholds must be strictly ascending in (0, 1]")
        if self.deescalate_after < 1:
            raise ValueError("deescalate_after must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "BackstopConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        return {"window_s": self.window_s, "hop_s": self.hop_s, "bands": [list(b) for b in self.bands],
                "tier_thresholds": list(self.tier_thresholds), "deescalate_after": self.deescalate_after,
                "metric": self.metric}

    @classmethod
    def load(cls, path: str | Path) -> "BackstopConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class BackstopEvent:
    time_s: float
    band: tuple[float, float]
    measured_fraction: float
    action: Action

    def csv_row(self) -> str:
        return f"{self.time_s:.9g},{self.band[0]:.9g},{self.band[1]:.9g},{self.measured_fraction:.9g},{self.action.value}"


def events_csv(events: Sequence[BackstopEvent]) -> str:
    rows = ["time_s,band_lo_hz,band_hi_hz,fraction,action"] + [e.csv_row() for e in events]
    return "\n".join(rows) + "\n"


@dataclass
class _TierState:
    level: int = 0
    clean: int = 0


@dataclass
class _Escalator:
    config: BackstopConfig
    states: list[_TierState] = field(default_factory=list)

    def __post_init__(self):
        self.states = [_TierState() for _ in self.config.bands]

    def step(self, window: np.ndarray, dt: float, time_s: float) -> list[BackstopEvent]:
        spectrum = analyze_samples(window, dt)
        events = []
        t1 = self.config.tier_thresholds[0]
        for band, st in zip(self.config.bands, self.states):
            lo, hi = band[0], min(band[1], spectrum.nyquist_hz)
            try:
                frac = band_energy_fraction(spectrum, lo, hi, self.config.metric)
            except NoACContent:
                frac = 0.0
            if frac >= t1:
                st.clean = 0
                reached = sum(frac >= t for t in self.config.tier_thresholds)
                for lvl in range(st.level, reached):
                    events.append(BackstopEvent(time_s, band, frac, TIER_ACTIONS[lvl]))
                st.level = max(st.level, reached)
            else:
                st.clean += 1
                if st.level > 0 and st.clean >= self.config.deescalate_after:
                    events.append(BackstopEvent(time_s, band, frac, Action.DEESCALATE))
                    st.level = 0
                    st.clean = 0
        return events


def _window_sizes(config: BackstopConfig, dt: float) -> tuple[int, int]:
    w = int(round(config.window_s / dt))
    h = max(1, int(round(config.hop_s / dt)))
    if w < MIN_SAMPLES:
        raise ValueError(f"window of {w} samples is too short; need at least {MIN_SAMPLES}")
    return w, h


class BackstopDetector:
    """Sample-by-sample band monitor.

    Keeps the last ``window_s`` of samples; once the window is full it is
    analysed every ``hop_s``. For each band the tier rises whenever the
    band-energy fraction crosses a higher threshold (one event per tier
    crossed) and falls back to zero, with a ``Deescalate`` event, after
    ``deescalate_after`` consecutive windows below the first threshold.

    Not thread-safe; one caller at a time.
    """

    def __init__(self, config: BackstopConfig, dt: float, origin_time: float = 0.0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.config = config
        self.dt = float(dt)
        self.origin_time = float(origin_time)
        self._w, self._h = _window_sizes(config, self.dt)
        self._ring = np.zeros(self._w)
        self._count = 0
        self._escalator = _Escalator(config)

    @property
    def samples_seen(self) -> int:
        return self._count

    def feed(self, sample: float) -> list[BackstopEvent]:
        self._ring[self._count % self._w] = sample
        self._count += 1
        if self._count < self._w or (self._count - self._w) % self._h:
            return []
        pos = self._count % self._w
        window = np.concatenate((self._ring[pos:], self._ring[:pos]))
        return self._escalator.step(window, self.dt, self.origin_time + (self._count - 1) * self.dt)


def run_offline(trace: PowerTrace, config: BackstopConfig) -> list[BackstopEvent]:
    """Batch evaluation over a whole trace; same events as feeding it sample by sample."""
    w, h = _window_sizes(config, trace.dt)
    esc = _Escalator(config)
    x = trace.samples
    events = []
    for end in range(w, x.size + 1, h):
        events.extend(esc.step(x[end - w:end], trace.dt, trace.origin_time + (end - 1) * trace.dt))
    return events
