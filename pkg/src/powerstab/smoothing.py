"""GPU power smoothing: ramp-rate limits, minimum power floor and stop delay."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, asdict
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .trace import DeviceModel, PowerTrace


class State(str, Enum):
    IDLE = "Idle"
    RAMP_UP = "RampUp"
    ACTIVE = "Active"
    STOP_DELAY = "StopDelay"
    RAMP_DOWN = "RampDown"


@dataclass(frozen=True)
class SmoothingProfile:
    """Programmable smoothing profile for one GPU.

    Attributes:
        ramp_up_w_per_s: largest allowed rise rate of the output.
        ramp_down_w_per_s: largest allowed fall rate of the output.
        mpf_frac: minimum power floor as a fraction of TDP.
        mpf_max: hardware cap on ``mpf_frac``.
        stop_delay_s: how long the floor is held once activity stops.
        activity_threshold_w: raw power at or above which the GPU counts as
            busy; ``None`` means idle power plus 5% of TDP.
        ceiling_w: output clamp; ``None`` means TDP.
        edp_passthrough: clamp at the EDP ceiling instead of ``ceiling_w``,
            letting EDP spikes through.
    """

    ramp_up_w_per_s: float = 1e9
    ramp_down_w_per_s: float = 1e9
    mpf_frac: float = 0.0
    mpf_max: float = 0.9
    stop_delay_s: float = 0.0
    activity_threshold_w: float | None = None
    ceiling_w: float | None = None
    edp_passthrough: bool = False

    def __post_init__(self):
        if self.ramp_up_w_per_s <= 0 or self.ramp_down_w_per_s <= 0:
            raise ValueError("ramp rates must be positive")
        if not 0 <= self.mpf_max <= 1:
            raise ValueError(f"mpf_max must lie in [0, 1], got {self.mpf_max}")
        if not 0 <= self.mpf_frac <= self.mpf_max:
            raise ValueError(f"mpf_frac must lie in [0, mpf_max={self.mpf_max}], got {self.mpf_frac}")
        if self.stop_delay_s < 0:
            raise ValueError("stop_delay_s must be >= 0")

    def threshold(self, device: DeviceModel) -> float:
        if self.activity_threshold_w is not None:
            return self.activity_threshold_w
        return device.idle_w + 0.05 * device.tdp_w

    def ceiling(self, device: DeviceModel) -> float:
        if self.edp_passthrough:
            return device.edp_w
        return device.tdp_w if self.ceiling_w is None else self.ceiling_w

    def floor(self, device: DeviceModel) -> float:
        return self.mpf_frac * device.tdp_w

    def validate_for(self, device: DeviceModel) -> None:
        if self.floor(device) > self.ceiling(device):
            raise ValueError(f"floor {self.floor(device):g} W exceeds ceiling {self.ceiling(device):g} W")

    @classmethod
    def from_dict(cls, d: dict) -> "SmoothingProfile":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def load(cls, path: str | Path) -> "SmoothingProfile":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class SmoothingResult:
    output: PowerTrace
    raw_energy_j: float
    output_energy_j: float
    overhead_frac: float
    state_timeline: list[tuple[float, State]]
    floor_engaged_s: float = 0.0
    excess_energy_j: float = 0.0

    def timeline_csv(self) -> str:
        rows = ["time_s,state"] + [f"{t:.9g},{s.value}" for t, s in self.state_timeline]
        return "\n".join(rows) + "\n"


def overhead_fraction(raw_energy: float, out_energy: float) -> float:
    if raw_energy == 0:
        return 0.0 if out_energy == 0 else math.inf
    return (out_energy - raw_energy) / raw_energy


def apply_profile(raw: PowerTrace, device: DeviceModel, profile: SmoothingProfile) -> SmoothingResult:
    """Run the smoothing controller over a raw device trace.

    While the GPU is busy the output tracks ``max(raw, floor)`` clamped at
    the ceiling. After activity stops the floor is held for the stop delay
    (restarted by any renewed activity), then released. Every sample-to-sample
    change, in any state, is limited by the programmed ramp rates. The first
    output sample is taken as already settled.
    """
    profile.validate_for(device)
    dt = raw.dt
    floor = profile.floor(device)
    ceil = profile.ceiling(device)
    thr = profile.threshold(device)
    up = profile.ramp_up_w_per_s * dt
    down = profile.ramp_down_w_per_s * dt
    stop_n = int(round(profile.stop_delay_s / dt))
    eps = 1e-9 * device.tdp_w

    r = raw.samples.tolist()
    n = len(r)
    out = [0.0] * n
    engaged_flags = [False] * n

    engaged = r[0] >= thr
    idle_count = 0
    if engaged:
        out[0] = min(max(r[0], floor), ceil)
        state = State.ACTIVE if out[0] >= floor - eps else State.RAMP_UP
    else:
        out[0] = min(r[0], ceil)
        state = State.IDLE
    engaged_flags[0] = engaged
    timeline = [(raw.origin_time, state)]

    for i in range(1, n):
        ri = r[i]
        active = ri >= thr
        if active:
            engaged = True
            idle_count = 0
        elif engaged:
            idle_count += 1
            if idle_count > stop_n:
                engaged = False
        if engaged:
            target = min(max(ri, floor), ceil)
        else:
            target = min(ri, ceil)
        prev = out[i - 1]
        d = target - prev
        if d > up:
            v = prev + up
        elif d < -down:
            v = prev - down
        else:
            v = target
        out[i] = v
        engaged_flags[i] = engaged

        if engaged:
            if v < floor - eps:
                new_state = State.RAMP_UP
            elif active:
                new_state = State.ACTIVE
            else:
                new_state = State.STOP_DELAY
        elif v > target + eps:
            new_state = State.RAMP_DOWN
        else:
            new_state = State.IDLE
        if new_state is not state:
            state = new_state
            timeline.append((raw.origin_time + i * dt, state))

    output = raw.with_samples(out)
    e_raw = raw.energy("trapezoid")
    e_out = output.energy("trapezoid")
    diff = output.samples - raw.samples
    return SmoothingResult(
        output=output,
        raw_energy_j=e_raw,
        output_energy_j=e_out,
        overhead_frac=overhead_fraction(e_raw, e_out),
        state_timeline=timeline,
        floor_engaged_s=float(np.count_nonzero(engaged_flags) * dt),
        excess_energy_j=float(np.sum(np.clip(diff, 0.0, None)) * dt),
    )


def overhead_curve(raw: PowerTrace, device: DeviceModel, profile_template: SmoothingProfile,
                   mpf_values: Sequence[float]) -> list[tuple[float, float]]:
    """Energy overhead of smoothing at each floor setting in ``mpf_values``."""
    if any(b < a for a, b in zip(mpf_values, mpf_values[1:])):
        raise ValueError("mpf_values must be ascending")
    curve = []
    for mpf in mpf_values:
        prof = dataclasses.replace(profile_template, mpf_frac=float(mpf))
        curve.append((float(mpf), apply_profile(raw, device, prof).overhead_frac))
    return curve
