"""Rack-level energy storage that absorbs power swings between load and grid.

Efficiency is split symmetrically: charging stores ``sqrt(eta)`` of the
power drawn, discharging draws ``1/sqrt(eta)`` from the store per watt
delivered. With ``eta == 1`` grid energy equals load energy plus the change
in stored energy, exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .trace import PowerTrace

POLICIES = ("fixed", "moving-average")


@dataclass(frozen=True)
class TargetPolicy:
    """What grid power the controller aims for.

    ``fixed`` holds ``setpoint_w``; ``moving-average`` follows an exponential
    moving average of the load with time constant ``tau_s``, seeded with the
    first load sample.
    """

    kind: str = "moving-average"
    setpoint_w: float | None = None
    tau_s: float | None = None

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"target policy must be one of {POLICIES}, got {self.kind!r}")
        if self.kind == "fixed" and (self.setpoint_w is None or self.setpoint_w < 0):
            raise ValueError("fixed policy needs a non-negative setpoint_w")
        if self.kind == "moving-average" and (self.tau_s is None or self.tau_s <= 0):
            raise ValueError("moving-average policy needs a positive tau_s")

    @classmethod
    def fixed(cls, setpoint_w: float) -> "TargetPolicy":
        return cls("fixed", setpoint_w=setpoint_w)

    @classmethod
    def moving_average(cls, tau_s: float) -> "TargetPolicy":
        return cls("moving-average", tau_s=tau_s)

    def to_dict(self) -> dict:
        if self.kind == "fixed":
            return {"kind": "fixed", "setpoint_w": self.setpoint_w}
        return {"kind": "moving-average", "tau_s": self.tau_s}


@dataclass(frozen=True)
class StorageConfig:
    capacity_j: float
    soc_init_frac: float = 0.5
    max_charge_w: float = math.inf
    max_discharge_w: float = math.inf
    round_trip_efficiency: float = 1.0
    target_policy: TargetPolicy = field(default_factory=lambda: TargetPolicy.moving_average(10.0))

    def __post_init__(self):
        if isinstance(self.target_policy, dict):
            object.__setattr__(self, "target_policy", TargetPolicy(**self.target_policy))
        for name in ("max_charge_w", "max_discharge_w"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, math.inf)
        if not self.capacity_j > 0:
            raise ValueError("capacity_j must be positive")
        if not 0 <= self.soc_init_frac <= 1:
            raise ValueError("soc_init_frac must lie in [0, 1]")
        if not (self.max_charge_w > 0 and self.max_discharge_w > 0):
            raise ValueError("charge and discharge limits must be positive")
        if not 0 < self.round_trip_efficiency <= 1:
            raise ValueError("round_trip_efficiency must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "StorageConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        def _num(v):
            return None if math.isinf(v) else v
        return {"capacity_j": self.capacity_j, "soc_init_frac": self.soc_init_frac,
                "max_charge_w": _num(self.max_charge_w), "max_discharge_w": _num(self.max_discharge_w),
                "round_trip_efficiency": self.round_trip_efficiency,
                "target_policy": self.target_policy.to_dict()}

    @classmethod
    def load(cls, path: str | Path) -> "StorageConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class StorageResult:
    grid: PowerTrace
    soc: np.ndarray
    saturation_events: list[tuple[float, str]]
    peak_grid_w: float
    trough_grid_w: float
    soc_init_j: float = 0.0

    def soc_trace_csv(self) -> str:
        t = self.grid.times
        rows = ["time_s,soc_j"] + [f"{ti:.9g},{si:.9g}" for ti, si in zip(t.tolist(), self.soc.tolist())]
        return "\n".join(rows) + "\n"


def simulate_storage(load: PowerTrace, cfg: StorageConfig) -> StorageResult:
    """Step the charge/discharge controller through ``load``.

    For each sample the battery is asked for ``load - target`` (positive means
    discharge) and delivers as much of it as its power limits and state of
    charge allow; the grid covers the rest. ``soc[i]`` is the stored energy
    after sample ``i``. Saturation events mark the first sample of each run
    where the request could not be met, labelled ``full``, ``empty`` or
    ``rate-limited``.
    """
    dt = load.dt
    se = math.sqrt(cfg.round_trip_efficiency)
    cap = cfg.capacity_j
    soc = cap * cfg.soc_init_frac
    policy = cfg.target_policy
    fixed = policy.kind == "fixed"
    alpha = 0.0 if fixed else 1.0 - math.exp(-dt / policy.tau_s)

    x = load.samples.tolist()
    n = len(x)
    grid = [0.0] * n
    socs = [0.0] * n
    events: list[tuple[float, str]] = []
    last_kind = None
    ema = x[0]

    for i in range(n):
        L = x[i]
        if fixed:
            target = policy.setpoint_w
        else:
            if i:
                ema += alpha * (L - ema)
            target = ema
        want = L - target
        kind = None
        tol = 1e-9 * max(abs(L), abs(want), 1.0)
        if want > 0:
            by_soc = soc * se / dt
            delivered = min(want, cfg.max_discharge_w, by_soc, L)
            if delivered < want - tol:
                kind = "empty" if by_soc <= cfg.max_discharge_w else "rate-limited"
            soc -= delivered * dt / se
            battery = delivered
        elif want < 0:
            by_soc = (cap - soc) / (se * dt)
            absorbed = min(-want, cfg.max_charge_w, by_soc)
            if absorbed < -want - tol:
                kind = "full" if by_soc <= cfg.max_charge_w else "rate-limited"
            soc += absorbed * dt * se
            battery = -absorbed
        else:
            battery = 0.0
        soc = min(max(soc, 0.0), cap)
        grid[i] = L - battery
        socs[i] = soc
        if kind is not None and kind != last_kind:
            events.append((load.origin_time + i * dt, kind))
        last_kind = kind

    g = np.maximum(np.asarray(grid), 0.0)
    return StorageResult(load.with_samples(g), np.asarray(socs), events,
                         float(np.max(g)), float(np.min(g)), cap * cfg.soc_init_frac)


def capacity_plan(load: PowerTrace, setpoint_w: float, eta: float = 1.0) -> tuple[float, float]:
    """Smallest capacity and matching initial charge that flatten ``load`` to ``setpoint_w``.

    Tracks the stored-energy excursion implied by holding the grid at the
    setpoint with unlimited power rates. Returns ``(capacity_j, soc_init_j)``.

    Raises:
        ValueError: setpoint outside the load's range, where flattening would
            need a net energy source or sink.
    """
    x = load.samples
    lo, hi = float(np.min(x)), float(np.max(x))
    if not lo <= setpoint_w <= hi:
        raise ValueError(f"setpoint {setpoint_w} W outside load range [{lo}, {hi}] W")
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    se = math.sqrt(eta)
    b = x - setpoint_w
    delta = np.where(b > 0, -b * load.dt / se, -b * load.dt * se)
    cum = np.cumsum(delta)
    top = max(0.0, float(np.max(cum)))
    bottom = min(0.0, float(np.min(cum)))
    return top - bottom, -bottom


def required_capacity(load: PowerTrace, setpoint_w: float, eta: float = 1.0) -> float:
    """Minimal storage capacity (J) for saturation-free flattening at ``setpoint_w``."""
    return capacity_plan(load, setpoint_w, eta)[0]
