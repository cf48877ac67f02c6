"""Aggregation of device traces into server, rack and datacenter traces."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .trace import PowerTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServerModel:
    """A server: some GPUs plus constant host (CPU, NIC, fans, ...) power."""

    gpus_per_server: int = 8
    host_overhead_w: float = 6000.0
    stagger_offsets_s: tuple[float, ...] | None = None
    label: str = ""

    def __post_init__(self):
        if self.gpus_per_server < 1:
            raise ValueError("gpus_per_server must be >= 1")
        if self.host_overhead_w < 0:
            raise ValueError("host_overhead_w must be >= 0")
        if self.stagger_offsets_s is not None:
            object.__setattr__(self, "stagger_offsets_s", tuple(float(o) for o in self.stagger_offsets_s))
            if len(self.stagger_offsets_s) != self.gpus_per_server:
                raise ValueError("need one stagger offset per GPU")


def _offset_samples(offset_s: float, dt: float) -> int:
    k = int(round(offset_s / dt))
    if k < 0:
        raise ValueError(f"offsets must be non-negative, got {offset_s}")
    if abs(k * dt - offset_s) > 1e-9 * max(dt, abs(offset_s)):
        raise ValueError(f"offset {offset_s} s is not a multiple of dt={dt}")
    return k


def aggregate(traces: Sequence[PowerTrace], offsets_s: Sequence[float] | None = None,
              constant_overhead_w: float = 0.0) -> PowerTrace:
    """Pointwise sum of (optionally delayed) traces plus a constant overhead.

    Trace ``i`` is delayed by ``offsets_s[i]``; the result covers only the
    interval where every delayed trace has data, so overhang is dropped.

    Raises:
        ValueError: on mismatched ``dt``, offsets off the sample grid, or an
            empty overlap.
    """
    if not traces:
        raise ValueError("need at least one trace")
    dt = traces[0].dt
    for tr in traces[1:]:
        if abs(tr.dt - dt) > 1e-12 * dt:
            raise ValueError(f"mismatched dt: {tr.dt} vs {dt}")
    if offsets_s is None:
        offsets_s = [0.0] * len(traces)
    if len(offsets_s) != len(traces):
        raise ValueError("need one offset per trace")
    shifts = [_offset_samples(o, dt) for o in offsets_s]
    start = max(shifts)
    end = min(k + len(tr) for k, tr in zip(shifts, traces))
    if end <= start:
        raise ValueError("no overlap between offset traces")
    total = np.full(end - start, float(constant_overhead_w))
    for k, tr in zip(shifts, traces):
        total += tr.samples[start - k:end - k]
    return PowerTrace(dt, total, traces[0].origin_time + start * dt)


def server_trace(gpu_traces: Sequence[PowerTrace], server: ServerModel) -> PowerTrace:
    """Aggregate one server's GPUs using its stagger offsets and host overhead."""
    if len(gpu_traces) != server.gpus_per_server:
        raise ValueError(f"expected {server.gpus_per_server} GPU traces, got {len(gpu_traces)}")
    return aggregate(gpu_traces, server.stagger_offsets_s, server.host_overhead_w)


@dataclass
class GpuFraction:
    values: np.ndarray
    mean: float
    warnings: list[str] = field(default_factory=list)


def gpu_power_fraction(server: PowerTrace, gpu_sum: PowerTrace, label: str = "") -> GpuFraction:
    """Share of server power drawn by the GPUs, sample by sample.

    A warning record is attached when a GB200-like server (by ``label``)
    shows a mean GPU share of 50% or less, which contradicts the expected
    breakdown for that class of machine.
    """
    if abs(server.dt - gpu_sum.dt) > 1e-12 * server.dt or len(server) != len(gpu_sum):
        raise ValueError("server and GPU traces must share dt and length")
    s, g = server.samples, gpu_sum.samples
    if np.any((s == 0) & (g != 0)):
        raise ValueError("server power is zero where GPU power is not")
    if np.any(g > s * (1 + 1e-12)):
        raise ValueError("GPU power exceeds server power")
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(s > 0, g / np.where(s > 0, s, 1.0), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    result = GpuFraction(frac, float(np.mean(frac)))
    if "GB200" in label.upper() and result.mean <= 0.5:
        msg = f"{label}: mean GPU share {result.mean:.3f} <= 0.5, expected GPUs to dominate server power"
        result.warnings.append(msg)
        logger.warning(msg)
    return result
