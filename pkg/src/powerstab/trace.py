"""Power-trace data model, synthetic workload generators and CSV I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_HEADER = "time_s,power_w"


class TraceParseError(ValueError):
    """Raised when a trace CSV file cannot be parsed.

    Attributes:
        line: 1-based line number of the offending row (``None`` when the
            problem is not tied to one line).
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True, eq=False)
class PowerTrace:
    """Uniformly sampled power time series in watts.

    The sample array is stored read-only so a trace can be shared freely.
    """

    dt: float
    samples: np.ndarray
    origin_time: float = 0.0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float, copy=True).reshape(-1)
        if not (isinstance(self.dt, (int, float, np.floating)) and self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be a positive finite number, got {self.dt!r}")
        if arr.size == 0:
            raise ValueError("trace must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trace samples must be finite")
        if np.any(arr < 0):
            raise ValueError("trace samples must be non-negative watts")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "origin_time", float(self.origin_time))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.dt * self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.origin_time + np.arange(self.samples.size) * self.dt

    def energy(self, method: str = "hold") -> float:
        """Energy in joules.

        ``"hold"`` treats each sample as constant over its interval (the
        integrator used by the storage simulator); ``"trapezoid"`` integrates
        linearly between samples.
        """
        if method == "hold":
            return float(np.sum(self.samples) * self.dt)
        if method == "trapezoid":
            s = self.samples
            if s.size == 1:
                return 0.0
            return float((np.sum(s) - 0.5 * (s[0] + s[-1])) * self.dt)
        raise ValueError(f"unknown integration method {method!r}")

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def peak_to_trough(self) -> float:
        return float(np.max(self.samples) - np.min(self.samples))

    def with_samples(self, samples: Iterable[float]) -> "PowerTrace":
        """Same time grid, new values."""
        return PowerTrace(self.dt, np.asarray(samples, dtype=float), self.origin_time)

    def scaled(self, factor: float) -> "PowerTrace":
        """Multiply every sample by ``factor`` (fleet of identical synchronized units)."""
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        return self.with_samples(self.samples * factor)

    def shifted(self, offset_w: float) -> "PowerTrace":
        return self.with_samples(self.samples + offset_w)


@dataclass(frozen=True)
class DeviceModel:
    """Per-GPU power envelope.

    Attributes:
        tdp_w: sustained power ceiling, enforced as a rolling mean over
            ``tdp_avg_window_s``.
        idle_w: power with no work scheduled.
        edp_factor: instantaneous ceiling as a multiple of TDP.
        edp_window_s: longest allowed excursion above TDP.
        tdp_avg_window_s: averaging window of the TDP limit.
    """

    tdp_w: float = 1000.0
    idle_w: float = 100.0
    edp_factor: float = 1.1
    edp_window_s: float = 0.05
    tdp_avg_window_s: float = 1.0

    def __post_init__(self):
        if not 0 <= self.idle_w < self.tdp_w:
            raise ValueError(f"need 0 <= idle_w < tdp_w, got idle={self.idle_w}, tdp={self.tdp_w}")
        if self.edp_factor < 1:
            raise ValueError(f"edp_factor must be >= 1, got {self.edp_factor}")
        if self.edp_window_s <= 0 or self.tdp_avg_window_s <= 0:
            raise ValueError("EDP and TDP windows must be positive")
        if self.edp_window_s > self.tdp_avg_window_s:
            raise ValueError("edp_window_s cannot exceed tdp_avg_window_s")

    @property
    def edp_w(self) -> float:
        return self.edp_factor * self.tdp_w

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceModel":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WorkloadModel:
    """Phase structure of one bulk-synchronous training iteration.

    Levels are fractions of the device TDP.
    """

    compute_phase_s: float = 1.5
    comm_phase_s: float = 1.0
    compute_level: float = 1.0
    comm_level: float = 0.3
    checkpoint_period_s: float = 0.0
    checkpoint_duration_s: float = 0.0
    checkpoint_level: float = 0.1
    jitter_frac: float = 0.0
    edp_spikes: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.compute_phase_s <= 0 or self.comm_phase_s <= 0:
            raise ValueError("phase durations must be positive")
        for name in ("compute_level", "comm_level", "checkpoint_level"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0 <= self.jitter_frac < 1:
            raise ValueError(f"jitter_frac must lie in [0, 1), got {self.jitter_frac}")
        if self.checkpoint_period_s < 0:
            raise ValueError("checkpoint_period_s must be >= 0")
        if self.checkpoint_period_s > 0 and self.checkpoint_duration_s <= 0:
            raise ValueError("checkpoint_duration_s must be positive when checkpoints are enabled")

    @property
    def iteration_period_s(self) -> float:
        return self.compute_phase_s + self.comm_phase_s

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadModel":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def _n_samples(duration_s: float, dt_s: float) -> int:
    if duration_s <= 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    if dt_s <= 0:
        raise ValueError(f"dt must be positive, got {dt_s}")
    n = int(round(duration_s / dt_s))
    if n < 1:
        raise ValueError("duration shorter than one sample")
    return n


def gen_square_wave(period_s: float, duty: float, high_w: float, low_w: float,
                    duration_s: float, dt_s: float) -> PowerTrace:
    """Square-wave microbenchmark: ``high_w`` for the first ``duty`` of each period.

    Phase boundaries are quantized to the sample grid, so the period must be
    (close to) an integer number of samples.
    """
    if period_s <= 0:
        raise ValueError(f"period must be positive, got {period_s}")
    if not 0 <= duty <= 1:
        raise ValueError(f"duty must lie in [0, 1], got {duty}")
    if not high_w >= low_w >= 0:
        raise ValueError("need high_w >= low_w >= 0")
    n = _n_samples(duration_s, dt_s)
    period_n = int(round(period_s / dt_s))
    if period_n < 1 or abs(period_n * dt_s - period_s) > dt_s:
        raise ValueError(f"dt={dt_s} does not resolve period {period_s}")
    high_n = int(round(duty * period_s / dt_s))
    phase = np.arange(n) % period_n
    samples = np.where(phase < high_n, float(high_w), float(low_w))
    return PowerTrace(dt_s, samples)


def _phase_segments(workload: WorkloadModel, duration_s: float) -> list[tuple[str, float, float]]:
    """Return (kind, start_s, end_s) segments covering ``[0, duration_s)``.

    Jitter multiplies each phase duration by ``1 + u`` with ``u`` drawn
    uniformly from ``[-jitter, +jitter]`` by numpy's PCG64 generator, two
    draws per iteration (compute first, then communication).
    """
    rng = np.random.Generator(np.random.PCG64(workload.rng_seed))
    j = workload.jitter_frac
    segments = []
    t = 0.0
    next_ckpt = workload.checkpoint_period_s if workload.checkpoint_period_s > 0 else math.inf
    while t < duration_s:
        for kind, base in (("compute", workload.compute_phase_s), ("comm", workload.comm_phase_s)):
            u = rng.uniform(-j, j) if j > 0 else 0.0
            d = base * (1.0 + u)
            segments.append((kind, t, t + d))
            t += d
        if t >= next_ckpt and t < duration_s:
            segments.append(("checkpoint", t, t + workload.checkpoint_duration_s))
            t += workload.checkpoint_duration_s
            while next_ckpt <= t:
                next_ckpt += workload.checkpoint_period_s
    return segments


def gen_training_trace(device: DeviceModel, workload: WorkloadModel,
                       duration_s: float, dt_s: float = 0.001) -> PowerTrace:
    """Synthetic training waveform alternating compute and communication phases.

    With ``workload.edp_spikes`` each low-to-high transition opens with a
    spike to the EDP ceiling lasting ``device.edp_window_s``. When the spike
    would push a rolling TDP-window mean above TDP, the compute samples that
    follow it are lowered just enough to pay the excess back.

    Raises:
        ValueError: if ``dt_s`` is too coarse for the configured phases or
            spikes, or the spike budget cannot be repaid within the TDP window.
    """
    n = _n_samples(duration_s, dt_s)
    resolvable = [workload.comm_phase_s, workload.compute_phase_s * (1 - workload.jitter_frac),
                  workload.comm_phase_s * (1 - workload.jitter_frac)]
    if workload.checkpoint_period_s > 0:
        resolvable.append(workload.checkpoint_duration_s)
    if workload.edp_spikes:
        resolvable.append(device.edp_window_s)
    if dt_s > min(resolvable) / 2 + 1e-12:
        raise ValueError(f"dt={dt_s} s too coarse: must be <= {min(resolvable) / 2} s")

    levels = {
        "compute": workload.compute_level * device.tdp_w,
        "comm": workload.comm_level * device.tdp_w,
        "checkpoint": workload.checkpoint_level * device.tdp_w,
    }
    samples = np.empty(n)
    bounds = []
    for kind, t0, t1 in _phase_segments(workload, duration_s):
        i0 = min(int(round(t0 / dt_s)), n)
        i1 = min(int(round(t1 / dt_s)), n)
        if i1 > i0:
            samples[i0:i1] = levels[kind]
            bounds.append((kind, i0, i1))

    if workload.edp_spikes:
        _insert_edp_spikes(samples, bounds, levels, device, dt_s)
        trace = PowerTrace(dt_s, samples)
        validate_device_trace(trace, device)
        return trace
    return PowerTrace(dt_s, samples)


def _insert_edp_spikes(samples, bounds, levels, device, dt_s):
    spike_n = int(math.floor(device.edp_window_s / dt_s + 1e-9))
    window_n = int(round(device.tdp_avg_window_s / dt_s))
    spike_w = device.edp_w
    prev_level = None
    for kind, i0, i1 in bounds:
        level = levels[kind]
        if kind == "compute" and prev_level is not None and prev_level < level:
            s_end = min(i0 + spike_n, i1)
            samples[i0:s_end] = spike_w
            k = s_end - i0
            tail = max(window_n - k, 1)
            # Mean over spike + tail must not exceed TDP.
            excess = (k * spike_w + tail * level) - window_n * device.tdp_w
            if excess > 0:
                t_end = min(s_end + tail, i1)
                if t_end > s_end:
                    delta = excess / (t_end - s_end) * (1.0 + 1e-6)
                    samples[s_end:t_end] = np.maximum(samples[s_end:t_end] - delta, 0.0)
        prev_level = level


def validate_device_trace(trace: PowerTrace, device: DeviceModel) -> None:
    """Check a device-level trace against its power envelope.

    Verifies the instantaneous EDP ceiling, the rolling-mean TDP limit and the
    maximum duration of any excursion above TDP.

    Raises:
        ValueError: describing the first violated constraint.
    """
    s = trace.samples
    tol = 1e-9 * device.tdp_w
    if np.max(s) > device.edp_w + tol:
        raise ValueError(f"sample {np.max(s):.6g} W exceeds EDP ceiling {device.edp_w:.6g} W")
    window_n = int(round(device.tdp_avg_window_s / trace.dt))
    if s.size >= window_n >= 1:
        csum = np.concatenate(([0.0], np.cumsum(s)))
        rolling = (csum[window_n:] - csum[:-window_n]) / window_n
        worst = int(np.argmax(rolling))
        if rolling[worst] > device.tdp_w + tol:
            raise ValueError(
                f"rolling {device.tdp_avg_window_s} s mean {rolling[worst]:.9g} W exceeds TDP "
                f"at t={trace.origin_time + worst * trace.dt:.6g} s")
    above = s > device.tdp_w + tol
    if np.any(above):
        max_run = int(round(device.edp_window_s / trace.dt + 1e-9))
        edges = np.diff(np.concatenate(([0], above.astype(np.int8), [0])))
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        runs = ends - starts
        if np.max(runs) > max_run:
            raise ValueError(f"excursion above TDP lasts {np.max(runs) * trace.dt:.6g} s, "
                             f"longer than EDP window {device.edp_window_s} s")


def save_csv(trace: PowerTrace, path: str | Path) -> None:
    t = trace.times
    lines = [CSV_HEADER]
    lines.extend(f"{ti:.9g},{pi:.9g}" for ti, pi in zip(t.tolist(), trace.samples.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_csv(path: str | Path) -> PowerTrace:
    """Read a ``time_s,power_w`` CSV file written by :func:`save_csv`.

    Raises:
        TraceParseError: malformed header or row, negative power, empty or
            single-row file, non-increasing or non-uniform timestamps.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_csv(text.splitlines())


def parse_csv(lines: Sequence[str]) -> PowerTrace:
    if not lines or lines[0].strip() != CSV_HEADER:
        raise TraceParseError(f"expected header '{CSV_HEADER}'", line=1)
    times, powers = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        row = raw.strip()
        if not row:
            continue
        parts = row.split(",")
        if len(parts) != 2:
            raise TraceParseError(f"expected 2 fields, got {len(parts)}", line=lineno)
        try:
            t, p = float(parts[0]), float(parts[1])
        except ValueError:
            raise TraceParseError(f"non-numeric field in {row!r}", line=lineno) from None
        if not (math.isfinite(t) and math.isfinite(p)):
            raise TraceParseError("non-finite value", line=lineno)
        if p < 0:
            raise TraceParseError(f"negative power {p}", line=lineno)
        if times and t <= times[-1]:
            raise TraceParseError("non-monotonic time", line=lineno)
        times.append(t)
        powers.append(p)
    if not times:
        raise TraceParseError("empty trace")
    if len(times) == 1:
        raise TraceParseError("cannot infer sample interval from a single row", line=2)
    t = np.asarray(times)
    dt = (t[-1] - t[0]) / (t.size - 1)
    bad = np.flatnonzero(np.abs(np.diff(t) - dt) > 1e-6 * dt)
    if bad.size:
        raise TraceParseError("non-uniform sampling", line=int(bad[0]) + 3)
    return PowerTrace(float(dt), np.asarray(powers), float(t[0]))
