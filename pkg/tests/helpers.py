"""Random trace factories shared by the test modules."""

from __future__ import annotations

import numpy as np

from powerstab import DeviceModel, PowerTrace, WorkloadModel, gen_training_trace

DEVICE = DeviceModel(tdp_w=1000.0, idle_w=100.0)


def random_workload(rng: np.random.Generator, period_range=(0.4, 5.0), edp_spikes=False) -> WorkloadModel:
    period = rng.uniform(*period_range)
    duty = rng.uniform(0.3, 0.7)
    return WorkloadModel(
        compute_phase_s=period * duty,
        comm_phase_s=period * (1 - duty),
        compute_level=rng.uniform(0.8, 1.0),
        comm_level=rng.uniform(0.1, 0.4),
        jitter_frac=rng.uniform(0.0, 0.05),
        edp_spikes=edp_spikes,
        rng_seed=int(rng.integers(0, 2**31)),
    )


def random_training_trace(rng: np.random.Generator, duration_s=30.0, dt_s=0.01, **kw) -> PowerTrace:
    return gen_training_trace(DEVICE, random_workload(rng, **kw), duration_s, dt_s)


def random_trace(rng: np.random.Generator, n=None, dt=None) -> PowerTrace:
    """Unstructured non-negative trace: random walk plus steps plus noise."""
    n = int(rng.integers(16, 4097)) if n is None else n
    dt = float(rng.choice([0.001, 0.01, 0.1])) if dt is None else dt
    walk = np.cumsum(rng.normal(0, 20, n))
    steps = np.repeat(rng.uniform(0, 600, n // 8 + 1), 8)[:n]
    x = 500 + walk + steps + rng.normal(0, 5, n)
    return PowerTrace(dt, np.clip(x, 0, None))
