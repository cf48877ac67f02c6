"""scikit-learn style wrappers so the mitigations compose in a ``Pipeline``.

Inputs are arrays of shape (n_timesteps, n_devices) sampled every ``dt``
seconds. Device-level transformers act on each column independently;
:class:`FleetAggregator` sums columns into a single aggregate column, which
:class:`RackStorage` then flattens. ``fit`` only validates and records
diagnostics on the training data; the simulators have no learned state.

Example:
    >>> from sklearn.pipeline import make_pipeline
    >>> pipe = make_pipeline(GPUPowerSmoother(dt=0.01, mpf_frac=0.9),
    ...                      FleetAggregator(dt=0.01, constant_overhead_w=6000),
    ...                      RackStorage(dt=0.01, capacity_j=1e5, tau_s=20))
    >>> grid = pipe.fit_transform(X)  # doctest: +SKIP
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .firefly import FireflyConfig, simulate_firefly
from .smoothing import SmoothingProfile, apply_profile
from .storage import StorageConfig, TargetPolicy, simulate_storage
from .trace import DeviceModel
from .validation import check_dt, check_n_features, check_power_matrix, column_traces


class _DeviceTransformer(TransformerMixin, BaseEstimator):
    def _device(self) -> DeviceModel:
        return DeviceModel(tdp_w=self.tdp_w, idle_w=self.idle_w, edp_factor=self.edp_factor)

    def fit(self, X, y=None):
        X = check_power_matrix(X)
        check_dt(self.dt)
        self.device_ = self._device()
        self.config_ = self._config()
        self.n_features_in_ = X.shape[1]
        self.overhead_frac_ = np.array([self._run(t).overhead for t in column_traces(X, self.dt)])
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_power_matrix(X)
        check_n_features(self, X)
        cols = [self._run(t).output.samples for t in column_traces(X, self.dt)]
        return np.column_stack(cols)


class _Run:
    __slots__ = ("output", "overhead")

    def __init__(self, output, overhead):
        self.output, self.overhead = output, overhead


class GPUPowerSmoother(_DeviceTransformer):
    """Per-device ramp limiting with a minimum power floor.

    Args:
        dt: Sample interval in seconds.
        mpf_frac: Minimum power floor as a fraction of TDP.
        ramp_up_w_per_s: Programmed ramp-up rate per device.
        ramp_down_w_per_s: Programmed ramp-down rate per device.
        stop_delay_s: Time the floor is held after activity stops.
        edp_passthrough: Let short spikes up to EDP through instead of clamping at TDP.
        tdp_w, idle_w, edp_factor: Device model.
    """

    def __init__(self, dt=0.001, mpf_frac=0.0, ramp_up_w_per_s=1e9, ramp_down_w_per_s=1e9,
                 stop_delay_s=0.0, edp_passthrough=False, tdp_w=1000.0, idle_w=100.0, edp_factor=1.1):
        self.dt = dt
        self.mpf_frac = mpf_frac
        self.ramp_up_w_per_s = ramp_up_w_per_s
        self.ramp_down_w_per_s = ramp_down_w_per_s
        self.stop_delay_s = stop_delay_s
        self.edp_passthrough = edp_passthrough
        self.tdp_w = tdp_w
        self.idle_w = idle_w
        self.edp_factor = edp_factor

    def _config(self) -> SmoothingProfile:
        prof = SmoothingProfile(ramp_up_w_per_s=self.ramp_up_w_per_s, ramp_down_w_per_s=self.ramp_down_w_per_s,
                                mpf_frac=self.mpf_frac, stop_delay_s=self.stop_delay_s,
                                edp_passthrough=self.edp_passthrough)
        prof.validate_for(self._device())
        return prof

    def _run(self, trace) -> _Run:
        res = apply_profile(trace, self.device_, self.config_)
        return _Run(res.output, res.overhead_frac)


class FireflyFiller(_DeviceTransformer):
    """Per-device filler workload driven by sampled telemetry.

    Args:
        dt: Sample interval in seconds; must not exceed the telemetry period.
        telemetry_period_s: Interval between power readings.
        engage_threshold_w: Readings below this engage the filler.
        fill_target_w: Level the filler tops power up to.
        backoff_period_s: Probe interval; ``None`` disables probing.
        probe_duration_s: Length of each probe notch.
        tdp_w, idle_w, edp_factor: Device model.
    """

    def __init__(self, dt=0.001, telemetry_period_s=0.001, engage_threshold_w=500.0, fill_target_w=950.0,
                 backoff_period_s=1.0, probe_duration_s=0.01, tdp_w=1000.0, idle_w=100.0, edp_factor=1.1):
        self.dt = dt
        self.telemetry_period_s = telemetry_period_s
        self.engage_threshold_w = engage_threshold_w
        self.fill_target_w = fill_target_w
        self.backoff_period_s = backoff_period_s
        self.probe_duration_s = probe_duration_s
        self.tdp_w = tdp_w
        self.idle_w = idle_w
        self.edp_factor = edp_factor

    def _config(self) -> FireflyConfig:
        return FireflyConfig(telemetry_period_s=self.telemetry_period_s, engage_threshold_w=self.engage_threshold_w,
                             fill_target_w=self.fill_target_w, backoff_period_s=self.backoff_period_s,
                             probe_duration_s=self.probe_duration_s)

    def _run(self, trace) -> _Run:
        res = simulate_firefly(trace, self.device_, self.config_)
        return _Run(res.output, res.energy_overhead_frac)


class FleetAggregator(TransformerMixin, BaseEstimator):
    """Sum device columns into one aggregate column.

    Args:
        dt: Sample interval in seconds (kept for pipeline symmetry).
        constant_overhead_w: Non-GPU power added to the sum.
        scale: Multiplier applied afterwards, e.g. servers per rack.
    """

    def __init__(self, dt=0.001, constant_overhead_w=0.0, scale=1.0):
        self.dt = dt
        self.constant_overhead_w = constant_overhead_w
        self.scale = scale

    def fit(self, X, y=None):
        X = check_power_matrix(X)
        check_dt(self.dt)
        if self.constant_overhead_w < 0 or self.scale <= 0:
            raise ValueError("constant_overhead_w must be >= 0 and scale > 0")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_power_matrix(X)
        check_n_features(self, X)
        return ((X.sum(axis=1) + self.constant_overhead_w) * self.scale).reshape(-1, 1)


class RackStorage(TransformerMixin, BaseEstimator):
    """Battery between each column's load and the grid.

    Args:
        dt: Sample interval in seconds.
        capacity_j: Usable energy capacity.
        soc_init_frac: Initial charge as a fraction of capacity.
        max_charge_w, max_discharge_w: Power limits; ``None`` means unlimited.
        round_trip_efficiency: Charge-discharge efficiency in (0, 1].
        policy: ``"moving-average"`` or ``"fixed"``.
        tau_s: Moving-average time constant.
        setpoint_w: Grid setpoint for the fixed policy.
    """

    def __init__(self, dt=0.001, capacity_j=1e5, soc_init_frac=0.5, max_charge_w=None, max_discharge_w=None,
                 round_trip_efficiency=1.0, policy="moving-average", tau_s=10.0, setpoint_w=None):
        self.dt = dt
        self.capacity_j = capacity_j
        self.soc_init_frac = soc_init_frac
        self.max_charge_w = max_charge_w
        self.max_discharge_w = max_discharge_w
        self.round_trip_efficiency = round_trip_efficiency
        self.policy = policy
        self.tau_s = tau_s
        self.setpoint_w = setpoint_w

    def _config(self) -> StorageConfig:
        if self.policy == "fixed":
            target = TargetPolicy.fixed(self.setpoint_w)
        else:
            target = TargetPolicy(self.policy, tau_s=self.tau_s)
        return StorageConfig(self.capacity_j, self.soc_init_frac,
                             math.inf if self.max_charge_w is None else self.max_charge_w,
                             math.inf if self.max_discharge_w is None else self.max_discharge_w,
                             self.round_trip_efficiency, target)

    def fit(self, X, y=None):
        X = check_power_matrix(X)
        check_dt(self.dt)
        self.config_ = self._config()
        self.n_features_in_ = X.shape[1]
        self.saturation_counts_ = np.array([len(simulate_storage(t, self.config_).saturation_events)
                                            for t in column_traces(X, self.dt)])
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_power_matrix(X)
        check_n_features(self, X)
        return np.column_stack([simulate_storage(t, self.config_).grid.samples for t in column_traces(X, self.dt)])
