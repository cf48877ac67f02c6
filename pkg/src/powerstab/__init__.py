"""Power-stabilization simulator for synchronized AI training fleets."""

from .backstop import Action, BackstopConfig, BackstopDetector, BackstopEvent, events_csv, run_offline
from .compliance import Band, ComplianceRecord, ComplianceReport, UtilitySpec, check, check_frequency_domain, check_time_domain
from .firefly import FireflyConfig, FireflyResult, compare_mitigations, simulate_firefly
from .hierarchy import GpuFraction, ServerModel, aggregate, gpu_power_fraction, server_trace
from .plotting import Series, plot_svg, render_svg
from .scenario import Scenario, ScenarioError, ScenarioResult, run_scenario, write_artifacts
from .smoothing import SmoothingProfile, SmoothingResult, State, apply_profile, overhead_curve
from .spectral import NoACContent, Spectrum, analyze, band_energy, band_energy_fraction, dominant_frequency
from .storage import StorageConfig, StorageResult, TargetPolicy, capacity_plan, required_capacity, simulate_storage
from .trace import (DeviceModel, PowerTrace, TraceParseError, WorkloadModel, gen_square_wave,
                    gen_training_trace, load_csv, save_csv, validate_device_trace)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BackstopConfig",
    "BackstopDetector",
    "BackstopEvent",
    "Band",
    "ComplianceRecord",
    "ComplianceReport",
    "DeviceModel",
    "FireflyConfig",
    "FireflyResult",
    "GpuFraction",
    "NoACContent",
    "PowerTrace",
    "Scenario",
    "ScenarioError",
    "ScenarioResult",
    "Series",
    "ServerModel",
    "SmoothingProfile",
    "SmoothingResult",
    "Spectrum",
    "State",
    "StorageConfig",
    "StorageResult",
    "TargetPolicy",
    "TraceParseError",
    "UtilitySpec",
    "WorkloadModel",
    "aggregate",
    "analyze",
    "apply_profile",
    "band_energy",
    "band_energy_fraction",
    "capacity_plan",
    "check",
    "check_frequency_domain",
    "check_time_domain",
    "compare_mitigations",
    "dominant_frequency",
    "events_csv",
    "gen_square_wave",
    "gen_training_trace",
    "gpu_power_fraction",
    "load_csv",
    "overhead_curve",
    "plot_svg",
    "render_svg",
    "required_capacity",
    "run_offline",
    "run_scenario",
    "save_csv",
    "server_trace",
    "simulate_firefly",
    "simulate_storage",
    "validate_device_trace",
    "write_artifacts",
]
