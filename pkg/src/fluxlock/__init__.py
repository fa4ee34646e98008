"""fluxlock: a stochastic testbench for phase-locking lasers to a shared master.

Simulates linearized and saturable laser models on uniform time grids,
passes them through splitters, delays and gates, locks them to a master
beam by feedforward or delayed feedback, and checks the resulting records
against closed-form spectra, variances and coherence conditions.
"""

from .core import (
    ActuatorRangeError,
    ConfigurationError,
    FeedbackInstabilityError,
    FieldTrace,
    FluxlockError,
    GridMismatchError,
    ModeSampleSeries,
    NumericalInstabilityError,
    PhotocurrentTrace,
    RealTrace,
    ScenarioValidationError,
    SeedStream,
    TimeGrid,
)
from .noise import vacuum_field, white_noise, wiener_process
from .laser import (
    DiffusionEstimate,
    LinearLaserSpec,
    PotentialLaserSpec,
    linearized_laser,
    nonlinear_laser,
    nonlinear_laser_ensemble,
    phase_diffusion_coefficient,
    phase_variance_rate,
    phasor_laser,
    potential_value,
    steady_state_amplitude,
)
from .optics import beam_splitter, delay, phase_shift, time_gate
from .detection import (
    balanced_homodyne,
    delayed_two_mode_homodyne,
    error_signal,
    linearized_flux,
    mode_integrate,
    photocurrent,
)
from .control import (
    FeedbackResult,
    FeedbackSpec,
    FeedforwardSpec,
    LockResult,
    dual_lock,
    feedback_lock,
    feedforward_lock,
    nominal_gain,
    unlock_and_coast,
)
from .analysis import (
    CoherenceReport,
    ComparisonReport,
    PowerLawFit,
    SpectrumEstimate,
    TableStats,
    analytic_curve,
    band_average,
    coherence_metric,
    compare_psd,
    delayed_homodyne_variance,
    ensemble_table_stats,
    increment_psd,
    power_law_fit,
    welch_psd,
)
from ._kernels import KERNEL_BACKEND
from .scenario import RunResult, ScenarioConfig, parse_scenario
from . import scenario

__version__ = "0.1.0"

__all__ = [
    "ActuatorRangeError",
    "ConfigurationError",
    "FeedbackInstabilityError",
    "FieldTrace",
    "FluxlockError",
    "GridMismatchError",
    "ModeSampleSeries",
    "NumericalInstabilityError",
    "PhotocurrentTrace",
    "RealTrace",
    "ScenarioValidationError",
    "SeedStream",
    "TimeGrid",
    "vacuum_field",
    "white_noise",
    "wiener_process",
    "DiffusionEstimate",
    "LinearLaserSpec",
    "PotentialLaserSpec",
    "linearized_laser",
    "nonlinear_laser",
    "nonlinear_laser_ensemble",
    "phasor_laser",
    "phase_diffusion_coefficient",
    "phase_variance_rate",
    "potential_value",
    "steady_state_amplitude",
    "beam_splitter",
    "delay",
    "phase_shift",
    "time_gate",
    "balanced_homodyne",
    "delayed_two_mode_homodyne",
    "error_signal",
    "linearized_flux",
    "mode_integrate",
    "photocurrent",
    "FeedbackResult",
    "FeedbackSpec",
    "FeedforwardSpec",
    "LockResult",
    "dual_lock",
    "feedback_lock",
    "feedforward_lock",
    "nominal_gain",
    "unlock_and_coast",
    "CoherenceReport",
    "ComparisonReport",
    "PowerLawFit",
    "SpectrumEstimate",
    "TableStats",
    "analytic_curve",
    "band_average",
    "coherence_metric",
    "compare_psd",
    "delayed_homodyne_variance",
    "ensemble_table_stats",
    "increment_psd",
    "power_law_fit",
    "welch_psd",
    "KERNEL_BACKEND",
    "RunResult",
    "ScenarioConfig",
    "parse_scenario",
    "scenario",
    "__version__",
]
