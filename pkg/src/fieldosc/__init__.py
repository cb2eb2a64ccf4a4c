"""Field-coupled oscillator toolkit.

Simulation and analysis of small swarms of electric-field-coupled
logistic-map oscillators: the solo and coupled maps, shared-medium
engines (synchronous and event-driven), stability and bifurcation
analysis, swarm synchronization protocols, reflection discrimination,
and the sine-excited current-sensing mode.
"""

__version__ = "0.1.0"

from .maps import (
    CouplingGains,
    DelayGains,
    DivergenceError,
    MapParams,
    OscState,
    coupled_step,
    delayed_step,
    logistic_step,
    mirror_coupled_step,
    multi_coupled_step,
    pair_step,
    second_iterate_pair,
)
from .medium import (
    DipolePose,
    NoiseModel,
    SensingChain,
    coupling_from_geometry,
    fit_decay_exponent,
    mirror_response,
    sample_couplings,
    superpose,
)
from .sim import (
    CalibrationError,
    CalibrationMedium,
    CouplingSpec,
    DeviceSpec,
    SaturationError,
    Scenario,
    SimTrace,
    ValidationError,
    calibrate_k1,
    dac_quantize,
    run_event_driven,
    run_synchronous,
)
from .analysis import (
    BifurcationPoint,
    CalibrationCurves,
    FixedPointReport,
    PeriodClass,
    SyncMetrics,
    bifurcation_scan,
    classify_reflection,
    coupled_pair_stability,
    cycle_ratio,
    delayed_stability,
    detect_period,
    estimate_group_stats,
    find_bifurcation,
    fixed_points_single,
    sync_envelope_metrics,
)
from .currentmode import (
    ObjectPerturbation,
    SineDipole,
    detect_interference,
    rms_impedance,
    simulate_current_field,
)

__all__ = [
    "__version__",
    "BifurcationPoint",
    "CalibrationCurves",
    "CalibrationError",
    "CalibrationMedium",
    "CouplingGains",
    "CouplingSpec",
    "DelayGains",
    "DeviceSpec",
    "DipolePose",
    "DivergenceError",
    "FixedPointReport",
    "MapParams",
    "NoiseModel",
    "ObjectPerturbation",
    "OscState",
    "PeriodClass",
    "SaturationError",
    "Scenario",
    "SensingChain",
    "SimTrace",
    "SineDipole",
    "SyncMetrics",
    "ValidationError",
    "bifurcation_scan",
    "calibrate_k1",
    "classify_reflection",
    "coupled_pair_stability",
    "coupled_step",
    "coupling_from_geometry",
    "cycle_ratio",
    "dac_quantize",
    "delayed_stability",
    "delayed_step",
    "detect_interference",
    "detect_period",
    "estimate_group_stats",
    "find_bifurcation",
    "fit_decay_exponent",
    "fixed_points_single",
    "logistic_step",
    "mirror_coupled_step",
    "mirror_response",
    "multi_coupled_step",
    "pair_step",
    "rms_impedance",
    "run_event_driven",
    "run_synchronous",
    "sample_couplings",
    "second_iterate_pair",
    "simulate_current_field",
    "superpose",
    "sync_envelope_metrics",
]
