"""Labeled frequency-stability dataset generation for a converter-based
load-frequency-control loop: forward-sensitivity integration, per-criterion
search gradients with conflict-aware aggregation, and boundary walking."""

from .errors import (
    ConfigError,
    EmptyGradientSet,
    FreqwalkError,
    InfeasibleGain,
    InfeasiblePerturbation,
    MissingTangents,
    NoEquilibrium,
    NonFiniteState,
    NonPhysicalState,
    SchemaError,
    SingularInitialTangent,
)
from .dynamics import (
    GainVector,
    SystemParams,
    Thresholds,
    analytic_solution_k0,
    initial_state,
    initial_tangents,
    jac_theta,
    jac_x,
    rhs,
    steady_state_exact,
    validate_gains,
)
from .engine import (
    StreamSummary,
    Trajectory,
    convergence_probe,
    integrate,
    integrate_batch,
    integrate_directional,
)
from .criteria import (
    CriticalTimes,
    InvalidSample,
    StabilityReport,
    critical_times,
    evaluate,
    label_dataset,
)
from .sensitivity import (
    ComparisonReport,
    GradientSet,
    compare_methods,
    extract_gradients,
    finite_diff_gradients,
)
from .surgery import SurgeryConfig, surgery
from .sampler import (
    Dataset,
    SampleRecord,
    SamplerConfig,
    augment,
    generate_initial,
    rule_satisfied,
)
from .config import BenchSettings, RunConfig, load_config, save_config

__version__ = "0.1.0"

__all__ = [
    "BenchSettings",
    "ComparisonReport",
    "ConfigError",
    "CriticalTimes",
    "Dataset",
    "EmptyGradientSet",
    "FreqwalkError",
    "GainVector",
    "GradientSet",
    "InfeasibleGain",
    "InfeasiblePerturbation",
    "InvalidSample",
    "MissingTangents",
    "NoEquilibrium",
    "NonFiniteState",
    "NonPhysicalState",
    "RunConfig",
    "SampleRecord",
    "SamplerConfig",
    "SchemaError",
    "SingularInitialTangent",
    "StabilityReport",
    "StreamSummary",
    "SurgeryConfig",
    "SystemParams",
    "Thresholds",
    "Trajectory",
    "analytic_solution_k0",
    "augment",
    "compare_methods",
    "convergence_probe",
    "critical_times",
    "evaluate",
    "extract_gradients",
    "finite_diff_gradients",
    "generate_initial",
    "initial_state",
    "initial_tangents",
    "integrate",
    "integrate_batch",
    "integrate_directional",
    "jac_theta",
    "jac_x",
    "label_dataset",
    "load_config",
    "rhs",
    "rule_satisfied",
    "save_config",
    "steady_state_exact",
    "surgery",
    "validate_gains",
]
