"""lyacert: simulate smooth autonomous ODE systems and verify composite
Lyapunov decay certificates, dissipation budgets, and convergence rates
along their trajectories."""

__version__ = "0.1.0"

from .errors import (
    EvaluationError,
    HypothesisViolationError,
    InvalidInputError,
    LyacertError,
    NoCertificateError,
)
from .dynamics import (
    IntegratorConfig,
    SystemSpec,
    TimeSeries,
    Trajectory,
    evaluate_along,
    integrate,
    numerical_derivative,
    quadrature,
)
from .certificates import (
    CompositeCertificate,
    DecayReport,
    IntegralReport,
    LyapunovPair,
    SlopeBound,
    VanishingReport,
    integral_estimate,
    make_certificate,
    observable_vanishing,
    optimal_delta,
    slope_bound_global,
    slope_bound_local,
    tail_mean,
    verify_strict_decay,
)
from .rates import (
    ConvergenceCheck,
    CriticalSetSpec,
    ErrorBoundParams,
    ExponentialRateReport,
    L2BoundReport,
    ProbeConfig,
    QuadraticGrowthParams,
    RateReport,
    StabilityVerdict,
    check_convergence_to_E,
    classify_stability,
    distance_series,
    exponential_rate,
    l2_distance_bound,
    pointwise_rate,
    rate_constant_K,
    subsequence_rate,
)
from .case_studies import (
    DINParams,
    ObjectiveSpec,
    PrimalDualParams,
    builtin_objectives,
    builtin_pd_instance,
    din_critical_set,
    din_energy,
    din_perturbed_energy,
    din_system,
    pd_critical_set,
    pd_energy,
    pd_perturbed_energy,
    pd_system,
)
from .scenario import BUILTIN_SYSTEMS, RunReport, Scenario, run_scenario, validate_scenario

__all__ = [
    "__version__",
    "LyacertError",
    "InvalidInputError",
    "EvaluationError",
    "HypothesisViolationError",
    "NoCertificateError",
    "SystemSpec",
    "IntegratorConfig",
    "Trajectory",
    "TimeSeries",
    "integrate",
    "evaluate_along",
    "numerical_derivative",
    "quadrature",
    "LyapunovPair",
    "SlopeBound",
    "CompositeCertificate",
    "DecayReport",
    "IntegralReport",
    "VanishingReport",
    "slope_bound_global",
    "slope_bound_local",
    "make_certificate",
    "optimal_delta",
    "verify_strict_decay",
    "integral_estimate",
    "observable_vanishing",
    "tail_mean",
    "CriticalSetSpec",
    "ConvergenceCheck",
    "ErrorBoundParams",
    "L2BoundReport",
    "QuadraticGrowthParams",
    "ExponentialRateReport",
    "RateReport",
    "ProbeConfig",
    "StabilityVerdict",
    "distance_series",
    "check_convergence_to_E",
    "l2_distance_bound",
    "rate_constant_K",
    "subsequence_rate",
    "pointwise_rate",
    "exponential_rate",
    "classify_stability",
    "ObjectiveSpec",
    "builtin_objectives",
    "DINParams",
    "din_system",
    "din_energy",
    "din_perturbed_energy",
    "din_critical_set",
    "PrimalDualParams",
    "pd_system",
    "pd_energy",
    "pd_critical_set",
    "pd_perturbed_energy",
    "builtin_pd_instance",
    "Scenario",
    "RunReport",
    "BUILTIN_SYSTEMS",
    "run_scenario",
    "validate_scenario",
]
