"""Covariate-specific four-parameter logistic regression for item
functioning: four interchangeable estimators (NLS, MLE, EM, PLF),
asymptotic standard errors, DIF likelihood-ratio tests and a seeded
Monte Carlo study harness.
"""

__version__ = "0.1.0"

from .dataio import ColumnSchema, dichotomise, load_dataset, standardised_score
from .errors import (
    BoundarySolutionError,
    DataError,
    DegenerateWeightError,
    EstimationCrash,
    FourplError,
    InitializationError,
    InvalidParametersError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)
from .estimators import (
    ConvergenceStatus,
    FitOptions,
    FitResult,
    LatentWeights,
    Method,
    em_expectation,
    em_maximisation,
    fit,
    fit_em,
    fit_mle,
    fit_nls,
    fit_plf,
    plf_step_asymptotes,
    plf_step_b,
)
from .inference import (
    ConfidenceInterval,
    CovarianceEstimate,
    CovarianceKind,
    DifTestResult,
    covariance_for,
    lrt_dif,
    observed_information_covariance,
    sandwich_covariance,
    wald_intervals,
)
from .initialization import InitDiagnostics, initial_values
from .model import (
    ASYMPTOTE_MARGIN,
    Dataset,
    ItemParameters,
    ModelKind,
    ModelSpec,
    ProbabilityComponents,
    build_design,
    grad_prob,
    log_likelihood,
    predict_matrix,
    predict_prob,
    rss,
)
from .simulation import (
    ReplicationRecord,
    SimulationConfig,
    SimulationSummary,
    generate_dataset,
    group_truth,
    run_and_summarise,
    run_study,
    simple_truth,
    summarise_study,
)

__all__ = [
    "ASYMPTOTE_MARGIN",
    "BoundarySolutionError",
    "ColumnSchema",
    "ConfidenceInterval",
    "ConvergenceStatus",
    "CovarianceEstimate",
    "CovarianceKind",
    "DataError",
    "Dataset",
    "DegenerateWeightError",
    "DifTestResult",
    "EstimationCrash",
    "FitOptions",
    "FitResult",
    "FourplError",
    "InitDiagnostics",
    "InitializationError",
    "InvalidParametersError",
    "ItemParameters",
    "LatentWeights",
    "Method",
    "ModelKind",
    "ModelSpec",
    "NotPositiveDefiniteError",
    "ProbabilityComponents",
    "ReplicationRecord",
    "SimulationConfig",
    "SimulationSummary",
    "SingularMatrixError",
    "build_design",
    "covariance_for",
    "dichotomise",
    "em_expectation",
    "em_maximisation",
    "fit",
    "fit_em",
    "fit_mle",
    "fit_nls",
    "fit_plf",
    "generate_dataset",
    "grad_prob",
    "group_truth",
    "initial_values",
    "load_dataset",
    "log_likelihood",
    "lrt_dif",
    "observed_information_covariance",
    "plf_step_asymptotes",
    "plf_step_b",
    "predict_matrix",
    "predict_prob",
    "rss",
    "run_and_summarise",
    "run_study",
    "sandwich_covariance",
    "simple_truth",
    "standardised_score",
    "summarise_study",
    "wald_intervals",
]
