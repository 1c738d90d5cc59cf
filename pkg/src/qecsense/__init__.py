"""Precision bounds, exact simulation and Bayesian estimation for error-corrected GHZ magnetometry."""

from .exceptions import (
    DegenerateFieldError,
    EmptyOverlapError,
    EmptyPosteriorError,
    InsufficientPointsError,
    InvalidModelError,
    NoInformationError,
    NumericalError,
    QecSenseError,
    SingularMatrixError,
    SizeLimitError,
    VariantError,
)
from .field import Basis, MagneticField, effective_field, single_qubit_unitary
from .protocol import OutcomeModel, ProbeSpec, Protocol, dual_probe, outcome_model, syndrome_distribution
from .fisher import (
    cfim_pec,
    cfim_stabilizer,
    cfim_total,
    closed_form_trace_inverse,
    qfim,
    scaling_exponent,
    trace_inverse,
)
from .sampling import ExperimentData, sample_experiment
from .bayes import BayesianFieldEstimator, EstimationResult, run_estimation

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "MagneticField",
    "effective_field",
    "single_qubit_unitary",
    "OutcomeModel",
    "ProbeSpec",
    "Protocol",
    "dual_probe",
    "outcome_model",
    "syndrome_distribution",
    "cfim_pec",
    "cfim_stabilizer",
    "cfim_total",
    "closed_form_trace_inverse",
    "qfim",
    "scaling_exponent",
    "trace_inverse",
    "ExperimentData",
    "sample_experiment",
    "BayesianFieldEstimator",
    "EstimationResult",
    "run_estimation",
    "QecSenseError",
    "DegenerateFieldError",
    "VariantError",
    "NumericalError",
    "SingularMatrixError",
    "NoInformationError",
    "InsufficientPointsError",
    "SizeLimitError",
    "InvalidModelError",
    "EmptyPosteriorError",
    "EmptyOverlapError",
]
