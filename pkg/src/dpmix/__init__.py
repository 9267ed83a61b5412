"""Dirichlet process mixture models fitted by Gibbs sampling."""

from . import kernels, stats
from .dp import AlphaPrior, DirichletProcess, DpState, RetainedSample, validate_state
from .errors import (
    ConfigError,
    DataDomainError,
    DPMixError,
    InsufficientSamplesError,
    InvalidStateError,
    MatrixDomainError,
    ParameterError,
    UnsupportedOperationError,
)
from .hdp import HierarchicalDirichletProcess, HdpState, validate_hdp_state
from .kernels import make_kernel, register_kernel
from .measure import (
    PosteriorSummaryTable,
    StickMeasure,
    posterior_clusters,
    posterior_function,
    posterior_summary,
    stick_breaking_measure,
    stick_breaking_weights,
)
from .stats import RandomSource

__version__ = "0.1.0"

__all__ = [
    "AlphaPrior", "ConfigError", "DPMixError", "DataDomainError", "DirichletProcess",
    "DpState", "HdpState", "HierarchicalDirichletProcess", "InsufficientSamplesError",
    "InvalidStateError", "MatrixDomainError", "ParameterError", "PosteriorSummaryTable",
    "RandomSource", "RetainedSample", "StickMeasure", "UnsupportedOperationError", "kernels",
    "make_kernel", "posterior_clusters", "posterior_function", "posterior_summary",
    "register_kernel", "stats", "stick_breaking_measure", "stick_breaking_weights",
    "validate_hdp_state", "validate_state",
]
