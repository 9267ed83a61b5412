"""Exception hierarchy shared by every module."""


class DPMixError(Exception):
    """Base class for all package errors."""


class ParameterError(DPMixError, ValueError):
    """A distribution or kernel parameter lies outside its domain."""


class MatrixDomainError(ParameterError):
    """A matrix argument is not symmetric positive definite."""


class DataDomainError(DPMixError, ValueError):
    """Observations fall outside the support of the mixture kernel.

    ``index`` holds the (0-based) row of the first offending observation
    when it is known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnsupportedOperationError(DPMixError, NotImplementedError):
    """The kernel does not provide the requested operation."""


class InsufficientSamplesError(DPMixError, ValueError):
    """Not enough retained MCMC samples remain after burn-in and thinning."""


class ConfigError(DPMixError, ValueError):
    """Invalid model or run configuration."""


class InvalidStateError(DPMixError, AssertionError):
    """Sampler bookkeeping (labels, counts, parameter table) is inconsistent."""
