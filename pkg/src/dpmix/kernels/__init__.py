"""Mixture kernels and the registry that maps kernel ids to classes."""

from ..errors import ConfigError
from .base import (
    ConjugateMixture,
    MixingDistribution,
    NonConjugateMixture,
    as_data,
    as_params,
    concat,
    delete,
    n_components,
    reflect_proposal,
    take,
)
from .beta import BetaMixture
from .gaussian import GaussianMHMixture, GaussianMixture
from .mvnormal import MultivariateNormalMixture, SemiConjugateMultivariateNormalMixture
from .weibull import WeibullMixture

_REGISTRY = {}


def register_kernel(cls, kernel_id=None, *, replace=False):
    """Make a :class:`MixingDistribution` subclass available by name.

    Usable as a plain call or as a class decorator.
    """
    key = kernel_id or cls.kernel_id
    if key in _REGISTRY and _REGISTRY[key] is not cls and not replace:
        raise ConfigError(f"kernel id {key!r} is already registered")
    _REGISTRY[key] = cls
    return cls


def get_kernel(kernel_id):
    try:
        return _REGISTRY[kernel_id]
    except KeyError:
        raise ConfigError(f"unknown kernel {kernel_id!r}; available: "
                          f"{', '.join(sorted(_REGISTRY))}") from None


def available_kernels():
    return sorted(_REGISTRY)


def make_kernel(kernel_id, **kwargs):
    """Instantiate a registered kernel; ``None`` keyword values are dropped."""
    cls = get_kernel(kernel_id)
    return cls(**{k: v for k, v in kwargs.items() if v is not None})


def kernel_from_dict(spec):
    """Rebuild a kernel from :meth:`MixingDistribution.to_dict` output."""
    cls = get_kernel(spec["kernel_id"])
    return cls(g0_priors=spec["g0_priors"], mh_step_sizes=spec.get("mh_step_sizes"),
               hyper_prior_parameters=spec.get("hyper_prior_parameters"),
               **spec.get("fixed", {}))


for _cls in (GaussianMixture, GaussianMHMixture, MultivariateNormalMixture,
             SemiConjugateMultivariateNormalMixture, BetaMixture, WeibullMixture):
    register_kernel(_cls)

__all__ = [
    "BetaMixture", "ConjugateMixture", "GaussianMHMixture", "GaussianMixture",
    "MixingDistribution", "MultivariateNormalMixture", "NonConjugateMixture",
    "SemiConjugateMultivariateNormalMixture", "WeibullMixture", "as_data", "as_params",
    "available_kernels", "concat", "delete", "get_kernel", "kernel_from_dict",
    "make_kernel", "n_components", "reflect_proposal", "register_kernel", "take",
]
