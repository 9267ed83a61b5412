"""Mixing-distribution protocol shared by the built-in and user kernels.

Component parameters
--------------------
A batch of ``K`` component parameters is a tuple with one NumPy array per
kernel parameter, each carrying ``K`` along its leading axis.  The Gaussian
kernel uses ``(mu[K], sigma2[K])``, the multivariate normal
``(mu[K, d], Sigma[K, d, d])``.  A single component is a batch with ``K = 1``.

Observations are always a 2-D array ``(n, d)``; univariate kernels use
``d = 1`` and the censored Weibull fixture uses ``d = 2`` (time, indicator).

``log_likelihood(y, theta)`` must broadcast: ``y`` has shape ``(..., d)`` and
every array in ``theta`` has shape ``(..., *param_shape)``.  The helpers
:meth:`MixingDistribution.loglik_matrix` and
:meth:`MixingDistribution.loglik_pairs` build on that.

Writing a kernel
----------------
Subclass :class:`ConjugateMixture` and provide ``likelihood`` (or
``log_likelihood``), ``prior_draw``, ``posterior_draw`` and ``predictive``
(or ``log_predictive``); or subclass :class:`NonConjugateMixture` and provide
``likelihood``, ``prior_draw``, ``prior_density`` (or ``log_prior_density``)
and ``mh_parameter_proposal``.  Register it with
:func:`dpmix.kernels.register_kernel` to make it available by name.
"""

from __future__ import annotations

import copy

import numpy as np

from ..errors import DataDomainError, ParameterError, UnsupportedOperationError
from ..stats import as_random_source

_PAIRS = (
    ("likelihood", "log_likelihood"),
    ("predictive", "log_predictive"),
    ("prior_density", "log_prior_density"),
)


# -- parameter batch helpers -------------------------------------------------

def as_params(*arrays):
    """Build a one-component batch from per-parameter values."""
    return tuple(np.asarray(a, dtype=float)[None] for a in arrays)


def n_components(theta):
    return theta[0].shape[0]


def take(theta, index):
    """Select components; ``index`` may be an int (kept as a batch of 1) or an array."""
    if np.ndim(index) == 0:
        index = [int(index)]
    return tuple(p[index] for p in theta)


def concat(*thetas):
    thetas = [t for t in thetas if t is not None]
    return tuple(np.concatenate(ps, axis=0) for ps in zip(*thetas))


def delete(theta, index):
    return tuple(np.delete(p, index, axis=0) for p in theta)


def expand(theta):
    """Insert a leading broadcast axis on every parameter array."""
    return tuple(p[None] for p in theta)


def copy_params(theta):
    return tuple(np.array(p, copy=True) for p in theta)


def as_data(y, dim=None):
    """Coerce observations into a float ``(n, d)`` array."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y.reshape(1, 1)
    elif y.ndim == 1:
        y = y[:, None] if dim in (None, 1) else y[None, :]
    return y


class MixingDistribution:
    """A mixture kernel ``k(y | theta)`` paired with its base measure ``G0``.

    Instances are immutable once built: :meth:`prior_parameters_update` and
    :meth:`with_g0_priors` return new objects.

    Parameters
    ----------
    g0_priors : sequence
        Base-measure parameters; their meaning is kernel specific.
    mh_step_sizes : sequence of float, optional
        Random-walk scale ``h`` for each kernel parameter (Metropolis-Hastings
        kernels only).
    hyper_prior_parameters : sequence of float, optional
        Parameters of the hyper-prior placed on ``g0_priors`` by kernels that
        implement :meth:`prior_parameters_update`.
    """

    kernel_id = "abstract"
    conjugate = False
    #: number of observation columns expected, ``None`` for any
    data_dim = 1
    default_g0_priors = ()
    default_mh_step_sizes = None
    default_hyper_prior_parameters = None
    _missing_likelihood = _missing_predictive = _missing_prior_density = True

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        # guard against the mutual defaults recursing forever
        for plain, log in _PAIRS:
            if getattr(cls, plain) is getattr(MixingDistribution, plain) and \
                    getattr(cls, log) is getattr(MixingDistribution, log):
                setattr(cls, f"_missing_{plain}", True)
            else:
                setattr(cls, f"_missing_{plain}", False)

    def __init__(self, g0_priors=None, mh_step_sizes=None, hyper_prior_parameters=None):
        g0 = self.default_g0_priors if g0_priors is None else g0_priors
        self.g0_priors = tuple(_freeze(v) for v in g0)
        steps = self.default_mh_step_sizes if mh_step_sizes is None else mh_step_sizes
        if steps is not None:
            steps = _freeze(np.asarray(steps, dtype=float))
            if np.any(steps < 0):
                raise ParameterError(f"mh_step_sizes must be >= 0, got {steps}")
        self.mh_step_sizes = steps
        hyper = (self.default_hyper_prior_parameters if hyper_prior_parameters is None
                 else hyper_prior_parameters)
        self.hyper_prior_parameters = None if hyper is None else tuple(float(v) for v in hyper)
        self._check_priors()

    # -- construction helpers ----------------------------------------------

    def _check_priors(self):
        """Validate ``g0_priors``; raise :class:`ParameterError` on failure."""

    def fixed_constants(self):
        """Kernel constants that are neither priors nor step sizes (e.g. ``T``)."""
        return {}

    def with_g0_priors(self, g0_priors):
        new = copy.copy(self)
        new.g0_priors = tuple(_freeze(v) for v in g0_priors)
        new._check_priors()
        return new

    def to_dict(self):
        return {
            "kernel_id": self.kernel_id,
            "g0_priors": [_jsonable(v) for v in self.g0_priors],
            "mh_step_sizes": None if self.mh_step_sizes is None else self.mh_step_sizes.tolist(),
            "hyper_prior_parameters": (None if self.hyper_prior_parameters is None
                                       else list(self.hyper_prior_parameters)),
            "fixed": self.fixed_constants(),
        }

    def __repr__(self):
        return (f"{type(self).__name__}(g0_priors={self.g0_priors!r}, "
                f"mh_step_sizes={self.mh_step_sizes!r})")

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    __hash__ = None

    # -- data --------------------------------------------------------------

    def check_data(self, y):
        """Return ``y`` as an ``(n, d)`` array or raise :class:`DataDomainError`."""
        y = as_data(y, self.data_dim)
        if y.shape[0] == 0:
            raise DataDomainError("no observations supplied")
        if self.data_dim is not None and y.shape[1] != self.data_dim:
            raise DataDomainError(f"{self.kernel_id} expects {self.data_dim} column(s), "
                                  f"got {y.shape[1]}")
        bad = np.flatnonzero(~np.all(np.isfinite(y), axis=1))
        if bad.size:
            raise DataDomainError(f"non-finite observation at index {bad[0]}", int(bad[0]))
        bad = np.flatnonzero(~self.in_support(y))
        if bad.size:
            raise DataDomainError(f"observation {y[bad[0]].tolist()} at index {bad[0]} lies "
                                  f"outside the support of the {self.kernel_id} kernel",
                                  int(bad[0]))
        return y

    def in_support(self, y):
        return np.ones(y.shape[0], dtype=bool)

    # -- likelihood ----------------------------------------------------------

    def log_likelihood(self, y, theta):
        if self._missing_likelihood:
            raise NotImplementedError(f"{type(self).__name__} defines neither "
                                      "likelihood nor log_likelihood")
        with np.errstate(divide="ignore"):
            return np.log(self.likelihood(y, theta))

    def likelihood(self, y, theta):
        """Kernel density ``k(y | theta)``; broadcasts like :meth:`log_likelihood`."""
        if self._missing_likelihood:
            raise NotImplementedError(f"{type(self).__name__} defines neither "
                                      "likelihood nor log_likelihood")
        return np.exp(self.log_likelihood(y, theta))

    def loglik_matrix(self, y, theta):
        """``(n, K)`` matrix of ``log k(y_i | theta_j)``."""
        y = as_data(y, self.data_dim)
        out = self.log_likelihood(y[:, None, :], expand(theta))
        return np.broadcast_to(out, (y.shape[0], n_components(theta)))

    def loglik_pairs(self, y, theta):
        """``log k(y_i | theta_i)`` for aligned rows and components."""
        out = self.log_likelihood(as_data(y, self.data_dim), theta)
        return np.broadcast_to(out, (n_components(theta),))

    # -- base measure ----------------------------------------------------------

    def prior_draw(self, n, rng):
        """Draw ``n`` component parameters from ``G0``."""
        raise NotImplementedError

    def posterior_draw(self, y, n=1, rng=None, start=None):
        """Draw ``n`` component parameters from ``p(theta | y)``."""
        raise NotImplementedError

    def log_predictive(self, y):
        if not self.conjugate:
            raise UnsupportedOperationError(
                f"{self.kernel_id} is non-conjugate; the marginal density has no closed form")
        if self._missing_predictive:
            raise NotImplementedError(f"{type(self).__name__} defines no predictive")
        with np.errstate(divide="ignore"):
            return np.log(self.predictive(y))

    def predictive(self, y):
        """Prior predictive density ``int k(y | theta) dG0(theta)`` for each row of ``y``."""
        if not self.conjugate:
            raise UnsupportedOperationError(
                f"{self.kernel_id} is non-conjugate; the marginal density has no closed form")
        if self._missing_predictive:
            raise NotImplementedError(f"{type(self).__name__} defines no predictive")
        return np.exp(self.log_predictive(y))

    def log_prior_density(self, theta):
        if self.conjugate:
            raise UnsupportedOperationError(
                f"{self.kernel_id} is conjugate; prior_density is only used by "
                "Metropolis-Hastings kernels")
        if self._missing_prior_density:
            raise NotImplementedError(f"{type(self).__name__} defines no prior density")
        with np.errstate(divide="ignore"):
            return np.log(self.prior_density(theta))

    def prior_density(self, theta):
        """``G0`` density at each component of ``theta``."""
        if self.conjugate:
            raise UnsupportedOperationError(
                f"{self.kernel_id} is conjugate; prior_density is only used by "
                "Metropolis-Hastings kernels")
        if self._missing_prior_density:
            raise NotImplementedError(f"{type(self).__name__} defines no prior density")
        return np.exp(self.log_prior_density(theta))

    def mh_parameter_proposal(self, old, rng):
        raise UnsupportedOperationError(f"{self.kernel_id} does not propose MH moves")

    # -- hyper-parameters ----------------------------------------------------

    def hyper_posterior(self, cluster_params):
        """Conditional posteriors of the updatable ``G0`` parameters.

        Returns a dict mapping parameter names to :class:`~dpmix.stats.DistSpec`;
        empty when the kernel has no hyper-prior.
        """
        return {}

    def prior_parameters_update(self, cluster_params, rng):
        """Resample ``G0`` parameters given the distinct cluster parameters.

        Kernels without a hyper-prior return ``self`` unchanged.
        """
        return self

    # -- sampler hooks -------------------------------------------------------

    def update_cluster_params(self, y, labels, theta, rng, mh_steps=1):
        """Resample every cluster parameter given its members.

        Returns ``(theta, n_accepted, n_proposed)``; the counts are zero for
        kernels that draw exactly.
        """
        raise NotImplementedError


class ConjugateMixture(MixingDistribution):
    """Kernel with a closed-form posterior and prior predictive."""

    conjugate = True

    def update_cluster_params(self, y, labels, theta, rng, mh_steps=1):
        k = n_components(theta)
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(k + 1))
        draws = [self.posterior_draw(y[order[bounds[j]:bounds[j + 1]]], 1, rng)
                 for j in range(k)]
        return concat(*draws), 0, 0


class NonConjugateMixture(MixingDistribution):
    """Kernel sampled with random-walk Metropolis-Hastings."""

    conjugate = False
    default_mh_step_sizes = ()

    def log_target(self, y, labels, theta):
        """Per-cluster log of ``G0(theta_c) prod_{i in c} k(y_i | theta_c)``."""
        k = n_components(theta)
        lp = np.asarray(self.log_prior_density(theta), dtype=float).reshape(k)
        if len(labels):
            ll = self.loglik_pairs(y, take(theta, labels))
            lp = lp + np.bincount(labels, weights=ll, minlength=k)
        return np.where(np.isnan(lp), -np.inf, lp)

    def metropolis_hastings(self, y, labels, theta, rng, steps=1):
        """Run ``steps`` vectorised random-walk MH sweeps over all clusters.

        Returns ``(theta, n_accepted, n_proposed)``.
        """
        k = n_components(theta)
        current = self.log_target(y, labels, theta)
        accepted = 0
        for _ in range(steps):
            proposal = self.mh_parameter_proposal(theta, rng)
            with np.errstate(invalid="ignore"):
                proposed = self.log_target(y, labels, proposal)
                log_u = np.log(rng.random(k))
                accept = log_u < proposed - current
            accept |= np.isneginf(current) & np.isfinite(proposed)
            if accept.any():
                theta = tuple(np.where(accept.reshape((k,) + (1,) * (p.ndim - 1)), q, p)
                              for p, q in zip(theta, proposal))
                current = np.where(accept, proposed, current)
                accepted += int(accept.sum())
        return theta, accepted, k * steps

    def posterior_draw(self, y, n=1, rng=None, start=None):
        """``n`` successive MH states targeting ``G0(theta) prod k(y_j | theta)``.

        The chain starts from ``start`` or, by default, a prior draw.
        """
        rng = as_random_source(rng)
        y = as_data(y, self.data_dim)
        theta = self.prior_draw(1, rng) if start is None else take(start, -1)
        labels = np.zeros(y.shape[0], dtype=np.intp)
        chain = []
        for _ in range(n):
            theta, _, _ = self.metropolis_hastings(y, labels, theta, rng, 1)
            chain.append(theta)
        return concat(*chain)

    def update_cluster_params(self, y, labels, theta, rng, mh_steps=1):
        return self.metropolis_hastings(y, labels, theta, rng, mh_steps)


def reflect_proposal(old, steps, rng, reflect):
    """Gaussian random walk, reflecting chosen parameters through ``abs``.

    ``reflect[j]`` says whether parameter ``j`` is folded back into the
    positive half-line; increments are ``steps[j] * N(0, 1)``.
    """
    new = []
    for p, h, r in zip(old, steps, reflect):
        q = p + h * rng.standard_normal(p.shape)
        new.append(np.abs(q) if r else q)
    return tuple(new)


def _freeze(value):
    if isinstance(value, np.ndarray):
        value = value.astype(float, copy=True)
        value.setflags(write=False)
        return value
    if isinstance(value, (list, tuple)):
        return _freeze(np.asarray(value, dtype=float))
    return float(value)


def _jsonable(value):
    return value.tolist() if isinstance(value, np.ndarray) else value
