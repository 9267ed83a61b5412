"""Univariate Gaussian kernel with a Normal-Inverse-Gamma base measure."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ParameterError
from ..stats import as_random_source, student_t_ls_logpdf
from .base import ConjugateMixture, NonConjugateMixture, as_data, reflect_proposal

_LOG_2PI = math.log(2 * math.pi)


class _NormalInverseGamma:
    """Shared pieces for ``G0 = N(mu | mu0, sigma2/kappa0) InvGamma(sigma2 | alpha0, beta0)``.

    ``g0_priors`` is ``(mu0, kappa0, alpha0, beta0)``.
    """

    default_g0_priors = (0.0, 1.0, 1.0, 1.0)
    param_names = ("mu", "sigma2")

    def _check_priors(self):
        if len(self.g0_priors) != 4:
            raise ParameterError("g0_priors must be (mu0, kappa0, alpha0, beta0)")
        _, kappa0, alpha0, beta0 = self.g0_priors
        if not (kappa0 > 0 and alpha0 > 0 and beta0 > 0):
            raise ParameterError(f"kappa0, alpha0 and beta0 must be > 0, got {self.g0_priors}")

    def log_likelihood(self, y, theta):
        mu, sigma2 = theta
        yv = y[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -0.5 * (_LOG_2PI + np.log(sigma2)) - 0.5 * (yv - mu) ** 2 / sigma2
        return np.where(sigma2 > 0, out, -np.inf)

    def _draw_nig(self, mu_n, kappa_n, alpha_n, beta_n, rng, size):
        sigma2 = beta_n / rng.gamma(alpha_n, 1.0, size=size)
        mu = mu_n + np.sqrt(sigma2 / kappa_n) * rng.standard_normal(size)
        return mu, sigma2

    def prior_draw(self, n, rng):
        mu0, kappa0, alpha0, beta0 = self.g0_priors
        return self._draw_nig(mu0, kappa0, alpha0, beta0, as_random_source(rng), n)


class GaussianMixture(_NormalInverseGamma, ConjugateMixture):
    """Conjugate Gaussian kernel, ``theta = (mu, sigma2)``.

    Defaults are ``mu0 = 0, kappa0 = 1, alpha0 = 1, beta0 = 1``, which suit
    data rescaled to zero mean and unit standard deviation.
    """

    kernel_id = "normal"

    def posterior_parameters(self, y):
        """Return ``(mu_n, kappa_n, alpha_n, beta_n)`` for the observations ``y``."""
        y = as_data(y, 1)
        labels = np.zeros(y.shape[0], dtype=np.intp)
        return tuple(float(v[0]) for v in self._grouped_posterior(y, labels, 1))

    def _grouped_posterior(self, y, labels, k):
        mu0, kappa0, alpha0, beta0 = self.g0_priors
        yv = y[:, 0]
        n = np.bincount(labels, minlength=k).astype(float)
        total = np.bincount(labels, weights=yv, minlength=k)
        ybar = np.divide(total, n, out=np.zeros(k), where=n > 0)
        ss = np.bincount(labels, weights=(yv - ybar[labels]) ** 2, minlength=k)
        kappa_n = kappa0 + n
        mu_n = (kappa0 * mu0 + total) / kappa_n
        alpha_n = alpha0 + 0.5 * n
        beta_n = beta0 + 0.5 * ss + kappa0 * n * (ybar - mu0) ** 2 / (2 * kappa_n)
        return mu_n, kappa_n, alpha_n, beta_n

    def posterior_draw(self, y, n=1, rng=None, start=None):
        mu_n, kappa_n, alpha_n, beta_n = self.posterior_parameters(y)
        return self._draw_nig(mu_n, kappa_n, alpha_n, beta_n, as_random_source(rng), n)

    def update_cluster_params(self, y, labels, theta, rng, mh_steps=1):
        k = theta[0].shape[0]
        mu_n, kappa_n, alpha_n, beta_n = self._grouped_posterior(y, labels, k)
        return self._draw_nig(mu_n, kappa_n, alpha_n, beta_n, rng, k), 0, 0

    def predictive_parameters(self):
        """``(df, loc, scale)`` of the Student-t prior predictive."""
        mu0, kappa0, alpha0, beta0 = self.g0_priors
        return 2 * alpha0, mu0, math.sqrt(beta0 * (kappa0 + 1) / (alpha0 * kappa0))

    def log_predictive(self, y):
        y = as_data(y, 1)
        return student_t_ls_logpdf(y[:, 0], *self.predictive_parameters())


class GaussianMHMixture(_NormalInverseGamma, NonConjugateMixture):
    """The Gaussian kernel and NIG base measure, sampled as if non-conjugate.

    Cluster parameters are updated by random-walk Metropolis-Hastings and new
    clusters by auxiliary prior draws.  It targets the same posterior as
    :class:`GaussianMixture`, which makes it a cross-check for the
    non-conjugate machinery.
    """

    kernel_id = "normal_mh"
    default_mh_step_sizes = (0.5, 0.5)

    def log_prior_density(self, theta):
        mu0, kappa0, alpha0, beta0 = self.g0_priors
        mu, sigma2 = theta
        ok = sigma2 > 0
        s2 = np.where(ok, sigma2, 1.0)
        out = (-0.5 * (_LOG_2PI + np.log(s2 / kappa0)) - 0.5 * kappa0 * (mu - mu0) ** 2 / s2
               + alpha0 * math.log(beta0) - math.lgamma(alpha0)
               - (alpha0 + 1) * np.log(s2) - beta0 / s2)
        return np.where(ok, out, -np.inf)

    def mh_parameter_proposal(self, old, rng):
        return reflect_proposal(old, self.mh_step_sizes, rng, (False, True))
