"""Multivariate normal kernels: conjugate Normal-Inverse-Wishart and semi-conjugate."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from ..errors import ParameterError, UnsupportedOperationError
from ..stats import _spd_cholesky, as_random_source, sample_inverse_wishart
from ..stats import logpdf as _logpdf, inverse_wishart as _iw
from .base import ConjugateMixture, NonConjugateMixture, as_data, concat, take

_LOG_2PI = math.log(2 * math.pi)


def mvn_log_likelihood(y, mu, sigma):
    """Broadcast ``log N(y | mu, sigma)``; non-SPD ``sigma`` gives ``-inf``."""
    sign, logdet = np.linalg.slogdet(sigma)
    ok = sign > 0
    safe = np.where(ok[..., None, None], sigma, np.eye(sigma.shape[-1]))
    precision = np.linalg.inv(safe)
    diff = y - mu
    maha = np.einsum("...i,...ij,...j->...", diff, precision, diff)
    d = sigma.shape[-1]
    out = -0.5 * (d * _LOG_2PI + logdet + maha)
    return np.where(ok, out, -np.inf)


def _mvn_draws(mean, covs, rng):
    """One normal draw per covariance in ``covs`` (shape ``(n, d, d)``)."""
    chol = np.linalg.cholesky(covs)
    z = rng.standard_normal(covs.shape[:-1])
    return mean + np.einsum("nij,nj->ni", chol, z)


class _MvnBase:
    param_names = ("mu", "Sigma")

    def __init__(self, g0_priors=None, mh_step_sizes=None, hyper_prior_parameters=None,
                 dim=None):
        if g0_priors is None:
            g0_priors = self.default_priors(2 if dim is None else dim)
        super().__init__(g0_priors, mh_step_sizes, hyper_prior_parameters)

    @property
    def data_dim(self):
        return self.g0_priors[0].shape[0]

    @property
    def dim(self):
        return self.data_dim

    def log_likelihood(self, y, theta):
        mu, sigma = theta
        return mvn_log_likelihood(y, mu, sigma)


class MultivariateNormalMixture(_MvnBase, ConjugateMixture):
    """Conjugate multivariate normal kernel, ``theta = (mu, Sigma)``.

    ``G0 = N(mu | mu0, Sigma/kappa0) IW_nu0(Sigma | Phi0)`` with
    ``g0_priors = (mu0, kappa0, nu0, Phi0)``.  Defaults: ``mu0 = 0``,
    ``Phi0 = I``, ``kappa0 = d`` and ``nu0 = d``.
    """

    kernel_id = "mvnormal"

    @staticmethod
    def default_priors(dim):
        return (np.zeros(dim), float(dim), float(dim), np.eye(dim))

    def _check_priors(self):
        if len(self.g0_priors) != 4:
            raise ParameterError("g0_priors must be (mu0, kappa0, nu0, Phi0)")
        mu0, kappa0, nu0, phi0 = self.g0_priors
        d = np.shape(mu0)[0] if np.ndim(mu0) == 1 else -1
        if d < 1 or np.shape(phi0) != (d, d):
            raise ParameterError("mu0 must be a vector and Phi0 a matching square matrix")
        _spd_cholesky(phi0, "Phi0")
        if not kappa0 > 0:
            raise ParameterError(f"kappa0 must be > 0, got {kappa0}")
        if not nu0 > d - 1:
            raise ParameterError(f"nu0 must exceed d - 1, got {nu0}")

    def posterior_parameters(self, y):
        """Return ``(mu_n, kappa_n, nu_n, Phi_n)`` for the observations ``y``."""
        mu0, kappa0, nu0, phi0 = self.g0_priors
        y = as_data(y, self.dim)
        n = y.shape[0]
        if n == 0:
            return np.array(mu0), kappa0, nu0, np.array(phi0)
        ybar = y.mean(axis=0)
        centred = y - ybar
        scatter = centred.T @ centred
        dev = ybar - mu0
        kappa_n = kappa0 + n
        mu_n = (kappa0 * mu0 + n * ybar) / kappa_n
        phi_n = phi0 + scatter + (kappa0 * n / kappa_n) * np.outer(dev, dev)
        return mu_n, kappa_n, nu0 + n, 0.5 * (phi_n + phi_n.T)

    def _draw_niw(self, mu_n, kappa_n, nu_n, phi_n, rng, size):
        sigma = sample_inverse_wishart(nu_n, phi_n, rng, size=size)
        mu = _mvn_draws(mu_n, sigma / kappa_n, rng)
        return mu, sigma

    def prior_draw(self, n, rng):
        mu0, kappa0, nu0, phi0 = self.g0_priors
        return self._draw_niw(mu0, kappa0, nu0, phi0, as_random_source(rng), n)

    def posterior_draw(self, y, n=1, rng=None, start=None):
        return self._draw_niw(*self.posterior_parameters(y), as_random_source(rng), n)

    def predictive_parameters(self):
        """``(df, loc, shape)`` of the multivariate Student-t prior predictive."""
        mu0, kappa0, nu0, phi0 = self.g0_priors
        df = nu0 - self.dim + 1
        return df, np.array(mu0), phi0 * (kappa0 + 1) / (kappa0 * df)

    def log_predictive(self, y):
        y = as_data(y, self.dim)
        df, loc, shape = self.predictive_parameters()
        d = self.dim
        chol = np.linalg.cholesky(shape)
        z = np.linalg.solve(chol, (y - loc).T)
        maha = np.sum(z * z, axis=0)
        return (gammaln(0.5 * (df + d)) - gammaln(0.5 * df) - 0.5 * d * math.log(df * math.pi)
                - np.log(np.diag(chol)).sum() - 0.5 * (df + d) * np.log1p(maha / df))


class SemiConjugateMultivariateNormalMixture(_MvnBase, NonConjugateMixture):
    """Multivariate normal kernel with independent priors on ``mu`` and ``Sigma``.

    ``G0 = N(mu | mu0, Sigma0) IW_nu0(Sigma | Phi0)`` with
    ``g0_priors = (mu0, Sigma0, nu0, Phi0)``; defaults ``mu0 = 0``,
    ``Sigma0 = I``, ``nu0 = d``, ``Phi0 = I``.  New clusters come from auxiliary
    prior draws and cluster parameters from Gibbs cycles over the two
    conditionals, so no Metropolis-Hastings step size is needed.
    """

    kernel_id = "mvnormal2"
    default_mh_step_sizes = None

    @staticmethod
    def default_priors(dim):
        return (np.zeros(dim), np.eye(dim), float(dim), np.eye(dim))

    def _check_priors(self):
        if len(self.g0_priors) != 4:
            raise ParameterError("g0_priors must be (mu0, Sigma0, nu0, Phi0)")
        mu0, sigma0, nu0, phi0 = self.g0_priors
        d = np.shape(mu0)[0] if np.ndim(mu0) == 1 else -1
        if d < 1 or np.shape(sigma0) != (d, d) or np.shape(phi0) != (d, d):
            raise ParameterError("mu0 must be a vector with matching Sigma0 and Phi0")
        _spd_cholesky(sigma0, "Sigma0")
        _spd_cholesky(phi0, "Phi0")
        if not nu0 > d - 1:
            raise ParameterError(f"nu0 must exceed d - 1, got {nu0}")

    def prior_draw(self, n, rng):
        mu0, sigma0, nu0, phi0 = self.g0_priors
        rng = as_random_source(rng)
        sigma = sample_inverse_wishart(nu0, phi0, rng, size=n)
        mu = _mvn_draws(mu0, np.broadcast_to(sigma0, (n,) + sigma0.shape), rng)
        return mu, sigma

    def log_prior_density(self, theta):
        mu0, sigma0, nu0, phi0 = self.g0_priors
        mu, sigma = theta
        out = mvn_log_likelihood(mu, mu0, sigma0)
        iw = _iw(nu0, phi0)
        return out + np.array([_logpdf(iw, s) for s in sigma])

    def mh_parameter_proposal(self, old, rng):
        raise UnsupportedOperationError("mvnormal2 samples cluster parameters by Gibbs cycles")

    def gibbs_cycle(self, y, mu, rng):
        """One pass: ``Sigma | mu`` then ``mu | Sigma``; returns ``(mu, Sigma)``."""
        mu0, sigma0, nu0, phi0 = self.g0_priors
        n = y.shape[0]
        dev = y - mu
        sigma = sample_inverse_wishart(nu0 + n, phi0 + dev.T @ dev, rng)
        sigma0_inv = np.linalg.inv(sigma0)
        sigma_inv = np.linalg.inv(sigma)
        cov_n = np.linalg.inv(sigma0_inv + n * sigma_inv)
        cov_n = 0.5 * (cov_n + cov_n.T)
        total = y.sum(axis=0)
        mean_n = cov_n @ (sigma0_inv @ mu0 + sigma_inv @ total)
        mu = mean_n + np.linalg.cholesky(cov_n) @ rng.standard_normal(mean_n.shape[0])
        return mu, sigma

    def posterior_draw(self, y, n=1, rng=None, start=None):
        """``n`` successive Gibbs states, starting from ``start`` or a prior draw."""
        rng = as_random_source(rng)
        y = as_data(y, self.dim)
        current = self.prior_draw(1, rng) if start is None else take(start, -1)
        mu = current[0][0]
        chain = []
        for _ in range(n):
            mu, sigma = self.gibbs_cycle(y, mu, rng)
            chain.append((mu[None], sigma[None]))
        return concat(*chain)

    def update_cluster_params(self, y, labels, theta, rng, mh_steps=1):
        k = theta[0].shape[0]
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(k + 1))
        mus, sigmas = [], []
        for j in range(k):
            members = y[order[bounds[j]:bounds[j + 1]]]
            mu = theta[0][j]
            for _ in range(mh_steps):
                mu, sigma = self.gibbs_cycle(members, mu, rng)
            mus.append(mu)
            sigmas.append(sigma)
        return (np.array(mus), np.array(sigmas)), 0, 0
