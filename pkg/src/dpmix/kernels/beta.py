"""Beta kernel on ``[0, T]`` in mean-precision form."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln

from ..errors import ParameterError
from ..stats import as_random_source, gamma
from .base import NonConjugateMixture, reflect_proposal

#: observations at 0 or T are evaluated this far inside the interval
BOUNDARY_CLAMP = 1e-10


class BetaMixture(NonConjugateMixture):
    """Beta kernel with mean ``mu`` and precision ``nu`` on ``[0, max_y]``.

    ``k(y | mu, nu) = y^(a-1) (T-y)^(b-1) / (B(a, b) T^(nu-1))`` with
    ``a = mu nu / T`` and ``b = nu (1 - mu/T)``.  The base measure is
    ``U(mu | 0, T) InvGamma(nu | alpha0, beta0)``, ``g0_priors = (alpha0, beta0)``.
    With ``update_prior`` enabled, ``beta0`` gets a ``Gamma(a, b)`` hyper-prior
    given by ``hyper_prior_parameters``.
    """

    kernel_id = "beta"
    param_names = ("mu", "nu")
    default_g0_priors = (2.0, 8.0)
    default_mh_step_sizes = (0.25, 0.25)
    default_hyper_prior_parameters = (1.0, 0.125)

    def __init__(self, g0_priors=None, mh_step_sizes=None, hyper_prior_parameters=None,
                 max_y=1.0):
        if not max_y > 0:
            raise ParameterError(f"max_y must be > 0, got {max_y}")
        self.max_y = float(max_y)
        super().__init__(g0_priors, mh_step_sizes, hyper_prior_parameters)

    def _check_priors(self):
        if len(self.g0_priors) != 2 or not all(v > 0 for v in self.g0_priors):
            raise ParameterError(f"g0_priors must be (alpha0 > 0, beta0 > 0), got {self.g0_priors}")

    def fixed_constants(self):
        return {"max_y": self.max_y}

    def in_support(self, y):
        return (y[:, 0] >= 0) & (y[:, 0] <= self.max_y)

    def log_likelihood(self, y, theta):
        mu, nu = theta
        upper = self.max_y
        yv = np.clip(y[..., 0], BOUNDARY_CLAMP, upper - BOUNDARY_CLAMP)
        ok = (mu > 0) & (mu < upper) & (nu > 0)
        mu = np.where(ok, mu, 0.5 * upper)
        nu = np.where(ok, nu, 1.0)
        a = mu * nu / upper
        b = nu - a
        out = ((a - 1) * np.log(yv) + (b - 1) * np.log(upper - yv) - betaln(a, b)
               - (nu - 1) * math.log(upper))
        inside = (y[..., 0] >= 0) & (y[..., 0] <= upper)
        return np.where(ok & inside, out, -np.inf)

    def prior_draw(self, n, rng):
        alpha0, beta0 = self.g0_priors
        rng = as_random_source(rng)
        mu = rng.uniform(0.0, self.max_y, size=n)
        nu = beta0 / rng.gamma(alpha0, 1.0, size=n)
        return mu, nu

    def log_prior_density(self, theta):
        alpha0, beta0 = self.g0_priors
        mu, nu = theta
        ok = (mu >= 0) & (mu <= self.max_y) & (nu > 0)
        nu = np.where(ok, nu, 1.0)
        out = (-math.log(self.max_y) + alpha0 * math.log(beta0) - math.lgamma(alpha0)
               - (alpha0 + 1) * np.log(nu) - beta0 / nu)
        return np.where(ok, out, -np.inf)

    def mh_parameter_proposal(self, old, rng):
        # mu is not reflected: proposals outside [0, T] get zero prior density
        return reflect_proposal(old, self.mh_step_sizes, rng, (False, True))

    def hyper_posterior(self, cluster_params):
        a, b = self.hyper_prior_parameters
        alpha0, _ = self.g0_priors
        nu = np.asarray(cluster_params[1])
        return {"beta0": gamma(a + nu.size * alpha0, b + np.sum(1.0 / nu))}

    def prior_parameters_update(self, cluster_params, rng):
        post = self.hyper_posterior(cluster_params)["beta0"]
        beta0 = float(post.sample(rng, 1)[0])
        return self.with_g0_priors((self.g0_priors[0], beta0))
