"""Weibull kernel for positive data."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ParameterError
from ..stats import as_random_source, gamma, pareto
from .base import NonConjugateMixture, reflect_proposal


class WeibullMixture(NonConjugateMixture):
    """Weibull kernel ``k(y | a, b) = (a/b) y^(a-1) exp(-y^a / b)``.

    The base measure is ``U(a | 0, phi) InvGamma(b | alpha, beta)`` with
    ``g0_priors = (phi, alpha, beta)``; the shape ``alpha`` stays fixed.  The
    hyper-prior ``phi ~ Pareto(x_m, k)``, ``beta ~ Gamma(alpha0, beta0)`` is
    given as ``hyper_prior_parameters = (x_m, k, alpha0, beta0)``.
    """

    kernel_id = "weibull"
    param_names = ("a", "b")
    default_g0_priors = (6.0, 2.0, 2.0)
    default_mh_step_sizes = (0.11, 0.11)
    default_hyper_prior_parameters = (6.0, 2.0, 1.0, 0.5)

    def _check_priors(self):
        if len(self.g0_priors) != 3 or not all(v > 0 for v in self.g0_priors):
            raise ParameterError(f"g0_priors must be (phi, alpha, beta), all > 0, "
                                 f"got {self.g0_priors}")

    def in_support(self, y):
        return y[:, 0] > 0

    def log_likelihood(self, y, theta):
        a, b = theta
        t = y[..., 0]
        ok = (a > 0) & (b > 0) & (t > 0)
        a = np.where(ok, a, 1.0)
        b = np.where(ok, b, 1.0)
        t = np.where(ok, t, 1.0)
        out = np.log(a / b) + (a - 1) * np.log(t) - t ** a / b
        return np.where(ok, out, -np.inf)

    def prior_draw(self, n, rng):
        phi, alpha, beta = self.g0_priors
        rng = as_random_source(rng)
        return rng.uniform(0.0, phi, size=n), beta / rng.gamma(alpha, 1.0, size=n)

    def log_prior_density(self, theta):
        phi, alpha, beta = self.g0_priors
        a, b = theta
        ok = (a > 0) & (a <= phi) & (b > 0)
        b = np.where(ok, b, 1.0)
        out = (-math.log(phi) + alpha * math.log(beta) - math.lgamma(alpha)
               - (alpha + 1) * np.log(b) - beta / b)
        return np.where(ok, out, -np.inf)

    def mh_parameter_proposal(self, old, rng):
        return reflect_proposal(old, self.mh_step_sizes, rng, (True, True))

    def hyper_posterior(self, cluster_params):
        x_m, k, alpha0, beta0 = self.hyper_prior_parameters
        _, alpha, _ = self.g0_priors
        a, b = (np.asarray(p) for p in cluster_params)
        n_c = a.size
        return {
            "phi": pareto(max(float(a.max()), x_m), k + n_c),
            "beta": gamma(alpha0 + n_c * alpha, beta0 + float(np.sum(1.0 / b))),
        }

    def prior_parameters_update(self, cluster_params, rng):
        post = self.hyper_posterior(cluster_params)
        phi = float(post["phi"].sample(rng, 1)[0])
        beta = float(post["beta"].sample(rng, 1)[0])
        return self.with_g0_priors((phi, self.g0_priors[1], beta))
