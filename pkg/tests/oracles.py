"""Independent reference computations used as test oracles.

Nothing here imports the package: every formula is written out again in
plain Python or with SciPy so that agreement is evidence of correctness.
"""

import math
import random

import numpy as np
from scipy import integrate, stats


def nig_posterior(y, mu0, kappa0, alpha0, beta0):
    """Normal-inverse-gamma update written with scalar loops."""
    n = len(y)
    if n == 0:
        return mu0, kappa0, alpha0, beta0
    total = 0.0
    for v in y:
        total += v
    ybar = total / n
    ss = 0.0
    for v in y:
        ss += (v - ybar) ** 2
    kappa_n = kappa0 + n
    mu_n = (kappa0 * mu0 + n * ybar) / kappa_n
    alpha_n = alpha0 + n / 2.0
    beta_n = beta0 + 0.5 * ss + kappa0 * n * (ybar - mu0) ** 2 / (2.0 * kappa_n)
    return mu_n, kappa_n, alpha_n, beta_n


def niw_posterior(y, mu0, kappa0, nu0, phi0):
    """Normal-inverse-Wishart update with explicit index loops."""
    n = len(y)
    d = len(mu0)
    if n == 0:
        return list(mu0), kappa0, nu0, [list(r) for r in phi0]
    ybar = [sum(row[a] for row in y) / n for a in range(d)]
    scatter = [[sum((row[a] - ybar[a]) * (row[b] - ybar[b]) for row in y) for b in range(d)]
               for a in range(d)]
    kappa_n = kappa0 + n
    mu_n = [(kappa0 * mu0[a] + n * ybar[a]) / kappa_n for a in range(d)]
    coef = kappa0 * n / kappa_n
    phi_n = [[phi0[a][b] + scatter[a][b] + coef * (ybar[a] - mu0[a]) * (ybar[b] - mu0[b])
              for b in range(d)] for a in range(d)]
    return mu_n, kappa_n, nu0 + n, phi_n


def gaussian_predictive_quadrature(y, mu0, kappa0, alpha0, beta0):
    """Prior predictive of the NIG model by integrating out the variance.

    The mean is integrated analytically (a convolution of two normals); the
    variance numerically against its inverse-gamma prior.
    """
    def integrand(s2):
        like = stats.norm.pdf(y, mu0, math.sqrt(s2 * (1.0 + 1.0 / kappa0)))
        return like * stats.invgamma.pdf(s2, alpha0, scale=beta0)
    val, _ = integrate.quad(integrand, 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500)
    return val


def gaussian_predictive_double_quadrature(y, mu0, kappa0, alpha0, beta0):
    """Same integral done numerically over both the mean and the variance."""
    log_ig = alpha0 * math.log(beta0) - math.lgamma(alpha0)

    def inner(s2):
        sd = math.sqrt(s2 / kappa0)

        def f(mu):
            return math.exp(-0.5 * (y - mu) ** 2 / s2 - 0.5 * (mu - mu0) ** 2 / sd ** 2) / (
                2 * math.pi * math.sqrt(s2) * sd)
        v, _ = integrate.quad(f, mu0 - 40 * sd, mu0 + 40 * sd, epsabs=1e-12, limit=200)
        return v * math.exp(log_ig - (alpha0 + 1) * math.log(s2) - beta0 / s2)
    val, _ = integrate.quad(inner, 0, np.inf, epsabs=1e-10, epsrel=1e-9, limit=500)
    return val


def niw_predictive_candidate(y, mu0, kappa0, nu0, phi0):
    """``p(y) = k(y | theta) p(theta) / p(theta | y)`` at a fixed ``theta``.

    The identity holds for any ``theta``; the posterior mean parameters are
    used.  Densities come from ``scipy.stats``.
    """
    mu_n, kappa_n, nu_n, phi_n = niw_posterior([list(y)], mu0, kappa0, nu0, phi0)
    phi_n = np.array(phi_n)
    d = len(mu0)
    sigma = phi_n / (nu_n + d + 1)
    mu = np.array(mu_n)
    like = stats.multivariate_normal.logpdf(y, mu, sigma)
    prior = (stats.multivariate_normal.logpdf(mu, mu0, sigma / kappa0)
             + stats.invwishart.logpdf(sigma, nu0, np.array(phi0)))
    post = (stats.multivariate_normal.logpdf(mu, mu_n, sigma / kappa_n)
            + stats.invwishart.logpdf(sigma, nu_n, phi_n))
    return math.exp(like + prior - post)


def nig_log_marginal(y, mu0, kappa0, alpha0, beta0):
    """Log marginal likelihood of a cluster under the NIG prior."""
    n = len(y)
    mu_n, kappa_n, alpha_n, beta_n = nig_posterior(y, mu0, kappa0, alpha0, beta0)
    return (math.lgamma(alpha_n) - math.lgamma(alpha0) + alpha0 * math.log(beta0)
            - alpha_n * math.log(beta_n) + 0.5 * (math.log(kappa0) - math.log(kappa_n))
            - 0.5 * n * math.log(2 * math.pi))


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def canonical(labels):
    """Relabel so clusters are numbered by first appearance."""
    seen = {}
    return tuple(seen.setdefault(c, len(seen)) for c in labels)


def partition_posterior(y, alpha, priors):
    """Exact posterior over partitions: ``alpha^K prod (n_c - 1)! prod m(y_c)``."""
    n = len(y)
    logp = {}
    for part in set_partitions(range(n)):
        lp = len(part) * math.log(alpha)
        for block in part:
            lp += math.lgamma(len(block)) + nig_log_marginal([y[i] for i in block], *priors)
        labels = [0] * n
        for c, block in enumerate(part):
            for i in block:
                labels[i] = c
        logp[canonical(labels)] = lp
    top = max(logp.values())
    z = sum(math.exp(v - top) for v in logp.values())
    return {k: math.exp(v - top) / z for k, v in logp.items()}


def cluster_count_posterior(y, alpha, priors):
    out = {}
    for labels, p in partition_posterior(y, alpha, priors).items():
        k = max(labels) + 1
        out[k] = out.get(k, 0.0) + p
    return out


def alpha_chain_mean(k, n, a, b, iterations, seed, start=1.0):
    """Straight-line auxiliary-variable concentration sampler with ``random``."""
    rng = random.Random(seed)
    alpha = start
    total = 0.0
    for _ in range(iterations):
        z = rng.betavariate(alpha + 1.0, n)
        rate = b - math.log(z)
        odds = (a + k - 1.0) / (n * rate)
        shape = a + k if rng.random() < odds / (1.0 + odds) else a + k - 1.0
        alpha = rng.gammavariate(shape, 1.0 / rate)
        total += alpha
    return total / iterations


def alpha_posterior_mean(k, n, a, b):
    """Exact ``E[alpha | k, n]`` for a Gamma(a, b) prior, by quadrature."""
    def logdens(x):
        return ((a - 1) * math.log(x) - b * x + k * math.log(x)
                + math.lgamma(x) - math.lgamma(x + n))
    ref = max(logdens(x) for x in np.linspace(0.01, 20, 2000))
    num, _ = integrate.quad(lambda x: x * math.exp(logdens(x) - ref), 0, np.inf, limit=400)
    den, _ = integrate.quad(lambda x: math.exp(logdens(x) - ref), 0, np.inf, limit=400)
    return num / den


def total_variation(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
