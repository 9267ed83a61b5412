"""Probability distributions and seeded random streams.

Every Gamma-type distribution here uses the **shape-rate** convention:
``gamma(shape, rate)`` has density proportional to ``x**(shape-1) * exp(-rate*x)``
and mean ``shape/rate``.  NumPy's ``Generator.gamma`` takes a *scale*, so draws
go through ``1/rate`` internally.

The Weibull family follows the parameterisation used by the Weibull mixture
kernel, ``k(y | a, b) = (a/b) y**(a-1) exp(-y**a / b)``; ``b`` is *not* the
usual scale parameter (that would be ``b**(1/a)``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import betaln, gammaln, multigammaln

from .errors import MatrixDomainError, ParameterError

_LOG_2PI = math.log(2.0 * math.pi)


class RandomSource(np.random.Generator):
    """Seeded PCG64 generator that can split off independent child streams.

    It *is* a :class:`numpy.random.Generator`, so every NumPy sampling method
    is available.  Identical seeds give identical draw sequences.

    Parameters
    ----------
    seed : int, optional
        Unsigned 64-bit seed.
    seed_sequence : numpy.random.SeedSequence, optional
        Used instead of ``seed`` when building child streams.
    """

    def __init__(self, seed=None, *, seed_sequence=None):
        if seed_sequence is None:
            if seed is not None and not 0 <= int(seed) < 2**64:
                raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
            seed_sequence = np.random.SeedSequence(seed)
        super().__init__(np.random.PCG64(seed_sequence))
        self.seed_sequence = seed_sequence

    @property
    def seed(self):
        return self.seed_sequence.entropy

    def spawn(self, n):
        """Return ``n`` independent child streams, deterministically."""
        return [RandomSource(seed_sequence=s) for s in self.seed_sequence.spawn(n)]

    def get_state(self):
        return self.bit_generator.state

    def set_state(self, state):
        self.bit_generator.state = state


def as_random_source(rng):
    """Coerce ``None``, an integer seed or a generator into a generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return RandomSource(rng)


class Family(enum.Enum):
    NORMAL = "normal"
    MULTIVARIATE_NORMAL = "multivariate_normal"
    GAMMA = "gamma"
    INVERSE_GAMMA = "inverse_gamma"
    BETA = "beta"
    BETA_MEAN_PRECISION = "beta_mean_precision"
    WEIBULL = "weibull"
    STUDENT_T = "student_t"
    INVERSE_WISHART = "inverse_wishart"
    PARETO = "pareto"
    UNIFORM = "uniform"
    POISSON = "poisson"


@dataclass(frozen=True)
class DistSpec:
    """A distribution family together with its parameters.

    Use the factory functions (:func:`normal`, :func:`gamma`, ...) rather than
    building instances directly; they document each parameterisation.
    """

    family: Family
    params: tuple

    def __post_init__(self):
        _validate(self)

    def logpdf(self, x):
        return logpdf(self, x)

    def pdf(self, x):
        return np.exp(logpdf(self, x))

    def sample(self, rng, n=1):
        return sample(self, rng, n)


def _positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise ParameterError(f"{name} must be > 0, got {value}")


def _spd_cholesky(matrix, name="matrix"):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise MatrixDomainError(f"{name} must be a square matrix")
    if not np.allclose(matrix, matrix.T, rtol=1e-10, atol=1e-12):
        raise MatrixDomainError(f"{name} must be symmetric")
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise MatrixDomainError(f"{name} is not positive definite") from None


def _validate(spec):
    f, p = spec.family, spec.params
    if f is Family.NORMAL:
        _positive("scale", p[1])
    elif f is Family.MULTIVARIATE_NORMAL:
        _spd_cholesky(p[1], "cov")
        if np.shape(p[0]) != (np.shape(p[1])[0],):
            raise ParameterError("mean and cov dimensions differ")
    elif f in (Family.GAMMA, Family.INVERSE_GAMMA, Family.BETA, Family.PARETO,
               Family.WEIBULL):
        _positive("first parameter", p[0])
        _positive("second parameter", p[1])
    elif f is Family.BETA_MEAN_PRECISION:
        mu, nu, upper = p
        _positive("precision", nu)
        _positive("upper bound", upper)
        if not 0 < mu < upper:
            raise ParameterError(f"mean must lie in (0, {upper}), got {mu}")
    elif f is Family.STUDENT_T:
        _positive("df", p[0])
        _positive("scale", p[2])
    elif f is Family.INVERSE_WISHART:
        d = np.shape(p[1])[0]
        _spd_cholesky(p[1], "scale matrix")
        if not p[0] > d - 1:
            raise ParameterError(f"df must exceed d - 1 = {d - 1}, got {p[0]}")
    elif f is Family.UNIFORM:
        if not p[0] < p[1]:
            raise ParameterError(f"uniform needs low < high, got {p}")
    elif f is Family.POISSON:
        if not p[0] >= 0:
            raise ParameterError(f"rate must be >= 0, got {p[0]}")


# -- factories ---------------------------------------------------------------

def normal(loc=0.0, scale=1.0):
    """Normal with mean ``loc`` and standard deviation ``scale``."""
    return DistSpec(Family.NORMAL, (float(loc), float(scale)))


def multivariate_normal(mean, cov):
    return DistSpec(Family.MULTIVARIATE_NORMAL,
                    (np.asarray(mean, dtype=float), np.asarray(cov, dtype=float)))


def gamma(shape, rate):
    """Gamma in shape-rate form (mean ``shape/rate``)."""
    return DistSpec(Family.GAMMA, (float(shape), float(rate)))


def inverse_gamma(shape, scale):
    """Inverse-Gamma: density ``scale**shape / Gamma(shape) x**(-shape-1) exp(-scale/x)``."""
    return DistSpec(Family.INVERSE_GAMMA, (float(shape), float(scale)))


def beta(a, b):
    return DistSpec(Family.BETA, (float(a), float(b)))


def beta_mean_precision(mu, nu, upper=1.0):
    """Beta on ``[0, upper]`` with mean ``mu`` and precision ``nu``.

    Shapes are ``mu*nu/upper`` and ``nu*(1 - mu/upper)``.
    """
    return DistSpec(Family.BETA_MEAN_PRECISION, (float(mu), float(nu), float(upper)))


def weibull(a, b):
    """Weibull with density ``(a/b) y**(a-1) exp(-y**a / b)``."""
    return DistSpec(Family.WEIBULL, (float(a), float(b)))


def student_t(df, loc=0.0, scale=1.0):
    return DistSpec(Family.STUDENT_T, (float(df), float(loc), float(scale)))


def inverse_wishart(df, scale_matrix):
    return DistSpec(Family.INVERSE_WISHART,
                    (float(df), np.asarray(scale_matrix, dtype=float)))


def pareto(x_m, k):
    """Pareto with minimum ``x_m`` and tail index ``k``."""
    return DistSpec(Family.PARETO, (float(x_m), float(k)))


def uniform(low=0.0, high=1.0):
    return DistSpec(Family.UNIFORM, (float(low), float(high)))


def poisson(rate):
    return DistSpec(Family.POISSON, (float(rate),))


# -- densities ---------------------------------------------------------------

def _beta_logpdf(x, a, b, upper=1.0):
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= upper)
    xs = np.where(inside, x, 0.5 * upper) / upper
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (a - 1) * np.log(xs) + (b - 1) * np.log1p(-xs) - betaln(a, b) - math.log(upper)
    return np.where(inside, out, -np.inf)


def logpdf(spec, x):
    """Log-density (or log-mass) of ``spec`` at ``x``; ``-inf`` outside the support."""
    f, p = spec.family, spec.params
    if f is Family.MULTIVARIATE_NORMAL:
        return _mvn_logpdf(x, p[0], p[1])
    if f is Family.INVERSE_WISHART:
        return _inverse_wishart_logpdf(x, p[0], p[1])
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if f is Family.NORMAL:
            loc, scale = p
            out = -0.5 * _LOG_2PI - math.log(scale) - 0.5 * ((x - loc) / scale) ** 2
        elif f is Family.GAMMA:
            shape, rate = p
            pos = x > 0
            xs = np.where(pos, x, 1.0)
            out = np.where(pos, shape * math.log(rate) - gammaln(shape)
                           + (shape - 1) * np.log(xs) - rate * xs, -np.inf)
        elif f is Family.INVERSE_GAMMA:
            shape, scale = p
            pos = x > 0
            xs = np.where(pos, x, 1.0)
            out = np.where(pos, shape * math.log(scale) - gammaln(shape)
                           - (shape + 1) * np.log(xs) - scale / xs, -np.inf)
        elif f is Family.BETA:
            out = _beta_logpdf(x, p[0], p[1])
        elif f is Family.BETA_MEAN_PRECISION:
            mu, nu, upper = p
            out = _beta_logpdf(x, mu * nu / upper, nu * (1 - mu / upper), upper)
        elif f is Family.WEIBULL:
            a, b = p
            pos = x > 0
            xs = np.where(pos, x, 1.0)
            out = np.where(pos, math.log(a / b) + (a - 1) * np.log(xs) - xs ** a / b, -np.inf)
        elif f is Family.STUDENT_T:
            out = student_t_ls_logpdf(x, *p)
        elif f is Family.PARETO:
            x_m, k = p
            inside = x >= x_m
            xs = np.where(inside, x, x_m)
            out = np.where(inside, math.log(k) + k * math.log(x_m) - (k + 1) * np.log(xs), -np.inf)
        elif f is Family.UNIFORM:
            low, high = p
            out = np.where((x >= low) & (x <= high), -math.log(high - low), -np.inf)
        elif f is Family.POISSON:
            (rate,) = p
            ok = (x >= 0) & (x == np.floor(x))
            xs = np.where(ok, x, 0.0)
            if rate == 0:
                out = np.where(ok & (xs == 0), 0.0, -np.inf)
            else:
                out = np.where(ok, xs * math.log(rate) - rate - gammaln(xs + 1), -np.inf)
        else:  # pragma: no cover
            raise ParameterError(f"unknown family {f}")
    return out if out.ndim else float(out)


def _mvn_logpdf(x, mean, cov):
    chol = np.linalg.cholesky(cov)
    d = mean.shape[0]
    diff = np.atleast_2d(np.asarray(x, dtype=float)) - mean
    z = linalg.solve_triangular(chol, diff.T, lower=True)
    out = (-0.5 * d * _LOG_2PI - np.log(np.diag(chol)).sum()
           - 0.5 * np.sum(z * z, axis=0))
    return out if np.ndim(x) > 1 else float(out[0])


def _inverse_wishart_logpdf(x, df, scale):
    x = np.asarray(x, dtype=float)
    d = scale.shape[0]
    try:
        chol_x = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return -np.inf
    logdet_x = 2 * np.log(np.diag(chol_x)).sum()
    logdet_s = np.linalg.slogdet(scale)[1]
    trace = np.trace(np.linalg.solve(x, scale))
    return float(0.5 * df * logdet_s - 0.5 * df * d * math.log(2) - multigammaln(0.5 * df, d)
                 - 0.5 * (df + d + 1) * logdet_x - 0.5 * trace)


def student_t_ls_logpdf(y, df, loc, scale):
    z = (np.asarray(y, dtype=float) - loc) / scale
    return (gammaln(0.5 * (df + 1)) - gammaln(0.5 * df) - 0.5 * math.log(df * math.pi)
            - np.log(scale) - 0.5 * (df + 1) * np.log1p(z * z / df))


def student_t_ls_pdf(y, df, loc, scale):
    """Location-scale Student-t density ``(1/scale) t_df((y - loc)/scale)``."""
    if not (df > 0 and scale > 0):
        raise ParameterError(f"df and scale must be > 0, got df={df}, scale={scale}")
    out = np.exp(student_t_ls_logpdf(y, df, loc, scale))
    return out if np.ndim(out) else float(out)


# -- sampling ----------------------------------------------------------------

def sample(spec, rng, n=1):
    """Draw ``n`` independent values from ``spec``.

    Scalar families return shape ``(n,)``; multivariate ones stack the draws
    along a leading axis.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    f, p = spec.family, spec.params
    if f is Family.NORMAL:
        return rng.normal(p[0], p[1], size=n)
    if f is Family.MULTIVARIATE_NORMAL:
        chol = np.linalg.cholesky(p[1])
        return p[0] + rng.standard_normal((n, p[0].shape[0])) @ chol.T
    if f is Family.GAMMA:
        return rng.gamma(p[0], 1.0 / p[1], size=n)
    if f is Family.INVERSE_GAMMA:
        return p[1] / rng.gamma(p[0], 1.0, size=n)
    if f is Family.BETA:
        return rng.beta(p[0], p[1], size=n)
    if f is Family.BETA_MEAN_PRECISION:
        mu, nu, upper = p
        return upper * rng.beta(mu * nu / upper, nu * (1 - mu / upper), size=n)
    if f is Family.WEIBULL:
        a, b = p
        return b ** (1.0 / a) * rng.weibull(a, size=n)
    if f is Family.STUDENT_T:
        return p[1] + p[2] * rng.standard_t(p[0], size=n)
    if f is Family.INVERSE_WISHART:
        return sample_inverse_wishart(p[0], p[1], rng, size=n)
    if f is Family.PARETO:
        x_m, k = p
        return x_m * (1.0 + rng.pareto(k, size=n))
    if f is Family.UNIFORM:
        return rng.uniform(p[0], p[1], size=n)
    if f is Family.POISSON:
        return rng.poisson(p[0], size=n)
    raise ParameterError(f"unknown family {f}")  # pragma: no cover


def sample_inverse_wishart(df, scale_matrix, rng, size=None):
    """Draw from the inverse-Wishart ``IW(df, scale_matrix)``.

    Uses the Bartlett decomposition of ``Wishart(df, scale_matrix^-1)`` and
    inverts the result.  The mean is ``scale_matrix / (df - d - 1)``.

    Returns a ``(d, d)`` matrix, or ``(size, d, d)`` when ``size`` is given.
    """
    chol_scale = _spd_cholesky(scale_matrix, "scale matrix")
    d = chol_scale.shape[0]
    if not df > d - 1:
        raise ParameterError(f"df must exceed d - 1 = {d - 1}, got {df}")
    n = 1 if size is None else int(size)
    # Wishart(df, S^-1) = C A A' C' with C = chol(S^-1); its inverse is
    # (A^-1 C^-1)' (A^-1 C^-1), and C^-1 = L' for S = L L'.
    a = np.zeros((n, d, d))
    a[:, np.arange(d), np.arange(d)] = np.sqrt(rng.chisquare(df - np.arange(d), size=(n, d)))
    lower = np.tril_indices(d, -1)
    a[:, lower[0], lower[1]] = rng.standard_normal((n, len(lower[0])))
    a_inv = np.linalg.inv(a)
    t = a_inv @ chol_scale.T
    out = np.swapaxes(t, -1, -2) @ t
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return out[0] if size is None else out
