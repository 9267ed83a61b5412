"""Posterior random measures and MCMC-averaged density summaries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataDomainError, InsufficientSamplesError, ParameterError
from .kernels.base import as_data, n_components, take
from .stats import as_random_source

DEFAULT_EPS = 1e-3


def stick_breaking_weights(z):
    """``w_k = z_k prod_{i<k} (1 - z_i)`` for stick fractions ``z`` in (0, 1)."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or np.any(~((z > 0) & (z < 1))):
        raise ParameterError("stick fractions must be a vector with entries in (0, 1)")
    return _weights(z)


def _weights(z):
    remaining = np.concatenate(([1.0], np.cumprod(1.0 - z)[:-1]))
    return z * remaining


def truncation_level(eps, concentration):
    """Number of sticks whose expected leftover mass is at most ``eps``.

    With ``z ~ Beta(1, c)`` the expected residual after ``N`` sticks is
    ``(c / (c + 1))^N``.
    """
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    if concentration <= 0:
        return 1
    ratio = concentration / (concentration + 1.0)
    return max(1, math.ceil(math.log(eps) / math.log(ratio)))


@dataclass
class StickMeasure:
    """Truncated atomic measure ``sum_k w_k delta_{atoms_k}``.

    ``truncation_residual`` is the stick mass left after the last atom,
    ``prod (1 - z_k)``.
    """

    weights: np.ndarray
    atoms: tuple
    z: np.ndarray
    truncation_residual: float

    @property
    def size(self):
        return self.weights.size

    def density(self, md, y):
        """Mixture density ``sum_k w_k k(y | atom_k)`` at the rows of ``y``."""
        return mixture_density(md, y, self.atoms, self.weights)


def mixture_density(md, y, params, weights):
    y = as_data(y, md.data_dim)
    with np.errstate(under="ignore"):
        return np.exp(md.loglik_matrix(y, params)) @ np.asarray(weights, dtype=float)


def stick_breaking_measure(alpha, md, rng, eps=DEFAULT_EPS, point_params=None):
    """Draw a truncated DP measure, optionally conditioned on data.

    Parameters
    ----------
    alpha : float
        Concentration parameter.
    md : MixingDistribution
        Supplies the base measure ``G0``.
    point_params : parameter batch, optional
        The parameter attached to each observation (with multiplicity).
        Each atom is a fresh ``G0`` draw with probability
        ``alpha / (alpha + n)`` and otherwise one of these, chosen uniformly.
    """
    rng = as_random_source(rng)
    n = 0 if point_params is None else n_components(point_params)
    c = alpha + n
    size = truncation_level(eps, c)
    z = rng.beta(1.0, c, size) if c > 0 else np.ones(size)
    weights = _weights(z)
    residual = float(np.prod(1.0 - z))

    fresh = rng.random(size) < (alpha / c if c > 0 else 1.0) if n else np.ones(size, bool)
    n_fresh = int(fresh.sum())
    if n_fresh == size:
        atoms = md.prior_draw(size, rng)
    else:
        picked = take(point_params, rng.integers(0, n, size - n_fresh))
        if n_fresh:
            drawn = md.prior_draw(n_fresh, rng)
            atoms = []
            for p, q in zip(picked, drawn):
                out = np.empty((size,) + p.shape[1:])
                out[fresh] = q
                out[~fresh] = p
                atoms.append(out)
            atoms = tuple(atoms)
        else:
            atoms = picked
    return StickMeasure(weights, atoms, z, residual)


def posterior_clusters(state, eps=DEFAULT_EPS, rng=None):
    """Draw the posterior random measure given the current sampler state."""
    rng = state.rng if rng is None else as_random_source(rng)
    return stick_breaking_measure(state.alpha, state.md, rng, eps, state.point_params())


class SampledDensity:
    """One draw of the posterior mixture density ``y -> sum_k w_k k(y | phi_k)``."""

    def __init__(self, md, measure):
        self.md = md
        self.measure = measure

    def __call__(self, y):
        return self.measure.density(self.md, y)


def posterior_function(state, rng=None, eps=DEFAULT_EPS):
    """Sample a mixture density from the posterior of the current state."""
    return SampledDensity(state.md, posterior_clusters(state, eps, rng))


@dataclass
class PosteriorSummaryTable:
    """Pointwise posterior mean, median and equal-tailed band of a density."""

    x: np.ndarray
    mean: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def header(self):
        if self.x.ndim == 1 or self.x.shape[1] == 1:
            cols = ["x"]
        else:
            cols = [f"x{j + 1}" for j in range(self.x.shape[1])]
        return cols + ["Mean", "Median", "Lower", "Upper"]

    def rows(self):
        x = self.x.reshape(self.x.shape[0], -1)
        for i in range(x.shape[0]):
            yield [*x[i], self.mean[i], self.median[i], self.lower[i], self.upper[i]]

    def to_csv(self, path=None):
        """Write ``x,Mean,Median,Lower,Upper``; returns the text if ``path`` is None."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for row in self.rows():
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None


def kept_samples(history, burnin=0, thinning=1):
    """History entries left after dropping ``burnin`` and keeping every ``thinning``-th."""
    burnin, thinning = int(burnin), int(thinning)
    if burnin < 0 or thinning < 1:
        raise ParameterError("burnin must be >= 0 and thinning >= 1")
    if burnin >= len(history):
        raise InsufficientSamplesError(
            f"burnin {burnin} leaves no samples out of {len(history)} retained")
    return history[burnin::thinning]


def summarize_curves(x, curves, level=0.95):
    """Summarise an ``(S, G)`` array of density evaluations pointwise."""
    if not 0 < level < 1:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    curves = np.asarray(curves, dtype=float)
    tail = (1.0 - level) / 2.0
    lower, median, upper = np.quantile(curves, [tail, 0.5, 1.0 - tail], axis=0,
                                       method="linear")
    return PosteriorSummaryTable(np.asarray(x, dtype=float), curves.mean(axis=0), median,
                                 lower, upper, float(level))


def summarize_history(history, md, grid, burnin=0, thinning=1, level=0.95):
    """Pointwise summary of the mixture densities stored in ``history``.

    Each retained sample contributes ``sum_c (n_c / n) k(x | theta_c)``.
    The computation is deterministic.
    """
    grid_arr = np.asarray(grid, dtype=float)
    if grid_arr.size == 0:
        raise DataDomainError("empty evaluation grid")
    y = as_data(grid_arr, md.data_dim)
    kept = kept_samples(history, burnin, thinning)
    curves = np.vstack([mixture_density(md, y, s.cluster_params, s.weights) for s in kept])
    x = grid_arr if grid_arr.ndim == 1 else y
    return summarize_curves(x, curves, level)


def posterior_summary(state, grid, burnin=0, thinning=1, level=0.95):
    """Posterior mean, median and ``level`` band of the density over ``grid``."""
    return summarize_history(state.history, state.md, grid, burnin, thinning, level)
