"""Gibbs sampler for a Dirichlet process mixture.

The state keeps one parameter per occupied cluster; labels index that table
and are 0-based.  Conjugate kernels reassign points with the closed-form
prior predictive for a new cluster; non-conjugate kernels use ``m``
auxiliary parameters drawn from ``G0`` (Neal's Algorithm 8).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from . import measure
from .errors import ConfigError, InvalidStateError
from .kernels.base import concat, copy_params, delete, n_components, take
from .stats import as_random_source

#: MH steps used to move the initial non-conjugate parameter away from G0
INITIAL_MH_STEPS = 10


@dataclass(frozen=True)
class AlphaPrior:
    """Gamma(shape ``a``, rate ``b``) prior on a concentration parameter."""

    a: float = 2.0
    b: float = 4.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigError(f"concentration prior needs a > 0 and b > 0, got ({self.a}, {self.b})")

    def sample(self, rng):
        return float(rng.gamma(self.a, 1.0 / self.b))


@dataclass
class RetainedSample:
    """Snapshot of the sampler kept in the fit history."""

    cluster_params: tuple
    counts: np.ndarray
    labels: np.ndarray
    alpha: float
    iteration: int

    @property
    def weights(self):
        return self.counts / self.counts.sum()

    def __eq__(self, other):
        if not isinstance(other, RetainedSample):
            return NotImplemented
        return (self.iteration == other.iteration and self.alpha == other.alpha
                and np.array_equal(self.counts, other.counts)
                and np.array_equal(self.labels, other.labels)
                and len(self.cluster_params) == len(other.cluster_params)
                and all(np.array_equal(a, b) for a, b in zip(self.cluster_params,
                                                             other.cluster_params)))


def _draw_index(log_w, u):
    """Categorical draw from unnormalised log-weights using the uniform ``u``."""
    top = log_w.max()
    if not top > -np.inf:
        return -1
    c = np.cumsum(np.exp(log_w - top))
    return min(int(np.searchsorted(c, u * c[-1], side="right")), log_w.size - 1)


def _draw_linear(w, u):
    """Categorical draw from non-negative weights; ``-1`` if they sum to zero."""
    c = np.cumsum(w)
    if not c[-1] > 0:
        return -1
    return min(int(np.searchsorted(c, u * c[-1], side="right")), w.size - 1)


def _scaled(loglik, *extra):
    """Row shift making the largest log-weight of each row zero."""
    shift = loglik.max(axis=1, initial=-np.inf)
    for e in extra:
        shift = np.maximum(shift, e.max(axis=1))
    return np.where(np.isfinite(shift), shift, 0.0)[:, None]


def alpha_mixture_weights(a, b, k, n, z):
    """Branch odds of the concentration update given the auxiliary ``z``.

    Returns ``(pi1, pi2, pi)`` where ``pi`` is the probability of the
    ``Gamma(a + k, b - log z)`` branch.
    """
    pi1 = a + k - 1
    pi2 = n * (b - math.log(z))
    return pi1, pi2, pi1 / (pi1 + pi2)


def sample_concentration(alpha, k, n, prior, rng):
    """One auxiliary-variable update of a DP concentration parameter.

    Parameters
    ----------
    alpha : float
        Current value.
    k : int
        Number of occupied clusters.
    n : int
        Number of observations.
    prior : AlphaPrior
        Gamma shape-rate prior.
    rng : numpy.random.Generator
    """
    z = rng.beta(alpha + 1.0, n)
    z = max(z, np.finfo(float).tiny)
    rate = prior.b - math.log(z)
    _, _, pi = alpha_mixture_weights(prior.a, prior.b, k, n, z)
    shape = prior.a + k if rng.random() < pi else prior.a + k - 1
    return float(rng.gamma(shape, 1.0 / rate))


class DirichletProcess:
    """Dirichlet process mixture state and its Gibbs updates.

    Build one with :meth:`initialise`.  Update methods change the state in
    place and return it, so calls can be chained.

    Attributes
    ----------
    data : ndarray, shape (n, d)
    md : MixingDistribution
    labels : ndarray of int, shape (n,)
        Cluster index of every observation, ``0 .. K-1``.
    cluster_params : tuple of ndarray
        Parameter batch with one component per cluster.
    counts : ndarray of int, shape (K,)
    alpha : float
    alpha_prior : AlphaPrior
    m : int
        Auxiliary parameters per reassignment (non-conjugate kernels).
    mh_steps : int
        MH steps (or Gibbs cycles) per cluster per parameter update.
    history : list of RetainedSample
    """

    def __init__(self, data, md, labels, cluster_params, alpha, alpha_prior=None, m=3,
                 mh_steps=1, rng=None, history=None, iteration=0):
        self.data = data
        self.md = md
        self.labels = np.asarray(labels, dtype=np.int64)
        self.cluster_params = tuple(cluster_params)
        self.counts = np.bincount(self.labels, minlength=n_components(self.cluster_params))
        self.alpha = float(alpha)
        self.alpha_prior = alpha_prior if alpha_prior is not None else AlphaPrior()
        if int(m) < 1:
            raise ConfigError(f"m must be >= 1, got {m}")
        if int(mh_steps) < 0:
            raise ConfigError(f"mh_steps must be >= 0, got {mh_steps}")
        self.m = int(m)
        self.mh_steps = int(mh_steps)
        self.rng = as_random_source(rng)
        self.history = [] if history is None else list(history)
        self.iteration = int(iteration)
        self.mh_accepted = 0
        self.mh_proposed = 0

    # -- construction ------------------------------------------------------

    @classmethod
    def initialise(cls, data, md, alpha_prior=None, m=3, rng=None, mh_steps=1, alpha=None):
        """Place every observation in one cluster.

        The cluster parameter is a posterior draw given all the data
        (conjugate) or a prior draw refined by a few MH steps.  ``alpha`` is
        drawn from its prior unless given.
        """
        rng = as_random_source(rng)
        alpha_prior = alpha_prior if alpha_prior is not None else AlphaPrior()
        y = md.check_data(data)
        labels = np.zeros(y.shape[0], dtype=np.int64)
        if md.conjugate:
            theta = md.posterior_draw(y, 1, rng)
        else:
            theta = md.prior_draw(1, rng)
            theta, _, _ = md.update_cluster_params(y, labels, theta, rng, INITIAL_MH_STEPS)
        if alpha is None:
            alpha = alpha_prior.sample(rng)
        elif alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {alpha}")
        return cls(y, md, labels, theta, alpha, alpha_prior, m, mh_steps, rng)

    # -- properties --------------------------------------------------------

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def num_clusters(self):
        return self.counts.size

    @property
    def acceptance_rate(self):
        """Fraction of accepted MH proposals so far, ``nan`` if none were made."""
        return self.mh_accepted / self.mh_proposed if self.mh_proposed else float("nan")

    def point_params(self):
        """Parameter of the cluster holding each observation."""
        return take(self.cluster_params, self.labels)

    # -- Gibbs updates -----------------------------------------------------

    def cluster_component_update(self):
        """One sequential sweep reassigning every observation."""
        if self.md.conjugate:
            self._sweep_conjugate()
        else:
            self._sweep_auxiliary()
        return self

    def _sweep_conjugate(self):
        y, md, rng = self.data, self.md, self.rng
        n = y.shape[0]
        labels = self.labels
        theta = self.cluster_params
        counts = self.counts.astype(float)
        loglik = np.array(md.loglik_matrix(y, theta))
        log_pred = np.asarray(md.log_predictive(y), dtype=float).reshape(n, 1)
        shift = _scaled(loglik, log_pred)
        lik = np.exp(loglik - shift)
        new_w = self.alpha * np.exp(log_pred - shift)[:, 0]
        uniforms = rng.random(n)
        for i in range(n):
            c = labels[i]
            counts[c] -= 1
            if counts[c] == 0:
                theta = delete(theta, c)
                counts = np.delete(counts, c)
                lik = np.delete(lik, c, axis=1)
                labels[labels > c] -= 1
            j = _draw_linear(np.append(counts * lik[i], new_w[i]), uniforms[i])
            if j < 0:
                j = self._fallback(counts, self.alpha, 1, uniforms[i])
            if j == counts.size:
                new = md.posterior_draw(y[i:i + 1], 1, rng)
                theta = concat(theta, new)
                counts = np.append(counts, 1.0)
                lik = np.column_stack([lik, np.exp(md.loglik_matrix(y, new) - shift)])
            else:
                counts[j] += 1
            labels[i] = j
        self.cluster_params = theta
        self.counts = counts.astype(np.int64)

    def _sweep_auxiliary(self):
        y, md, rng, m = self.data, self.md, self.rng, self.m
        n = y.shape[0]
        labels = self.labels
        theta = self.cluster_params
        counts = self.counts.astype(float)
        loglik = np.array(md.loglik_matrix(y, theta))
        aux = md.prior_draw(n * m, rng)
        aux_loglik = np.array(md.loglik_pairs(np.repeat(y, m, axis=0), aux)).reshape(n, m)
        shift = _scaled(loglik, aux_loglik)
        lik = np.exp(loglik - shift)
        aux_weight = self.alpha / m
        aux_w = aux_weight * np.exp(aux_loglik - shift)
        uniforms = rng.random(n)
        for i in range(n):
            c = labels[i]
            counts[c] -= 1
            vacated = None
            row = aux_w[i]
            if counts[c] == 0:
                # the freed parameter becomes the first auxiliary
                vacated = take(theta, c)
                row = row.copy()
                row[0] = aux_weight * lik[i, c]
                theta = delete(theta, c)
                counts = np.delete(counts, c)
                lik = np.delete(lik, c, axis=1)
                labels[labels > c] -= 1
            k = counts.size
            j = _draw_linear(np.concatenate((counts * lik[i], row)), uniforms[i])
            if j < 0:
                j = self._fallback(counts, aux_weight, m, uniforms[i])
            if j >= k:
                slot = j - k
                new = vacated if (slot == 0 and vacated is not None) else take(aux, i * m + slot)
                theta = concat(theta, new)
                counts = np.append(counts, 1.0)
                lik = np.column_stack([lik, np.exp(md.loglik_matrix(y, new) - shift)])
                j = k
            else:
                counts[j] += 1
            labels[i] = j
        self.cluster_params = theta
        self.counts = counts.astype(np.int64)

    @staticmethod
    def _fallback(counts, new_weight, n_new, u):
        """Choice from the CRP prior weights when every likelihood vanishes."""
        j = _draw_linear(np.concatenate((counts, np.full(n_new, new_weight))), u)
        # an empty table with alpha = 0 still has to seat the point somewhere
        return counts.size if j < 0 else j

    def cluster_parameter_update(self):
        """Resample every cluster parameter given its members; labels are untouched."""
        theta, accepted, proposed = self.md.update_cluster_params(
            self.data, self.labels, self.cluster_params, self.rng, self.mh_steps)
        self.cluster_params = theta
        self.mh_accepted += accepted
        self.mh_proposed += proposed
        return self

    def update_alpha(self):
        """Auxiliary-variable update of the concentration parameter."""
        self.alpha = sample_concentration(self.alpha, self.num_clusters, self.n,
                                          self.alpha_prior, self.rng)
        return self

    def update_g0(self):
        """Resample base-measure hyper-parameters (kernels that support it)."""
        self.md = self.md.prior_parameters_update(self.cluster_params, self.rng)
        return self

    # -- fit loop ----------------------------------------------------------

    def snapshot(self):
        return RetainedSample(copy_params(self.cluster_params), self.counts.copy(),
                              self.labels.copy(), self.alpha, self.iteration)

    def fit(self, iterations, update_prior=False, store_samples=True, thinning=1,
            progress=None, update_concentration=True):
        """Run ``iterations`` Gibbs iterations.

        Each iteration reassigns labels, resamples cluster parameters, updates
        ``alpha`` and, with ``update_prior``, the base-measure parameters.
        Iterations ``1, 1 + thinning, 1 + 2*thinning, ...`` of this call are
        appended to :attr:`history` when ``store_samples`` is set.

        Parameters
        ----------
        progress : bool or callable, optional
            ``True`` writes a status line to stderr every 10% of the run; a
            callable receives the line instead.
        update_concentration : bool
            Set to ``False`` to hold ``alpha`` fixed.
        """
        iterations, thinning = int(iterations), int(thinning)
        if iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {iterations}")
        if thinning < 1:
            raise ConfigError(f"thinning must be >= 1, got {thinning}")
        sink = _progress_sink(progress)
        reported = 0
        for it in range(iterations):
            self.cluster_component_update()
            self.cluster_parameter_update()
            if update_concentration:
                self.update_alpha()
            if update_prior:
                self.update_g0()
            self.iteration += 1
            if store_samples and it % thinning == 0:
                self.history.append(self.snapshot())
            if sink is not None and (it + 1) * 10 // iterations > reported:
                reported = (it + 1) * 10 // iterations
                sink(f"iteration {it + 1}/{iterations}: K={self.num_clusters} "
                     f"alpha={self.alpha:.4g}")
        return self

    # -- new data ----------------------------------------------------------

    def cluster_label_predict(self, new_data, rng=None):
        """Sample cluster labels for new observations without touching the state.

        Points are labelled one at a time, so a cluster opened by one test
        point is available to the next.  Existing clusters are weighted by
        ``n_i k(y | theta_i)``; a new cluster by ``alpha`` times the prior
        predictive, or by ``alpha/m`` times each of ``m`` auxiliary G0 draws.

        Returns
        -------
        dict
            ``component_indexes`` (labels), ``cluster_params``, ``counts`` and
            ``num_labels``.
        """
        md = self.md
        rng = self.rng if rng is None else as_random_source(rng)
        y = md.check_data(new_data)
        theta = self.cluster_params
        counts = self.counts.astype(float)
        n = y.shape[0]
        loglik = np.array(md.loglik_matrix(y, theta))
        if md.conjugate:
            n_new, new_weight = 1, self.alpha
            new_ll = np.asarray(md.log_predictive(y), dtype=float).reshape(n, 1)
        else:
            n_new, new_weight = self.m, self.alpha / self.m
            aux = md.prior_draw(n * n_new, rng)
            new_ll = np.array(md.loglik_pairs(np.repeat(y, n_new, axis=0), aux))
            new_ll = new_ll.reshape(n, n_new)
        shift = _scaled(loglik, new_ll)
        lik = np.exp(loglik - shift)
        new_w = new_weight * np.exp(new_ll - shift)
        uniforms = rng.random(n)
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            k = counts.size
            j = _draw_linear(np.concatenate((counts * lik[i], new_w[i])), uniforms[i])
            if j < 0:
                j = self._fallback(counts, new_weight, n_new, uniforms[i])
            if j >= k:
                if md.conjugate:
                    new = md.posterior_draw(y[i:i + 1], 1, rng)
                else:
                    new = take(aux, i * n_new + (j - k))
                theta = concat(theta, new)
                counts = np.append(counts, 1.0)
                lik = np.column_stack([lik, np.exp(md.loglik_matrix(y, new) - shift)])
                j = k
            else:
                counts[j] += 1
            out[i] = j
        return {
            "component_indexes": out,
            "cluster_params": theta,
            "counts": counts.astype(np.int64),
            "num_labels": int(counts.size),
        }

    def change_observations(self, new_data, rng=None):
        """Replace the data, labelling each new point by a predictive draw.

        Clusters that receive no new points are dropped; history is kept.
        """
        pred = self.cluster_label_predict(new_data, rng)
        labels = pred["component_indexes"]
        used, labels = np.unique(labels, return_inverse=True)
        self.data = self.md.check_data(new_data)
        self.labels = labels.astype(np.int64)
        self.cluster_params = take(pred["cluster_params"], used)
        self.counts = np.bincount(self.labels, minlength=used.size)
        return self

    # -- posterior measures -----------------------------------------------

    def posterior_summary(self, grid, burnin=0, thinning=1, level=0.95):
        """Pointwise posterior density summary; see :func:`dpmix.measure.posterior_summary`."""
        return measure.posterior_summary(self, grid, burnin, thinning, level)

    def posterior_clusters(self, eps=measure.DEFAULT_EPS, rng=None):
        return measure.posterior_clusters(self, eps, rng)

    def posterior_function(self, rng=None, eps=measure.DEFAULT_EPS):
        return measure.posterior_function(self, rng, eps)

    # -- checks ------------------------------------------------------------

    def validate(self):
        """Raise :class:`InvalidStateError` if the bookkeeping is inconsistent."""
        validate_state(self)
        return self


DpState = DirichletProcess


def validate_state(state):
    n = state.data.shape[0]
    k = n_components(state.cluster_params)
    problems = []
    if state.labels.shape != (n,):
        problems.append(f"labels have shape {state.labels.shape}, expected ({n},)")
    elif n and (state.labels.min() < 0 or state.labels.max() >= k):
        problems.append("label outside the cluster table")
    if any(p.shape[0] != k for p in state.cluster_params):
        problems.append("parameter arrays disagree on the number of clusters")
    if state.counts.shape != (k,):
        problems.append(f"counts have shape {state.counts.shape}, expected ({k},)")
    elif not np.array_equal(state.counts, np.bincount(state.labels, minlength=k)):
        problems.append("counts do not match labels")
    elif np.any(state.counts < 1):
        problems.append("empty cluster in the table")
    if state.counts.sum() != n:
        problems.append("counts do not sum to n")
    if not (state.alpha >= 0 and math.isfinite(state.alpha)):
        problems.append(f"alpha is {state.alpha}")
    if problems:
        raise InvalidStateError("; ".join(problems))


def _progress_sink(progress):
    if progress is None or progress is False:
        return None
    if progress is True:
        return lambda line: print(line, file=sys.stderr)
    if callable(progress):
        return progress
    raise ConfigError("progress must be a bool or a callable")


# Functional aliases mirroring the method names.

def initialise(data, md, alpha_prior=None, m=3, rng=None, **kwargs):
    return DirichletProcess.initialise(data, md, alpha_prior, m, rng, **kwargs)


def cluster_component_update(state):
    return state.cluster_component_update()


def cluster_parameter_update(state):
    return state.cluster_parameter_update()


def update_alpha(state):
    return state.update_alpha()


def fit(state, iterations, update_prior=False, store_samples=True, thinning=1, progress=None):
    return state.fit(iterations, update_prior, store_samples, thinning, progress)


def change_observations(state, new_data, rng=None):
    return state.change_observations(new_data, rng)


def cluster_label_predict(state, new_data, rng=None):
    return state.cluster_label_predict(new_data, rng)
