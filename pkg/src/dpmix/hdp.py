"""Hierarchical Dirichlet process mixtures for grouped data.

Inference uses the Chinese restaurant franchise: each group seats its
observations at local tables and every table serves one dish from a global
menu.  Dishes carry the shared component parameters.
"""

from __future__ import annotations

import math

import numpy as np

from .dp import AlphaPrior, RetainedSample, _draw_index, _draw_linear, sample_concentration
from .errors import ConfigError, InvalidStateError
from .kernels.base import concat, copy_params, delete, n_components, take
from .measure import summarize_history
from .stats import as_random_source


class HdpGroup:
    """Seating of one group: table per observation and dish per table."""

    def __init__(self, data, tables, table_dish, alpha):
        self.data = data
        self.tables = np.asarray(tables, dtype=np.int64)
        self.table_dish = np.asarray(table_dish, dtype=np.int64)
        self.table_counts = np.bincount(self.tables, minlength=self.table_dish.size)
        self.alpha = float(alpha)
        self.history = []

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def num_tables(self):
        return self.table_dish.size

    def dish_labels(self):
        return self.table_dish[self.tables]


class HierarchicalDirichletProcess:
    """State of a hierarchical DP mixture.

    Attributes
    ----------
    groups : list of HdpGroup
    dishes : parameter batch
        Global component parameters.
    dish_tables : ndarray of int
        Number of tables serving each dish, over all groups.
    gamma : float
        Concentration of the global DP.
    """

    def __init__(self, groups, md, dishes, gamma, alpha_prior, gamma_prior, m=3, mh_steps=1,
                 rng=None):
        self.groups = list(groups)
        self.md = md
        self.dishes = tuple(dishes)
        self.gamma = float(gamma)
        self.alpha_prior = alpha_prior
        self.gamma_prior = gamma_prior
        self.m = int(m)
        self.mh_steps = int(mh_steps)
        self.rng = as_random_source(rng)
        self.iteration = 0
        self.mh_accepted = 0
        self.mh_proposed = 0
        self._recount_dishes()

    @classmethod
    def initialise(cls, datasets, md, gamma_prior=None, alpha_prior=None, m=3, rng=None,
                   mh_steps=1, gamma=None, alpha=None):
        """One table per group, all serving a single dish fitted to the pooled data."""
        rng = as_random_source(rng)
        gamma_prior = gamma_prior if gamma_prior is not None else AlphaPrior()
        alpha_prior = alpha_prior if alpha_prior is not None else AlphaPrior()
        if len(datasets) < 1:
            raise ConfigError("at least one group is required")
        ys = [md.check_data(d) for d in datasets]
        pooled = np.vstack(ys)
        if md.conjugate:
            dish = md.posterior_draw(pooled, 1, rng)
        else:
            dish = md.prior_draw(1, rng)
            dish, _, _ = md.update_cluster_params(
                pooled, np.zeros(pooled.shape[0], dtype=np.int64), dish, rng, 10)
        groups = []
        for y in ys:
            a = alpha_prior.sample(rng) if alpha is None else alpha
            groups.append(HdpGroup(y, np.zeros(y.shape[0]), [0], a))
        g = gamma_prior.sample(rng) if gamma is None else gamma
        return cls(groups, md, dish, g, alpha_prior, gamma_prior, m, mh_steps, rng)

    # -- bookkeeping -------------------------------------------------------

    @property
    def num_dishes(self):
        return n_components(self.dishes)

    @property
    def alphas(self):
        return np.array([g.alpha for g in self.groups])

    @property
    def acceptance_rate(self):
        return self.mh_accepted / self.mh_proposed if self.mh_proposed else float("nan")

    def _recount_dishes(self):
        self.dish_tables = np.bincount(np.concatenate([g.table_dish for g in self.groups]),
                                       minlength=self.num_dishes)

    def _drop_dish(self, d):
        self.dishes = delete(self.dishes, d)
        for g in self.groups:
            g.table_dish[g.table_dish > d] -= 1

    def _add_dish(self, theta):
        self.dishes = concat(self.dishes, theta)
        return self.num_dishes - 1

    def shared_dishes(self):
        """Indices of dishes served in at least two groups."""
        used = np.zeros((len(self.groups), self.num_dishes), dtype=bool)
        for j, g in enumerate(self.groups):
            used[j, g.table_dish] = True
        return np.flatnonzero(used.sum(axis=0) >= 2)

    # -- sweeps ------------------------------------------------------------

    def _new_dish_terms(self, y, rng):
        """Per-observation log weights for a new dish, and the auxiliary draws."""
        md = self.md
        n = y.shape[0]
        with np.errstate(divide="ignore"):
            log_gamma = math.log(self.gamma) if self.gamma > 0 else -math.inf
        if md.conjugate:
            return log_gamma + np.asarray(md.log_predictive(y), float).reshape(n, 1), None
        aux = md.prior_draw(n * self.m, rng)
        ll = np.array(md.loglik_pairs(np.repeat(y, self.m, axis=0), aux)).reshape(n, self.m)
        return log_gamma - math.log(self.m) + ll, aux

    def customer_step(self, j):
        """Reseat every observation of group ``j``."""
        g, md, rng, m = self.groups[j], self.md, self.rng, self.m
        y = g.data
        n = y.shape[0]
        loglik = np.array(md.loglik_matrix(y, self.dishes))
        new_terms, aux = self._new_dish_terms(y, rng)
        # work with likelihoods scaled by a per-row constant
        shift = np.maximum(loglik.max(axis=1, initial=-np.inf), new_terms.max(axis=1))
        shift = np.where(np.isfinite(shift), shift, 0.0)[:, None]
        lik = np.exp(loglik - shift)
        new_lik = np.exp(new_terms - shift)
        aux_weight = self.gamma / m
        tables = g.tables
        table_counts = g.table_counts.astype(float)
        dish_tables = self.dish_tables.astype(float)
        u = rng.random((n, 2))
        for i in range(n):
            t = tables[i]
            table_counts[t] -= 1
            new_row = new_lik[i]
            vacated = None
            if table_counts[t] == 0:
                d = g.table_dish[t]
                table_counts = np.delete(table_counts, t)
                g.table_dish = np.delete(g.table_dish, t)
                tables[tables > t] -= 1
                dish_tables[d] -= 1
                if dish_tables[d] == 0:
                    if aux is not None:
                        # the freed dish becomes the first auxiliary
                        vacated = take(self.dishes, d)
                        new_row = new_row.copy()
                        new_row[0] = aux_weight * lik[i, d]
                    lik = np.delete(lik, d, axis=1)
                    dish_tables = np.delete(dish_tables, d)
                    self._drop_dish(d)
            menu = np.concatenate((dish_tables * lik[i], new_row))
            menu_total = menu.sum()
            w = np.append(table_counts * lik[i, g.table_dish],
                          g.alpha * menu_total / (dish_tables.sum() + self.gamma))
            k = _draw_linear(w, u[i, 0])
            if k < 0:
                k = _draw_linear(np.append(table_counts, g.alpha), u[i, 0])
                k = table_counts.size if k < 0 else k
            if k == table_counts.size:
                d = _draw_linear(menu, u[i, 1])
                if d < 0:
                    d = _draw_linear(dish_tables, u[i, 1])
                    d = dish_tables.size if d < 0 else d
                if d >= dish_tables.size:
                    slot = d - dish_tables.size
                    if aux is None:
                        theta = md.posterior_draw(y[i:i + 1], 1, rng)
                    elif slot == 0 and vacated is not None:
                        theta = vacated
                    else:
                        theta = take(aux, i * m + slot)
                    d = self._add_dish(theta)
                    dish_tables = np.append(dish_tables, 0.0)
                    lik = np.column_stack([lik, np.exp(md.loglik_matrix(y, theta) - shift)])
                dish_tables[d] += 1
                g.table_dish = np.append(g.table_dish, d)
                table_counts = np.append(table_counts, 1.0)
            else:
                table_counts[k] += 1
            tables[i] = k
        g.table_counts = table_counts.astype(np.int64)
        self.dish_tables = dish_tables.astype(np.int64)

    def table_step(self, j):
        """Reassign the dish of every table in group ``j``.

        A table's weight under a dish is the joint likelihood of its
        customers; new dishes are proposed from ``m`` auxiliary ``G0`` draws.
        """
        g, md, rng, m = self.groups[j], self.md, self.rng, self.m
        y = g.data
        n_tables = g.num_tables
        loglik = np.array(md.loglik_matrix(y, self.dishes))
        table_ll = np.zeros((n_tables, self.num_dishes))
        np.add.at(table_ll, g.tables, loglik)
        order = np.argsort(g.tables, kind="stable")
        bounds = np.searchsorted(g.tables[order], np.arange(n_tables + 1))
        aux = md.prior_draw(n_tables * m, rng)
        log_aux_weight = math.log(self.gamma / m) if self.gamma > 0 else -math.inf
        u = rng.random(n_tables)
        for t in range(n_tables):
            members = y[order[bounds[t]:bounds[t + 1]]]
            aux_t = take(aux, np.arange(t * m, (t + 1) * m))
            aux_ll = md.loglik_matrix(members, aux_t).sum(axis=0)
            d = g.table_dish[t]
            self.dish_tables[d] -= 1
            if self.dish_tables[d] == 0:
                aux_t = tuple(a.copy() for a in aux_t)
                for a, p in zip(aux_t, take(self.dishes, d)):
                    a[0] = p[0]
                aux_ll = aux_ll.copy()
                aux_ll[0] = table_ll[t, d]
                table_ll = np.delete(table_ll, d, axis=1)
                self.dish_tables = np.delete(self.dish_tables, d)
                self._drop_dish(d)
            with np.errstate(divide="ignore"):
                log_w = np.concatenate((np.log(self.dish_tables) + table_ll[t],
                                        log_aux_weight + aux_ll))
            k = _draw_index(log_w, u[t])
            if k < 0:
                with np.errstate(divide="ignore"):
                    k = _draw_index(np.concatenate((np.log(self.dish_tables),
                                                    np.full(m, log_aux_weight))), u[t])
                k = self.num_dishes if k < 0 else k
            if k >= self.num_dishes:
                theta = take(aux_t, k - self.num_dishes)
                k = self._add_dish(theta)
                self.dish_tables = np.append(self.dish_tables, 0)
                col = np.zeros(n_tables)
                np.add.at(col, g.tables, md.loglik_matrix(y, theta)[:, 0])
                table_ll = np.column_stack([table_ll, col])
            self.dish_tables[k] += 1
            g.table_dish[t] = k

    def dish_update(self):
        """Resample each dish parameter from its pooled data across groups."""
        y = np.vstack([g.data for g in self.groups])
        labels = np.concatenate([g.dish_labels() for g in self.groups])
        theta, accepted, proposed = self.md.update_cluster_params(
            y, labels, self.dishes, self.rng, self.mh_steps)
        self.dishes = theta
        self.mh_accepted += accepted
        self.mh_proposed += proposed

    def concentration_update(self, update_alpha=True, update_gamma=True):
        if update_alpha:
            for g in self.groups:
                g.alpha = sample_concentration(g.alpha, g.num_tables, g.n, self.alpha_prior,
                                               self.rng)
        if update_gamma:
            total_tables = int(sum(g.num_tables for g in self.groups))
            self.gamma = sample_concentration(self.gamma, self.num_dishes, total_tables,
                                              self.gamma_prior, self.rng)

    def group_snapshot(self, j):
        """Group ``j`` as a flat mixture: dish parameters weighted by table sizes."""
        g = self.groups[j]
        used, labels = np.unique(g.dish_labels(), return_inverse=True)
        return RetainedSample(copy_params(take(self.dishes, used)),
                              np.bincount(labels, minlength=used.size), labels.astype(np.int64),
                              g.alpha, self.iteration)

    def fit(self, iterations, update_prior=False, store_samples=True, thinning=1,
            update_alpha=True, update_gamma=True):
        """Run ``iterations`` franchise sweeps.

        One sweep reseats customers and reassigns table dishes group by
        group, resamples dish parameters, then the concentrations and
        (optionally) the base-measure hyper-parameters.
        """
        iterations, thinning = int(iterations), int(thinning)
        if iterations < 1 or thinning < 1:
            raise ConfigError("iterations and thinning must be >= 1")
        for it in range(iterations):
            for j in range(len(self.groups)):
                self.customer_step(j)
                self.table_step(j)
            self.dish_update()
            self.concentration_update(update_alpha, update_gamma)
            if update_prior:
                self.md = self.md.prior_parameters_update(self.dishes, self.rng)
            self.iteration += 1
            if store_samples and it % thinning == 0:
                for j, g in enumerate(self.groups):
                    g.history.append(self.group_snapshot(j))
        return self

    def posterior_summary(self, group_index, grid, burnin=0, thinning=1, level=0.95):
        """Pointwise density summary for one group."""
        if not 0 <= group_index < len(self.groups):
            raise IndexError(f"group index {group_index} out of range "
                             f"(0..{len(self.groups) - 1})")
        return summarize_history(self.groups[group_index].history, self.md, grid, burnin,
                                 thinning, level)

    def validate(self):
        validate_hdp_state(self)
        return self


HdpState = HierarchicalDirichletProcess


def validate_hdp_state(state):
    problems = []
    n_dishes = state.num_dishes
    if any(p.shape[0] != n_dishes for p in state.dishes):
        problems.append("dish parameter arrays disagree")
    counts = np.zeros(n_dishes, dtype=np.int64)
    total_tables = 0
    for j, g in enumerate(state.groups):
        if g.tables.shape != (g.n,):
            problems.append(f"group {j}: table labels have the wrong shape")
            continue
        if g.n and (g.tables.min() < 0 or g.tables.max() >= g.num_tables):
            problems.append(f"group {j}: table label out of range")
            continue
        if not np.array_equal(g.table_counts, np.bincount(g.tables, minlength=g.num_tables)):
            problems.append(f"group {j}: table counts do not match labels")
        if np.any(g.table_counts < 1):
            problems.append(f"group {j}: empty table")
        if g.num_tables and (g.table_dish.min() < 0 or g.table_dish.max() >= n_dishes):
            problems.append(f"group {j}: table serves an unknown dish")
            continue
        counts += np.bincount(g.table_dish, minlength=n_dishes)
        total_tables += g.num_tables
        if not g.alpha >= 0:
            problems.append(f"group {j}: alpha is {g.alpha}")
    if not np.array_equal(counts, state.dish_tables):
        problems.append("dish table counts are stale")
    if np.any(counts < 1):
        problems.append("a dish has no tables")
    if n_dishes > total_tables:
        problems.append("more dishes than tables")
    if not state.gamma >= 0:
        problems.append(f"gamma is {state.gamma}")
    if problems:
        raise InvalidStateError("; ".join(problems))


def hdp_initialise(datasets, md, gamma_prior=None, alpha_prior=None, m=3, rng=None, **kwargs):
    return HierarchicalDirichletProcess.initialise(datasets, md, gamma_prior, alpha_prior, m,
                                                   rng, **kwargs)


def hdp_fit(state, iterations, **kwargs):
    return state.fit(iterations, **kwargs)


def hdp_posterior_summary(state, group_index, grid, burnin=0, thinning=1, level=0.95):
    return state.posterior_summary(group_index, grid, burnin, thinning, level)
