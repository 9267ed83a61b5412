import numpy as np
import pytest

import oracles
from dpmix import (AlphaPrior, HierarchicalDirichletProcess, RandomSource, make_kernel,
                   validate_hdp_state)
from dpmix.dp import RetainedSample
from dpmix.errors import DataDomainError, InvalidStateError
from dpmix.hdp import hdp_posterior_summary
from dpmix.kernels.base import as_params


def beta_groups(rng, n=60):
    a = np.where(rng.random(n) < 0.5, rng.beta(1.25, 3.75, n), rng.beta(4.5, 1.5, n))
    b = np.where(rng.random(n) < 0.5, rng.beta(1.25, 3.75, n), rng.beta(4.0, 6.0, n))
    return [a, b]


def test_initial_state(rng):
    hdp = HierarchicalDirichletProcess.initialise(beta_groups(rng), make_kernel("beta"),
                                                  AlphaPrior(2, 4), AlphaPrior(2, 4), rng=rng)
    assert sum(g.num_tables for g in hdp.groups) == 2
    assert hdp.num_dishes == 1
    assert hdp.gamma > 0 and np.all(hdp.alphas > 0)
    hdp.validate()


def test_single_group_is_valid(rng):
    hdp = HierarchicalDirichletProcess.initialise([rng.standard_normal(10)], make_kernel("normal"),
                                                  rng=rng)
    hdp.validate()
    hdp.fit(5)
    hdp.validate()


def test_out_of_support_group(rng):
    with pytest.raises(DataDomainError):
        HierarchicalDirichletProcess.initialise([[0.2], [1.2]], make_kernel("beta"), rng=rng)


@pytest.mark.parametrize("kernel", ["normal", "beta", "normal_mh"])
def test_bookkeeping_after_every_sweep(kernel, rng):
    md = make_kernel(kernel)
    hdp = HierarchicalDirichletProcess.initialise(beta_groups(rng, 30), md, rng=rng)
    for _ in range(30):
        hdp.fit(1, update_prior=kernel == "beta")
        validate_hdp_state(hdp)
        assert hdp.num_dishes <= sum(g.num_tables for g in hdp.groups)


def test_mvnormal_kernels_run(rng):
    data = [rng.standard_normal((15, 2)), rng.standard_normal((15, 2)) + 1]
    for kernel in ("mvnormal", "mvnormal2"):
        hdp = HierarchicalDirichletProcess.initialise(data, make_kernel(kernel, dim=2), rng=rng)
        hdp.fit(5)
        hdp.validate()


def test_concentrations_stay_positive():
    rng = RandomSource(4)
    hdp = HierarchicalDirichletProcess.initialise([[0.1, 0.5], [-0.3]], make_kernel("normal"),
                                                  rng=rng)
    for _ in range(10_000):
        hdp.concentration_update()
        assert hdp.gamma > 0 and np.all(hdp.alphas > 0)


def test_validator_detects_stale_counts(rng):
    hdp = HierarchicalDirichletProcess.initialise(beta_groups(rng, 10), make_kernel("beta"),
                                                  rng=rng)
    hdp.dish_tables = hdp.dish_tables + 1
    with pytest.raises(InvalidStateError):
        hdp.validate()


@pytest.mark.slow
def test_large_gamma_limit_matches_flat_partition_posterior():
    y = [-5.0, 0.0, 5.0]
    exact = oracles.partition_posterior(y, 1.0, (0.0, 1.0, 1.0, 1.0))
    rng = RandomSource(21)
    hdp = HierarchicalDirichletProcess.initialise([y], make_kernel("normal"), rng=rng,
                                                  gamma=1e3, alpha=1.0)
    counts = {}
    sweeps = 20_000
    hdp.fit(500, store_samples=False, update_alpha=False, update_gamma=False)
    for _ in range(sweeps):
        hdp.fit(1, store_samples=False, update_alpha=False, update_gamma=False)
        key = oracles.canonical(hdp.groups[0].dish_labels().tolist())
        counts[key] = counts.get(key, 0) + 1
    freq = {k: v / sweeps for k, v in counts.items()}
    assert oracles.total_variation(freq, exact) <= 0.05


def snapshot_history(k=3):
    s = RetainedSample(as_params(0.4, 5.0), np.array([4]), np.zeros(4, int), 1.0, 1)
    return [s] * k


def test_identical_snapshots_degenerate(rng):
    hdp = HierarchicalDirichletProcess.initialise(beta_groups(rng, 10), make_kernel("beta"),
                                                  rng=rng)
    hdp.groups[1].history = snapshot_history()
    t = hdp_posterior_summary(hdp, 1, np.linspace(0.1, 0.9, 5))
    np.testing.assert_array_equal(t.lower, t.upper)


def test_bad_group_index(rng):
    hdp = HierarchicalDirichletProcess.initialise(beta_groups(rng, 10), make_kernel("beta"),
                                                  rng=rng)
    hdp.fit(2)
    with pytest.raises(IndexError):
        hdp.posterior_summary(2, [0.5])


def test_group_snapshot_weights_follow_tables(rng):
    hdp = HierarchicalDirichletProcess.initialise(beta_groups(rng, 40), make_kernel("beta"),
                                                  rng=rng)
    hdp.fit(20)
    s = hdp.groups[0].history[-1]
    assert s.counts.sum() == hdp.groups[0].n
    assert s.weights.sum() == pytest.approx(1.0)
