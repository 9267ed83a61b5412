import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import extension_kernels  # noqa: E402
from dpmix import RandomSource  # noqa: E402

extension_kernels.register_all()


@pytest.fixture
def rng():
    return RandomSource(20240611)


def bimodal_normal(rng, n=200, sep=2.0):
    """Equal halves from ``N(-sep, 1)`` and ``N(sep, 1)``, standardised."""
    y = np.concatenate([rng.normal(-sep, 1, n // 2), rng.normal(sep, 1, n - n // 2)])
    return (y - y.mean()) / y.std(ddof=1)


def beta_mixture_sample(rng, n=300):
    """Equal halves from ``Beta(1, 3)`` and ``Beta(7, 3)``."""
    return np.concatenate([rng.beta(1, 3, n // 2), rng.beta(7, 3, n - n // 2)])


def hierarchical_beta_sample(rng, n=200):
    """Two groups sharing a ``Beta(mu=0.25, tau=5)`` component.

    Group 1 adds ``Beta(mu=0.75, tau=6)``, group 2 ``Beta(mu=0.4, tau=10)``;
    each component contributes half of its group.
    """
    mu = np.array([0.25, 0.75, 0.4])
    tau = np.array([5.0, 6.0, 10.0])
    a, b = mu * tau, (1 - mu) * tau
    half = n // 2
    y1 = np.concatenate([rng.beta(a[0], b[0], half), rng.beta(a[1], b[1], n - half)])
    y2 = np.concatenate([rng.beta(a[0], b[0], half), rng.beta(a[2], b[2], n - half)])
    return [y1, y2], (a, b)


#: criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    order = sorted(ACCEPTANCE_RESULTS, key=lambda k: (int(str(k).rstrip("ab")), str(k)))
    for num in order:
        passed, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num!s:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
