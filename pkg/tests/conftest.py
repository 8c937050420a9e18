"""Shared fixtures and random-instance helpers."""

import numpy as np
import pytest

from glmpu import Scenario


def random_scenario(rng, M=None, N=None, delta=0.0):
    """A scenario with random amplitudes, variances and sampling angle."""
    M = int(rng.integers(1, 7)) if M is None else M
    N = int(rng.integers(2, 40)) if N is None else N
    amps = rng.uniform(0.3, 2.0, M) * np.exp(1j * rng.uniform(-np.pi, np.pi, M))
    return Scenario(
        M=M,
        N=N,
        gamma=float(rng.uniform(0.05, 0.5)),
        omega0=float(rng.uniform(50.0, 500.0)),
        amplitudes=amps,
        variances=rng.uniform(0.2, 3.0, M),
        delta=delta,
    )


def random_obs(rng, sc):
    return rng.standard_normal((sc.M, sc.N)) + 1j * rng.standard_normal((sc.M, sc.N))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def default_sc():
    return Scenario.default()


# acceptance gate lines, filled by test_acceptance.py and echoed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line[1])
