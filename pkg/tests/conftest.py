"""Shared fixtures.

The Monte Carlo tests all use one driven three-state system; its ensembles
are sampled once per session (around 20 seconds) and shared, with the build
wall time recorded so runtime budgets can charge for it."""

import time

import pytest

from tftlab import (
    Hamiltonian,
    ProcessMeasure,
    StateSpace,
    backward_measure_bc1,
    backward_measure_bc2,
    build_ldb_protocol,
    gibbs_distribution,
    sample_ensemble,
)

ACCEPT_SEED = 1702
N_BIG = 10**5


def build_driven(beta=1.0, base_rate=2.0):
    """Three states, energies flat on [0, 0.5) then (0, 1, 2) on [0.5, 1],
    symmetric-rule rates, Gibbs start at time 0."""
    grid = [0.0, 0.5, 1.0]
    h = Hamiltonian.piecewise(grid, [[0.0, 0.0, 0.0], [0.0, 1.0, 2.0]], beta)
    protocol = build_ldb_protocol(h, base_rate, 1.0, breakpoints=grid)
    init, _ = gibbs_distribution(h, 0.0)
    return ProcessMeasure(space=StateSpace.finite(3), protocol=protocol, initial=init), h


def build_reversible(energies=(0.0, 0.5), beta=1.0, base_rate=1.0, horizon=1.0):
    """Time-independent energies with the Gibbs start: a stationary
    reversible chain whose entropy production vanishes path by path."""
    h = Hamiltonian.constant(energies, beta)
    protocol = build_ldb_protocol(h, base_rate, horizon, breakpoints=[0.0, horizon])
    init, _ = gibbs_distribution(h, 0.0)
    n = len(energies)
    return ProcessMeasure(space=StateSpace.finite(n), protocol=protocol, initial=init), h


@pytest.fixture(scope="session")
def driven():
    return build_driven()


@pytest.fixture(scope="session")
def driven_bc2(driven):
    P, h = driven
    return backward_measure_bc2(P, h)


@pytest.fixture(scope="session")
def driven_bc1(driven):
    P, _ = driven
    return backward_measure_bc1(P)


@pytest.fixture(scope="session")
def big_ensembles(driven, driven_bc2, driven_bc1):
    """dict with the forward ensemble, both backward ensembles, and the wall
    seconds spent sampling (charged to the first runtime budget that uses it)."""
    P, _ = driven
    t0 = time.perf_counter()
    paths_p = sample_ensemble(P, N_BIG, ACCEPT_SEED, lane=0)
    paths_q2 = sample_ensemble(driven_bc2, N_BIG, ACCEPT_SEED, lane=1)
    paths_q1 = sample_ensemble(driven_bc1, N_BIG, ACCEPT_SEED + 1, lane=1)
    return {
        "p": paths_p,
        "q_bc2": paths_q2,
        "q_bc1": paths_q1,
        "build_seconds": time.perf_counter() - t0,
    }
