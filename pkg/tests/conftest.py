import numpy as np
import pytest

from prising.graph import CouplingMatrix, Network, coupling_scaled_adjacency

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_coupling(rng, n, density=None, normalize=True):
    """Random symmetric non-negative zero-diagonal coupling."""
    density = rng.uniform(0.2, 1.0) if density is None else density
    w = rng.uniform(0.1, 1.0, size=(n, n))
    mask = rng.random((n, n)) < density
    upper = np.triu(w * mask, k=1)
    A = upper + upper.T
    if normalize and A.sum() > 0:
        A /= A.sum(axis=1).max()
    return CouplingMatrix(A)


def random_spins(rng, n):
    return rng.choice(np.array([-1, 1]), size=n)


@pytest.fixture
def k2():
    return CouplingMatrix([[0.0, 0.5], [0.5, 0.0]])


@pytest.fixture
def k3_half():
    return coupling_scaled_adjacency(Network.from_edges(3, [(0, 1), (0, 2), (1, 2)]), 2.0)


@pytest.fixture
def path3():
    return Network.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def two_edge_four():
    return CouplingMatrix(Network.from_edges(4, [(0, 1, 1.0), (2, 3, 0.5)]).adjacency())
