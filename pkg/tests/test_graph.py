import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from prising.graph import (CouplingMatrix, GraphFormatError, Network,
                           coupling_normalized_laplacian, coupling_scaled_adjacency,
                           generate_erdos_renyi, generate_regular, lambda_n, load_edge_list,
                           load_outcomes, prune, row_sum_max, write_edge_list,
                           write_outcomes, zero_coupling)

from .conftest import random_coupling


def test_erdos_renyi_extremes():
    assert generate_erdos_renyi(5, 0.0, seed=1).num_edges == 0
    g = generate_erdos_renyi(5, 1.0, seed=1)
    assert g.num_edges == 10
    assert g.edge_set() == {(i, j) for i in range(5) for j in range(i + 1, 5)}


def test_erdos_renyi_edge_count_in_binomial_band():
    pairs = 200 * 199 // 2
    lo, hi = binom.ppf(0.00005, pairs, 0.5), binom.ppf(0.99995, pairs, 0.5)
    m = generate_erdos_renyi(200, 0.5, seed=7).num_edges
    assert lo <= m <= hi


def test_erdos_renyi_deterministic_per_seed():
    a, b = generate_erdos_renyi(50, 0.3, seed=11), generate_erdos_renyi(50, 0.3, seed=11)
    assert a.edge_set() == b.edge_set()
    assert a.edge_set() != generate_erdos_renyi(50, 0.3, seed=12).edge_set()


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_erdos_renyi_rejects_bad_probability(p):
    with pytest.raises(ValueError):
        generate_erdos_renyi(5, p, seed=1)


def test_regular_k4():
    g = generate_regular(4, 3, seed=1)
    assert g.edge_set() == {(i, j) for i in range(4) for j in range(i + 1, 4)}


@pytest.mark.parametrize("n,d,seed", [(6, 2, 3), (10, 3, 0), (30, 4, 5), (50, 5, 9)])
def test_regular_degrees_constant(n, d, seed):
    g = generate_regular(n, d, seed=seed)
    assert np.all(g.degrees() == d)
    assert g.num_edges == n * d // 2


@pytest.mark.parametrize("n,d", [(5, 3), (4, 4), (3, 5)])
def test_regular_infeasible(n, d):
    with pytest.raises(ValueError):
        generate_regular(n, d, seed=1)


def test_regular_gives_up_after_retries():
    with pytest.raises(ValueError, match="attempts"):
        generate_regular(20, 3, seed=1, max_retries=0)


def test_load_path():
    g = load_edge_list("0 1\n1 2\n")
    assert g.n == 3
    assert g.edge_set() == {(0, 1), (1, 2)}
    assert np.all(g.weight == 1.0)


def test_load_header_and_weight():
    g = load_edge_list("# comment\nn 4\n0 1 2.5\n")
    assert g.n == 4 and g.num_edges == 1
    assert g.weight[0] == 2.5


def test_load_dedupes_reversed_pair():
    g = load_edge_list("0 1 2\n1 0 2\n\n")
    assert g.num_edges == 1


@pytest.mark.parametrize("text", [
    "0 0\n",              # self-loop
    "0 x\n",              # non-integer id
    "0 1 -1\n",           # non-positive weight
    "0 1 0\n",
    "0 1 1\n1 0 2\n",     # conflicting duplicate
    "0 1\nn 3\n",         # header after data
    "n 2\n0 5\n",         # id beyond declared count
    "0 1 2 3\n",
])
def test_load_rejects(text):
    with pytest.raises(GraphFormatError):
        load_edge_list(text)


def test_edge_list_roundtrip():
    g = Network.from_edges(6, [(0, 3, 1.0), (2, 5, 0.25), (1, 4, 3.0)])
    buf = io.StringIO()
    write_edge_list(g, buf)
    h = load_edge_list(buf.getvalue())
    assert h.n == 6
    assert h.edge_set() == g.edge_set()
    np.testing.assert_array_equal(h.weight, g.weight)


def test_outcomes_roundtrip():
    assert load_outcomes("+1\n-1\n1\n").tolist() == [1, -1, 1]
    buf = io.StringIO()
    write_outcomes(np.array([1, -1, -1]), buf)
    assert buf.getvalue() == "+1\n-1\n-1\n"
    with pytest.raises(GraphFormatError):
        load_outcomes("+1\n0\n")


def test_scaled_adjacency_examples():
    k3 = Network.from_edges(3, [(0, 1), (0, 2), (1, 2)])
    J = coupling_scaled_adjacency(k3, 2.0).toarray()
    np.testing.assert_array_equal(J, 0.5 * (1 - np.eye(3)))
    assert not coupling_scaled_adjacency(Network.from_edges(4, []), 3.0).toarray().any()
    k2 = coupling_scaled_adjacency(Network.from_edges(2, [(0, 1)]), 1.0).toarray()
    assert k2[0, 1] == k2[1, 0] == 1.0
    with pytest.raises(ValueError):
        coupling_scaled_adjacency(k3, 0.0)


def test_normalized_laplacian_path(path3):
    J = coupling_normalized_laplacian(path3).toarray()
    assert J[0, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert J[1, 2] == pytest.approx(0.70711, abs=1e-5)
    assert J[0, 2] == 0
    assert row_sum_max(coupling_normalized_laplacian(path3)) == pytest.approx(math.sqrt(2))


def test_normalized_laplacian_k2_and_isolated():
    assert coupling_normalized_laplacian(Network.from_edges(2, [(0, 1)])).toarray()[0, 1] == 1
    with pytest.raises(ValueError, match="isolated"):
        coupling_normalized_laplacian(Network.from_edges(3, [(0, 1)]))


def test_row_sum_max_examples():
    assert row_sum_max(zero_coupling(4)) == 0.0
    k3 = coupling_scaled_adjacency(Network.from_edges(3, [(0, 1), (0, 2), (1, 2)]), 2.0)
    assert row_sum_max(k3) == 1.0
    assert lambda_n(k3) == 1.0


@pytest.mark.parametrize("bad", [
    [[0, 1], [2, 0]],          # asymmetric
    [[1, 0], [0, 0]],          # diagonal
    [[0, -1], [-1, 0]],        # negative
    [[0, np.inf], [np.inf, 0]],
])
def test_coupling_invariants_enforced(bad):
    with pytest.raises(ValueError):
        CouplingMatrix(np.array(bad, dtype=float))


def test_row_sums_cached_and_exact():
    rng = np.random.default_rng(0)
    J = random_coupling(rng, 20)
    assert J.row_sums is J.row_sums
    np.testing.assert_array_equal(J.row_sums, np.asarray(J.csr.sum(axis=1)).ravel())
    np.testing.assert_allclose(J.row_sums, J.toarray().sum(axis=1), rtol=1e-14)


def test_prune_drops_hubs_then_isolated():
    # star centre 0 with 4 leaves, plus a separate edge 5-6
    g = Network.from_edges(7, [(0, 1), (0, 2), (0, 3), (0, 4), (5, 6)])
    h, keep = prune(g, max_degree=3, drop_isolated=True)
    assert keep.tolist() == [5, 6]
    assert h.n == 2 and h.edge_set() == {(0, 1)}
    h2, keep2 = prune(g, max_degree=None, drop_isolated=True)
    assert h2.n == 7 and keep2.tolist() == list(range(7))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), p=st.floats(0, 1), seed=st.integers(0, 2**32))
def test_coupling_support_recovers_edges(n, p, seed):
    g = generate_erdos_renyi(n, p, seed=seed)
    assert coupling_scaled_adjacency(g, 1.7).support() == g.edge_set()
    if g.num_edges and np.all(g.degrees() > 0):
        assert coupling_normalized_laplacian(g).support() == g.edge_set()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 50))
def test_laplacian_spectral_radius_at_most_one(seed, n):
    rng = np.random.default_rng(seed)
    g = generate_erdos_renyi(n, rng.uniform(0.2, 1.0), seed=rng)
    h, _ = prune(g, None, drop_isolated=True)
    if h.num_edges == 0:
        return
    J = coupling_normalized_laplacian(h)
    # power iteration on J^2 (symmetric, PSD) gives the squared spectral radius
    x = rng.standard_normal(h.n)
    for _ in range(500):
        x = J.matvec(J.matvec(x))
        x /= np.linalg.norm(x)
    rho = math.sqrt(np.linalg.norm(J.matvec(J.matvec(x))))
    assert rho <= 1 + 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 30))
def test_row_sum_max_equals_column_max(seed, n):
    rng = np.random.default_rng(seed)
    A = random_coupling(rng, n).toarray()
    assert A.sum(axis=1).max() == pytest.approx(A.T.sum(axis=1).max(), abs=1e-14)
    np.testing.assert_array_equal(A, A.T)
