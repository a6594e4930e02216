"""Networks and the coupling matrices built from them.

A :class:`Network` is an undirected weighted simple graph on nodes
``0 .. n-1``.  A :class:`CouplingMatrix` is the non-negative symmetric
interaction matrix (zero diagonal) fed to the Ising model and estimators;
it is stored as CSR so row access and matrix-vector products stay cheap
for the sparse graphs used in experiments.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

REGULAR_MAX_RETRIES = 1000


class GraphFormatError(ValueError):
    """Raised for malformed edge-list or outcome files."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected weighted graph with canonical edge arrays.

    Edges are stored once per unordered pair with ``src < dst`` and sorted
    lexicographically, so two networks with the same edge set compare equal
    array-for-array.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be non-negative")
        src = np.asarray(self.src, dtype=np.int64).ravel()
        dst = np.asarray(self.dst, dtype=np.int64).ravel()
        weight = np.asarray(self.weight, dtype=np.float64).ravel()
        if not (src.shape == dst.shape == weight.shape):
            raise ValueError("edge arrays must have equal length")
        if np.any(src == dst):
            raise ValueError("self-loops are not allowed")
        if src.size and (min(src.min(), dst.min()) < 0
                         or max(src.max(), dst.max()) >= self.n):
            raise ValueError("node index out of range")
        if np.any(~np.isfinite(weight)) or np.any(weight <= 0):
            raise ValueError("edge weights must be positive and finite")
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        order = np.lexsort((hi, lo))
        lo, hi, weight = lo[order], hi[order], weight[order]
        if lo.size > 1:
            dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            if np.any(dup):
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate edge ({lo[k]}, {hi[k]})")
        object.__setattr__(self, "src", _readonly(lo))
        object.__setattr__(self, "dst", _readonly(hi))
        object.__setattr__(self, "weight", _readonly(weight))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple]) -> "Network":
        """Build from ``(u, v)`` or ``(u, v, w)`` tuples."""
        us, vs, ws = [], [], []
        for e in edges:
            us.append(e[0])
            vs.append(e[1])
            ws.append(e[2] if len(e) > 2 else 1.0)
        return cls(n, np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                   np.array(ws, dtype=np.float64))

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def degrees(self) -> np.ndarray:
        """Unweighted degree of every node."""
        return (np.bincount(self.src, minlength=self.n)
                + np.bincount(self.dst, minlength=self.n))

    def weighted_degrees(self) -> np.ndarray:
        return (np.bincount(self.src, weights=self.weight, minlength=self.n)
                + np.bincount(self.dst, weights=self.weight, minlength=self.n))

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency matrix as CSR."""
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        vals = np.concatenate([self.weight, self.weight])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def subgraph(self, keep: np.ndarray) -> "Network":
        """Induced subgraph on the sorted node ids ``keep``, relabelled 0..k-1."""
        keep = np.asarray(keep, dtype=np.int64)
        relabel = np.full(self.n, -1, dtype=np.int64)
        relabel[keep] = np.arange(keep.size)
        mask = (relabel[self.src] >= 0) & (relabel[self.dst] >= 0)
        return Network(int(keep.size), relabel[self.src[mask]],
                       relabel[self.dst[mask]], self.weight[mask])


class CouplingMatrix:
    """Symmetric non-negative interaction matrix with zero diagonal.

    Args:
        matrix: anything ``scipy.sparse.csr_matrix`` accepts, including a
            dense array.  Explicit zeros are dropped.

    Raises:
        ValueError: if the matrix is not square, not symmetric, has a
            non-zero diagonal, or has negative or non-finite entries.
    """

    def __init__(self, matrix):
        csr = sp.csr_matrix(matrix, dtype=np.float64)
        csr.eliminate_zeros()
        csr.sort_indices()
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"coupling must be square, got {csr.shape}")
        if csr.nnz:
            if not np.all(np.isfinite(csr.data)):
                raise ValueError("coupling entries must be finite")
            if np.any(csr.data < 0):
                raise ValueError("coupling entries must be non-negative")
        if np.any(csr.diagonal() != 0):
            raise ValueError("coupling diagonal must be zero")
        if (csr != csr.T).nnz:
            raise ValueError("coupling must be symmetric")
        csr.data.setflags(write=False)
        self._csr = csr

    @property
    def n(self) -> int:
        return self._csr.shape[0]

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @cached_property
    def row_sums(self) -> np.ndarray:
        return _readonly(np.asarray(self._csr.sum(axis=1)).ravel())

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ x

    def support(self) -> set[tuple[int, int]]:
        """Unordered pairs ``(i, j)``, ``i < j``, with a non-zero coupling."""
        coo = self._csr.tocoo()
        upper = coo.row < coo.col
        return set(zip(coo.row[upper].tolist(), coo.col[upper].tolist()))

    def scaled(self, c: float) -> "CouplingMatrix":
        return CouplingMatrix(self._csr * float(c))

    def __repr__(self):
        return f"CouplingMatrix(n={self.n}, nnz={self._csr.nnz})"


def zero_coupling(n: int) -> CouplingMatrix:
    return CouplingMatrix(sp.csr_matrix((n, n)))


def generate_erdos_renyi(n: int, p: float, seed=None) -> Network:
    """G(n, p): every unordered pair is an edge independently with probability p."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Network(n, iu[keep], ju[keep], np.ones(int(keep.sum())))


def generate_regular(n: int, d: int, seed=None,
                     max_retries: int = REGULAR_MAX_RETRIES) -> Network:
    """Random d-regular graph from the pairing model.

    Stubs are shuffled and paired; any pairing with a loop or a repeated
    pair is discarded and redrawn.

    Raises:
        ValueError: if ``n*d`` is odd, ``d >= n``, or no simple pairing was
            found within ``max_retries`` attempts.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if d >= n:
        raise ValueError(f"degree {d} must be smaller than n={n}")
    if (n * d) % 2:
        raise ValueError(f"n*d must be even, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(max_retries):
        rng.shuffle(stubs)
        a, b = stubs[0::2], stubs[1::2]
        if np.any(a == b):
            continue
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        if np.unique(lo * n + hi).size != lo.size:
            continue
        return Network(n, lo, hi, np.ones(lo.size))
    raise ValueError(f"no simple {d}-regular pairing on {n} nodes after "
                     f"{max_retries} attempts")


def load_edge_list(stream: TextIO | str) -> Network:
    """Parse the ``u v [w]`` edge-list format.

    Blank lines and lines starting with ``#`` are skipped.  An optional
    ``n <count>`` header, if present, must be the first data line;
    otherwise ``n`` is one more than the largest node id.  A pair listed
    twice is kept once when the weights agree and rejected otherwise.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    n_header = None
    seen_data = False
    edges: dict[tuple[int, int], float] = {}
    max_id = -1
    for lineno, raw in enumerate(stream, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "n":
            if seen_data or n_header is not None or len(parts) != 2:
                raise GraphFormatError(f"line {lineno}: misplaced node-count header")
            try:
                n_header = int(parts[1])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad node count {parts[1]!r}") from None
            if n_header < 0:
                raise GraphFormatError(f"line {lineno}: negative node count")
            continue
        seen_data = True
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'u v [w]', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: node ids must be integers") from None
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from None
            if not (math.isfinite(w) and w > 0):
                raise GraphFormatError(f"line {lineno}: weight must be positive, got {w}")
        if u < 0 or v < 0:
            raise GraphFormatError(f"line {lineno}: negative node id")
        if u == v:
            raise GraphFormatError(f"line {lineno}: self-loop on node {u}")
        key = (min(u, v), max(u, v))
        if key in edges and edges[key] != w:
            raise GraphFormatError(
                f"line {lineno}: edge {key} repeated with weight {w} != {edges[key]}")
        edges[key] = w
        max_id = max(max_id, u, v)
    n = max_id + 1 if n_header is None else n_header
    if max_id >= n:
        raise GraphFormatError(f"node id {max_id} exceeds declared count {n}")
    return Network.from_edges(n, [(u, v, w) for (u, v), w in edges.items()])


def write_edge_list(g: Network, stream: TextIO) -> None:
    stream.write(f"n {g.n}\n")
    for u, v, w in zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist()):
        stream.write(f"{u} {v} {w!r}\n" if w != 1.0 else f"{u} {v}\n")


def load_outcomes(stream: TextIO | str) -> np.ndarray:
    """Read one ``+1``/``1``/``-1`` value per line into an int8 spin vector."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    values = []
    for lineno, raw in enumerate(stream, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in ("+1", "1"):
            values.append(1)
        elif line == "-1":
            values.append(-1)
        else:
            raise GraphFormatError(f"line {lineno}: outcome must be +1 or -1, got {line!r}")
    return np.array(values, dtype=np.int8)


def write_outcomes(sigma: np.ndarray, stream: TextIO) -> None:
    for s in np.asarray(sigma).tolist():
        stream.write("+1\n" if s > 0 else "-1\n")


def prune(g: Network, max_degree: int | None = None,
          drop_isolated: bool = True) -> tuple[Network, np.ndarray]:
    """Drop nodes of degree ``>= max_degree``, then (optionally) isolated nodes.

    Degrees are unweighted counts on the undirected graph.  Returns the
    relabelled network and the original ids of the kept nodes, which is
    what callers need to realign an outcomes vector.
    """
    keep = np.arange(g.n)
    h = g
    if max_degree is not None:
        keep = np.flatnonzero(g.degrees() < max_degree)
        h = g.subgraph(keep)
    if drop_isolated:
        nz = np.flatnonzero(h.degrees() > 0)
        keep = keep[nz]
        h = h.subgraph(nz)
    return h, keep


def coupling_scaled_adjacency(g: Network, scale: float) -> CouplingMatrix:
    """J = A / scale, e.g. ``scale = n*p`` for G(n, p) or ``scale = d`` for d-regular."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return CouplingMatrix(g.adjacency() / float(scale))


def coupling_normalized_laplacian(g: Network) -> CouplingMatrix:
    """J = D^{-1/2} A D^{-1/2} with D the weighted degrees; I - J is the normalized Laplacian."""
    deg = g.weighted_degrees()
    isolated = np.flatnonzero(deg <= 0)
    if isolated.size:
        raise ValueError(f"isolated node(s) present, e.g. {int(isolated[0])}; "
                         "use prune(..., drop_isolated=True) first")
    inv_sqrt = 1.0 / np.sqrt(deg)
    w = g.weight * inv_sqrt[g.src] * inv_sqrt[g.dst]
    return CouplingMatrix(Network(g.n, g.src, g.dst, w).adjacency())


def row_sum_max(J: CouplingMatrix) -> float:
    """Largest row sum, i.e. the 1->inf operator norm of a symmetric J."""
    if J.n == 0:
        return 0.0
    return float(J.row_sums.max())


def lambda_n(J: CouplingMatrix) -> float:
    """``max(1, row_sum_max(J)**2)``, the dependence factor in the privacy cost."""
    return max(1.0, row_sum_max(J) ** 2)
