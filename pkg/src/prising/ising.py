"""The one-parameter Ising model on a fixed coupling matrix.

``P_beta(sigma) = 2^-n exp(beta * H(sigma) / 2 - F(beta))`` with
``H(sigma) = sigma^T J sigma``.  Small instances are handled exactly by
enumerating all ``2^n`` configurations; larger ones are sampled with
single-site heat-bath (Glauber) sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import logsumexp

from .graph import CouplingMatrix
from .rng import stream

MAX_ENUM_N = 24
MAX_EXACT_SAMPLE_N = 20
DEFAULT_BURN_IN = 1000

_CHUNK_BITS = 16


@dataclass(frozen=True)
class IsingModel:
    coupling: CouplingMatrix
    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if not (np.isfinite(b) and b >= 0):
            raise ValueError(f"beta must be finite and non-negative, got {self.beta}")
        object.__setattr__(self, "beta", b)

    @property
    def n(self) -> int:
        return self.coupling.n


def as_spins(sigma, n: int | None = None) -> np.ndarray:
    """Validate a +/-1 vector and return it as float64."""
    s = np.asarray(sigma)
    if s.ndim != 1:
        raise ValueError("spin configuration must be one-dimensional")
    if n is not None and s.size != n:
        raise ValueError(f"configuration has length {s.size}, coupling has n={n}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spin entries must be exactly -1 or +1")
    return s.astype(np.float64)


def hamiltonian(J: CouplingMatrix, sigma) -> float:
    """``sigma^T J sigma``; each unordered edge contributes twice."""
    s = as_spins(sigma, J.n)
    return float(s @ J.matvec(s))


def local_fields(J: CouplingMatrix, sigma) -> np.ndarray:
    """``m_i = sum_j J(i, j) sigma_j``; m_i never depends on sigma_i."""
    return J.matvec(as_spins(sigma, J.n))


def index_to_states(idx: np.ndarray, n: int) -> np.ndarray:
    """Spin rows for state indices: bit k of the index set means sigma_k = +1."""
    bits = (np.asarray(idx, dtype=np.int64)[:, None] >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.float64)


def states_to_index(states: np.ndarray) -> np.ndarray:
    states = np.atleast_2d(states)
    n = states.shape[1]
    return ((states > 0).astype(np.int64) << np.arange(n)).sum(axis=1)


def _energies(Jd: np.ndarray, start: int, count: int) -> np.ndarray:
    S = index_to_states(np.arange(start, start + count), Jd.shape[0])
    return np.einsum("ij,ij->i", S @ Jd, S)


def hamiltonian_table(J: CouplingMatrix, max_n: int = MAX_EXACT_SAMPLE_N) -> np.ndarray:
    """H for every state index ``0 .. 2^n - 1``."""
    n = J.n
    if n > max_n:
        raise ValueError(f"enumeration limited to n <= {max_n}, got n={n}")
    return _energies(J.toarray(), 0, 1 << n)


def log_partition_exact(J: CouplingMatrix, beta: float) -> float:
    """``F(beta) = log(2^-n sum_tau exp(beta H(tau) / 2))`` by full enumeration.

    Streams over blocks of states with a running log-sum-exp, so memory
    stays bounded up to ``n = 24``.  Uses ``H(tau) = H(-tau)`` to visit
    half the states.
    """
    n = J.n
    if n > MAX_ENUM_N:
        raise ValueError(f"enumeration limited to n <= {MAX_ENUM_N}, got n={n}")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if n == 0:
        return 0.0
    Jd = J.toarray()
    half = 1 << (n - 1)
    chunk = 1 << _CHUNK_BITS
    acc = -np.inf
    for start in range(0, half, chunk):
        # top spin fixed to -1 (index bit n-1 clear); the mirror state has equal H
        e = _energies(Jd, start, min(chunk, half - start))
        acc = np.logaddexp(acc, logsumexp(0.5 * beta * e))
    return float(acc - (n - 1) * np.log(2.0))


def exact_distribution(model: IsingModel) -> np.ndarray:
    """Probability of every state index under the model (n <= 20)."""
    e = hamiltonian_table(model.coupling)
    logw = 0.5 * model.beta * e
    return np.exp(logw - logsumexp(logw))


def expected_hamiltonian_exact(J: CouplingMatrix, beta: float) -> tuple[float, float]:
    """Mean and variance of H under P_beta, by enumeration."""
    e = hamiltonian_table(J)
    logw = 0.5 * beta * e
    p = np.exp(logw - logsumexp(logw))
    mean = float(p @ e)
    return mean, float(p @ (e - mean) ** 2)


def magnetization_exact(model: IsingModel) -> np.ndarray:
    """Per-site mean spin under the model (zero by flip symmetry, kept as a check)."""
    p = exact_distribution(model)
    return p @ index_to_states(np.arange(p.size), model.n)


def sample_exact_many(model: IsingModel, size: int, seed=None) -> np.ndarray:
    """``size`` independent draws by inverse CDF over the enumerated states."""
    n = model.n
    if n > MAX_EXACT_SAMPLE_N:
        raise ValueError(f"exact sampling limited to n <= {MAX_EXACT_SAMPLE_N}, got n={n}")
    cdf = np.cumsum(exact_distribution(model))
    rng = stream(seed)
    u = rng.random(size) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    return index_to_states(idx, n).astype(np.int8)


def sample_exact(model: IsingModel, seed=None) -> np.ndarray:
    return sample_exact_many(model, 1, seed)[0]


@numba.njit(cache=True, nogil=True)
def _heat_bath(indptr, indices, data, beta, spins, uniforms):
    n = spins.shape[0]
    for t in range(uniforms.shape[0]):
        for i in range(n):
            m = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                m += data[k] * spins[indices[k]]
            p_up = 1.0 / (1.0 + np.exp(-2.0 * beta * m))
            spins[i] = 1.0 if uniforms[t, i] < p_up else -1.0


def _run_chain(J: CouplingMatrix, beta: float, sweeps: int, rng: np.random.Generator,
               init) -> np.ndarray:
    n = J.n
    if init is None:
        spins = rng.choice(np.array([-1.0, 1.0]), size=n)
    else:
        spins = as_spins(init, n).copy()
    csr = J.csr
    indptr = csr.indptr.astype(np.int64)
    indices = csr.indices.astype(np.int64)
    block = max(1, (1 << 20) // max(n, 1))
    done = 0
    while done < sweeps:
        k = min(block, sweeps - done)
        _heat_bath(indptr, indices, csr.data, beta, spins, rng.random((k, n)))
        done += k
    return spins.astype(np.int8)


def sample_glauber(model: IsingModel, sweeps: int = DEFAULT_BURN_IN, seed=None,
                   init=None) -> np.ndarray:
    """Run ``sweeps`` sequential heat-bath passes and return the final state.

    Each update redraws sigma_i from its exact conditional
    ``P(sigma_i = +1 | rest) = 1 / (1 + exp(-2 beta m_i))``, visiting
    sites in index order.  Starts from ``init`` or a uniform random state.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    return _run_chain(model.coupling, model.beta, int(sweeps), stream(seed), init)


def sample_glauber_chains(model: IsingModel, sweeps: int, chains: int,
                          seed=0) -> np.ndarray:
    """Final states of ``chains`` independent chains, one keyed stream per chain."""
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    out = np.empty((chains, model.n), dtype=np.int8)
    for c in range(chains):
        out[c] = _run_chain(model.coupling, model.beta, int(sweeps), stream(seed, c), None)
    return out
