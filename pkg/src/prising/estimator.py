"""Pseudo-likelihood estimation of beta, with and without privacy.

The non-private estimate is the smallest non-negative root of the
pseudo-likelihood score

    L(x) = -(1/n) sum_i m_i (sigma_i - tanh(x m_i)),

which is non-decreasing in x.  The private estimate (PrIsing) solves the
perturbed equation ``L(x) + Delta x / n + b / n = 0`` where ``b`` is
Gaussian (delta > 0) or Laplace (delta = 0) noise calibrated to how much
one node's outcome can move ``L``, and the ``Delta x / n`` term keeps the
map from noise to estimate smooth and strictly monotone.

Both are solved by bisection on ``[0, beta_max]``.  An equation with no
root there is reported through saturation flags rather than infinities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .graph import CouplingMatrix
from .ising import as_spins
from .rng import stream

DEFAULT_BETA_MAX = 50.0
DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def gaussian(self) -> bool:
        return self.delta > 0


@dataclass(frozen=True)
class Calibration:
    """Noise and regularisation constants for one (J, budget) pair.

    ``delta_min`` is the smallest regulariser the privacy argument allows;
    ``delta_cap`` is the one actually used (equal unless overridden).
    """

    d: np.ndarray
    zeta: float
    delta_min: float
    delta_cap: float
    laplace_scale: float
    gaussian_sigma: float | None

    def noise_scale(self, budget: PrivacyBudget) -> float:
        return self.gaussian_sigma if budget.gaussian else self.laplace_scale


@dataclass(frozen=True)
class EstimateReport:
    beta_hat: float
    saturated_low: bool
    saturated_high: bool
    iterations: int
    bracket: tuple[float, float]
    noise_draw: float | None = None
    delta_cap: float = 0.0

    @property
    def interior(self) -> bool:
        return not (self.saturated_low or self.saturated_high)


@dataclass(frozen=True)
class EstimateBatch:
    """Estimates for one configuration under many noise draws."""

    beta_hat: np.ndarray
    saturated_low: np.ndarray
    saturated_high: np.ndarray
    noise: np.ndarray
    delta_cap: float


def residuals(m: np.ndarray, s: np.ndarray, x) -> np.ndarray:
    """``sigma_i - tanh(x m_i)`` without cancellation.

    Uses ``sigma - tanh(y) = 2 sigma expit(-2 sigma y)`` for sigma = +/-1,
    which keeps full relative precision when ``tanh(y)`` rounds to sigma.
    Broadcasts ``x`` against ``m``.
    """
    return 2.0 * s * expit(-2.0 * s * np.multiply(x, m))


def sech2(y) -> np.ndarray:
    return 4.0 * expit(2.0 * y) * expit(-2.0 * y)


def pseudo_likelihood_value(J: CouplingMatrix, sigma, x: float) -> float:
    s = as_spins(sigma, J.n)
    m = J.matvec(s)
    return float(-(m @ residuals(m, s, x)) / J.n)


def pseudo_likelihood_slope(J: CouplingMatrix, sigma, x: float) -> float:
    """``L'(x) = (1/n) sum_i m_i^2 sech^2(x m_i)``."""
    s = as_spins(sigma, J.n)
    m = J.matvec(s)
    return float((m * m) @ sech2(x * m) / J.n)


class _Score:
    """``G(x) = L(x) + (delta_cap x + b) / n`` for one configuration, vectorised over b."""

    def __init__(self, J: CouplingMatrix, sigma):
        s = as_spins(sigma, J.n)
        m = J.matvec(s)
        keep = m != 0
        self.n = J.n
        self.m = m[keep]
        self.s = s[keep]

    def __call__(self, x: np.ndarray, delta_cap: float, noise: np.ndarray) -> np.ndarray:
        r = residuals(self.m, self.s, np.asarray(x)[:, None])
        return -(r @ self.m) / self.n + (delta_cap * x + noise) / self.n


def _bisect(score: _Score, delta_cap: float, noise: np.ndarray, beta_max: float,
            tol: float):
    """Smallest root of the non-decreasing ``score`` on ``[0, beta_max]``, per noise value."""
    if not beta_max > 0:
        raise ValueError("beta_max must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    k = noise.size
    g0 = score(np.zeros(k), delta_cap, noise)
    gmax = score(np.full(k, beta_max), delta_cap, noise)
    low = g0 > 0
    high = ~low & (gmax < 0)
    at_zero = g0 == 0
    lo = np.zeros(k)
    hi = np.full(k, float(beta_max))
    active = ~(low | high | at_zero)
    iterations = 0
    if active.any():
        a_lo, a_hi, a_b = lo[active], hi[active], noise[active]
        while a_hi[0] - a_lo[0] > tol:
            mid = 0.5 * (a_lo + a_hi)
            up = score(mid, delta_cap, a_b) >= 0
            a_hi = np.where(up, mid, a_hi)
            a_lo = np.where(up, a_lo, mid)
            iterations += 1
        lo[active], hi[active] = a_lo, a_hi
    beta_hat = 0.5 * (lo + hi)
    beta_hat[low | at_zero] = 0.0
    hi[low | at_zero] = 0.0
    beta_hat[high] = beta_max
    lo[high] = beta_max
    iters = np.where(active, iterations, 0)
    return beta_hat, low, high, lo, hi, iters


def mple(J: CouplingMatrix, sigma, beta_max: float = DEFAULT_BETA_MAX,
         tol: float = DEFAULT_TOL) -> EstimateReport:
    """Maximum pseudo-likelihood estimate ``inf{x >= 0 : L(x) = 0}``.

    ``L(0) > 0`` means the pseudo-likelihood decreases on all of
    ``[0, inf)``; this is reported as ``saturated_low`` with estimate 0.
    ``L(beta_max) < 0`` (no finite root, or one beyond the search range)
    is reported as ``saturated_high`` with estimate ``beta_max``.
    """
    return _solve_one(_Score(J, sigma), 0.0, 0.0, beta_max, tol, None)


def _solve_one(score, delta_cap, b, beta_max, tol, noise_draw) -> EstimateReport:
    beta_hat, low, high, lo, hi, iters = _bisect(
        score, delta_cap, np.array([b], dtype=np.float64), beta_max, tol)
    return EstimateReport(
        beta_hat=float(beta_hat[0]), saturated_low=bool(low[0]),
        saturated_high=bool(high[0]), iterations=int(iters[0]),
        bracket=(float(lo[0]), float(hi[0])), noise_draw=noise_draw,
        delta_cap=float(delta_cap))


def calibrate(J: CouplingMatrix, budget: PrivacyBudget,
              delta_cap: float | None = None) -> Calibration:
    """Noise scale and regulariser for PrIsing.

    ``d_i = n * sum_j J(i, j)``, ``zeta = 8 max_j d_j / n``, and the
    smallest allowed regulariser is ``max_j (24 / (eps n)) sum_i d_i J(i, j)``.
    Pass ``delta_cap`` to override the regulariser (ablations only: values
    below the minimum void the privacy guarantee).
    """
    n = J.n
    eps = budget.epsilon
    r = J.row_sums
    d = n * r
    zeta = 8.0 * float(r.max()) if n else 0.0
    delta_min = 24.0 / eps * float((J.matvec(r)).max()) if n else 0.0
    gamma = None
    if budget.gaussian:
        gamma = zeta * math.sqrt(8.0 * math.log(2.0 / budget.delta) + 4.0 * eps) / eps
    if delta_cap is None:
        delta_cap = delta_min
    elif delta_cap < 0:
        raise ValueError("delta_cap must be non-negative")
    d = np.array(d, dtype=np.float64)
    d.setflags(write=False)
    return Calibration(d=d, zeta=zeta, delta_min=delta_min, delta_cap=float(delta_cap),
                       laplace_scale=2.0 * zeta / eps, gaussian_sigma=gamma)


def sample_noise(cal: Calibration, budget: PrivacyBudget, seed=None,
                 size: int | None = None):
    """Draw ``b``: N(0, gamma^2) when delta > 0, Laplace(0, 2 zeta / eps) when delta = 0."""
    rng = stream(seed)
    scale = cal.noise_scale(budget)
    if scale == 0:
        return 0.0 if size is None else np.zeros(size)
    if budget.gaussian:
        return rng.normal(0.0, scale, size)
    return rng.laplace(0.0, scale, size)


def prising(J: CouplingMatrix, sigma, budget: PrivacyBudget,
            beta_max: float = DEFAULT_BETA_MAX, tol: float = DEFAULT_TOL, seed=None,
            *, noise: float | None = None, delta_cap: float | None = None,
            calibration: Calibration | None = None) -> EstimateReport:
    """Private estimate of beta from one configuration.

    Args:
        J: coupling matrix, treated as public.
        sigma: observed +/-1 outcomes, the private data.
        budget: (epsilon, delta) target.
        beta_max, tol: search interval and bisection width.
        seed: seed or Generator for the noise draw.
        noise: use this value of ``b`` instead of sampling one.
        delta_cap: override the regulariser (see :func:`calibrate`).
        calibration: precomputed calibration for ``(J, budget)``.
    """
    if calibration is not None and delta_cap is not None:
        raise ValueError("pass either calibration or delta_cap, not both")
    cal = calibration if calibration is not None else calibrate(J, budget, delta_cap)
    b = float(noise) if noise is not None else float(sample_noise(cal, budget, seed))
    return _solve_one(_Score(J, sigma), cal.delta_cap, b, beta_max, tol, b)


def prising_many(J: CouplingMatrix, sigma, budget: PrivacyBudget, draws: int,
                 beta_max: float = DEFAULT_BETA_MAX, tol: float = DEFAULT_TOL,
                 seed=None, *, delta_cap: float | None = None,
                 calibration: Calibration | None = None) -> EstimateBatch:
    """``draws`` independent private estimates for the same configuration.

    Equivalent to repeated :func:`prising` calls, but the noise is drawn
    in one block and the bisection runs vectorised over draws.
    """
    cal = calibration if calibration is not None else calibrate(J, budget, delta_cap)
    noise = np.asarray(sample_noise(cal, budget, seed, size=draws), dtype=np.float64)
    return solve_perturbed(J, sigma, cal.delta_cap, noise, beta_max, tol)


def solve_perturbed(J: CouplingMatrix, sigma, delta_cap: float, noise,
                    beta_max: float = DEFAULT_BETA_MAX,
                    tol: float = DEFAULT_TOL) -> EstimateBatch:
    """Solve ``L(x) + (delta_cap x + b) / n = 0`` for each given ``b``."""
    noise = np.atleast_1d(np.asarray(noise, dtype=np.float64))
    beta_hat, low, high, _, _, _ = _bisect(_Score(J, sigma), float(delta_cap), noise,
                                           beta_max, tol)
    return EstimateBatch(beta_hat=beta_hat, saturated_low=low, saturated_high=high,
                         noise=noise, delta_cap=float(delta_cap))
