"""Executable checks of the bounds behind PrIsing's privacy guarantee.

Each audit walks adjacent configuration pairs ``(sigma, sigma')`` that
differ in coordinate ``j`` (all of them for small ``n``, a random sample
otherwise) over a grid of parameter values and compares the observed
quantity with its bound:

* sensitivity: ``|L_sigma(b) - L_sigma'(b)| <= 8 d_j / n^2``
* Jacobian ratio: ``grad_b(a; sigma) / grad_b(a; sigma') <= exp(eps / 2)``
  with ``grad_b(a; tau) = n L'_tau(a) + Delta``
* noise-density ratio: ``nu(b(a, sigma)) / nu(b(a, sigma')) <= exp(eps / 2)``
  with ``b(a, tau) = -(n L_tau(a) + Delta a)``; for Gaussian noise only on
  ``|b(a, sigma)| <= gamma sqrt(2 log(2 / delta))``.

:func:`mc_privacy_smoke` is a separate end-to-end histogram comparison of
the estimator's output distribution on adjacent inputs.  It is advisory:
finite-sample ratios are noisy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .estimator import PrivacyBudget, calibrate, prising_many, residuals, sech2
from .graph import CouplingMatrix
from .ising import as_spins, index_to_states
from .rng import stream

MAX_EXHAUSTIVE_N = 12
PASS_TOL = 1e-12
AUDIT_CSV_FIELDS = ("audit_name", "n", "worst_gap", "bound", "pass")


@dataclass(frozen=True)
class SensitivityReport:
    """Outcome of one audit.

    ``worst_gap``/``bound`` belong to the pair with the least slack, and
    ``argmax`` is ``(flip index j, parameter value, configuration id)`` for
    that pair.  In exhaustive mode the configuration id is the state index
    (bit k set means sigma_k = +1); in sampled mode it is the sample number.
    ``checked`` counts (pair, grid value) evaluations.
    """

    audit: str
    n: int
    worst_gap: float
    bound: float
    argmax: tuple[int, float, int]
    passed: bool
    worst_ratio: float
    checked: int
    excluded: int = 0
    excluded_violations: int = 0

    def summary_row(self) -> dict:
        return {"audit_name": self.audit, "n": self.n, "worst_gap": repr(self.worst_gap),
                "bound": repr(self.bound), "pass": "true" if self.passed else "false"}


def _pairs(J: CouplingMatrix, mode: str, samples: int, seed):
    """Adjacent pairs as (sigma rows, sigma' rows, flip index, config id)."""
    n = J.n
    if mode == "exhaustive":
        if n > MAX_EXHAUSTIVE_N:
            raise ValueError(f"exhaustive audit limited to n <= {MAX_EXHAUSTIVE_N}, got n={n}")
        idx = np.repeat(np.arange(1 << n), n)
        j = np.tile(np.arange(n), 1 << n)
        return (index_to_states(idx, n), index_to_states(idx ^ (1 << j), n), j, idx)
    if mode == "sampled":
        rng = stream(seed)
        S = rng.choice(np.array([-1.0, 1.0]), size=(samples, n))
        j = rng.integers(0, n, size=samples)
        Sp = S.copy()
        Sp[np.arange(samples), j] *= -1
        return S, Sp, j, np.arange(samples)
    raise ValueError(f"mode must be 'exhaustive' or 'sampled', got {mode!r}")


def _fields(J: CouplingMatrix, S: np.ndarray) -> np.ndarray:
    return np.asarray(J.csr @ S.T).T


def _score(M: np.ndarray, S: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """L_tau(x) for every row tau and grid value x: shape (pairs, grid)."""
    n = S.shape[1]
    r = residuals(M[:, None, :], S[:, None, :], grid[None, :, None])
    return -(M[:, None, :] * r).sum(axis=2) / n


def _slope_sum(M: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """n L'_tau(x) = sum_i m_i^2 sech^2(x m_i): shape (pairs, grid)."""
    return ((M * M)[:, None, :] * sech2(grid[None, :, None] * M[:, None, :])).sum(axis=2)


def _report(audit, n, gap, bound, j, ids, grid, select, excluded=0,
            excluded_violations=0) -> SensitivityReport:
    """Pick the pair with the largest ``select`` and package the result."""
    k = gap.size
    if k == 0:
        return SensitivityReport(audit, n, 0.0, float(np.max(bound, initial=0.0)),
                                 (-1, float("nan"), -1), True, 0.0, 0,
                                 excluded, excluded_violations)
    flat = int(np.argmax(select))
    p, g = np.unravel_index(flat, gap.shape)
    worst, b = float(gap[p, g]), float(np.broadcast_to(bound, gap.shape)[p, g])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bound > 0, gap / bound, np.where(gap > 0, np.inf, 0.0))
    violated = gap > bound + PASS_TOL
    return SensitivityReport(
        audit=audit, n=n, worst_gap=worst, bound=b,
        argmax=(int(j[p]), float(grid[g]), int(ids[p])),
        passed=not bool(violated.any()), worst_ratio=float(np.max(ratios)),
        checked=int(k), excluded=excluded, excluded_violations=excluded_violations)


def audit_sensitivity(J: CouplingMatrix, beta_grid, mode: str = "exhaustive",
                      seed=None, samples: int = 1000) -> SensitivityReport:
    """Check ``|L_sigma(beta) - L_sigma'(beta)| <= 8 d_j / n^2`` on adjacent pairs.

    In sampled mode, ``samples`` random (sigma, j) pairs are each checked
    at every grid value.
    """
    grid = np.asarray(beta_grid, dtype=np.float64)
    n = J.n
    S, Sp, j, ids = _pairs(J, mode, samples, seed)
    gap = np.abs(_score(_fields(J, S), S, grid) - _score(_fields(J, Sp), Sp, grid))
    d = n * J.row_sums
    bound = np.broadcast_to((8.0 * d[j] / n**2)[:, None], gap.shape)
    return _report("sensitivity", n, gap, bound, j, ids, grid, gap - bound)


def audit_jacobian_ratio(J: CouplingMatrix, budget: PrivacyBudget, alpha_grid,
                         mode: str = "exhaustive", seed=None, samples: int = 1000,
                         delta_cap: float | None = None) -> SensitivityReport:
    """Check ``grad_b(a; sigma) / grad_b(a; sigma') <= exp(eps / 2)``.

    Uses the calibrated regulariser unless ``delta_cap`` is given.  When
    both gradients vanish (no coupling and no regulariser) the ratio is
    taken as 1.
    """
    grid = np.asarray(alpha_grid, dtype=np.float64)
    cap = calibrate(J, budget, delta_cap).delta_cap
    S, Sp, j, ids = _pairs(J, mode, samples, seed)
    num = _slope_sum(_fields(J, S), grid) + cap
    den = _slope_sum(_fields(J, Sp), grid) + cap
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.where(num > 0, np.inf, 1.0))
    bound = np.full(ratio.shape, math.exp(budget.epsilon / 2))
    return _report("jacobian_ratio", J.n, ratio, bound, j, ids, grid, ratio)


def audit_density_ratio(J: CouplingMatrix, budget: PrivacyBudget, alpha_grid,
                        mode: str = "exhaustive", seed=None, samples: int = 1000,
                        delta_cap: float | None = None) -> SensitivityReport:
    """Check the noise-density ratio at the noise values that produce each estimate.

    For Gaussian noise the bound is only claimed on the high-probability
    set ``|b(a, sigma)| <= gamma sqrt(2 log(2 / delta))``; pairs outside it
    are counted in ``excluded`` (and ``excluded_violations`` when they
    exceed the bound) but never fail the audit.
    """
    grid = np.asarray(alpha_grid, dtype=np.float64)
    n = J.n
    cal = calibrate(J, budget, delta_cap)
    S, Sp, j, ids = _pairs(J, mode, samples, seed)
    b = -(n * _score(_fields(J, S), S, grid) + cal.delta_cap * grid[None, :])
    bp = -(n * _score(_fields(J, Sp), Sp, grid) + cal.delta_cap * grid[None, :])
    scale = cal.noise_scale(budget)
    if scale == 0:
        # degenerate noise: only identical b values are comparable
        log_ratio = np.where(b == bp, 0.0, np.inf)
    elif budget.gaussian:
        log_ratio = (bp**2 - b**2) / (2.0 * scale**2)
    else:
        log_ratio = (np.abs(bp) - np.abs(b)) / scale
    ratio = np.exp(log_ratio)
    bound = math.exp(budget.epsilon / 2)
    inside = np.ones(ratio.shape, dtype=bool)
    if budget.gaussian and scale > 0:
        inside = np.abs(b) <= scale * math.sqrt(2.0 * math.log(2.0 / budget.delta))
    excluded = int((~inside).sum())
    excluded_violations = int(((~inside) & (ratio > bound + PASS_TOL)).sum())
    masked = np.where(inside, ratio, 0.0)
    rep = _report("density_ratio", n, masked, np.full(ratio.shape, bound), j, ids, grid,
                  np.where(inside, ratio, -np.inf), excluded, excluded_violations)
    return rep


@dataclass(frozen=True)
class SmokeReport:
    worst_log_ratio: float
    threshold_log: float
    bins_used: int

    @property
    def passed(self) -> bool:
        return self.worst_log_ratio <= self.threshold_log


def mc_privacy_smoke(J: CouplingMatrix, sigma, flip: int | None, budget: PrivacyBudget,
                     draws: int = 100_000, bins: int = 20, seed=0,
                     beta_max: float = 10.0, tol: float = 1e-6, slack: float = 0.2,
                     min_count: int = 100) -> SmokeReport:
    """Histogram check of ``P(M(sigma) in B) <= e^eps (1 + slack) P(M(sigma') in B) + delta``.

    Runs the private estimator ``draws`` times on ``sigma`` and on sigma
    with coordinate ``flip`` negated (``flip=None`` compares sigma with
    itself), bins the estimates into ``bins`` equal bins on
    ``[0, beta_max]``, and returns the worst
    ``log((p_B(sigma) - delta) / p_B(sigma'))`` over both directions and
    every bin whose denominator count is at least ``min_count``.
    """
    if draws < 10_000:
        raise ValueError("the smoke test needs at least 10^4 draws")
    s = as_spins(sigma, J.n)
    sp = s.copy()
    if flip is not None:
        sp[flip] = -sp[flip]
    cal = calibrate(J, budget)
    edges = np.linspace(0.0, beta_max, bins + 1)
    counts = []
    for k, tau in enumerate((s, sp)):
        est = prising_many(J, tau, budget, draws, beta_max, tol, stream(seed, k),
                           calibration=cal)
        counts.append(np.histogram(est.beta_hat, bins=edges)[0])
    p = [c / draws for c in counts]
    worst = -np.inf
    used = 0
    for a, b in ((0, 1), (1, 0)):
        ok = counts[b] >= min_count
        used += int(ok.sum())
        num = p[a][ok] - budget.delta
        pos = num > 0
        if pos.any():
            worst = max(worst, float(np.max(np.log(num[pos] / p[b][ok][pos]))))
    return SmokeReport(worst_log_ratio=worst,
                       threshold_log=budget.epsilon + math.log1p(slack),
                       bins_used=used)


def write_audit_csv(reports: Iterable[SensitivityReport], out: TextIO) -> None:
    w = csv.DictWriter(out, fieldnames=AUDIT_CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.summary_row())


def format_report(r: SensitivityReport) -> str:
    j, x, cfg = r.argmax
    lines = [
        f"{r.audit}: {'PASS' if r.passed else 'FAIL'} (n={r.n}, {r.checked} checks)",
        f"  worst observed {r.worst_gap:.6g} vs bound {r.bound:.6g}"
        f"  at flip j={j}, x={x:g}, config={cfg}",
        f"  largest observed/bound ratio {r.worst_ratio:.4g}",
    ]
    if r.excluded:
        lines.append(f"  {r.excluded} checks outside the high-probability set, "
                     f"{r.excluded_violations} of them above the bound (not failing)")
    return "\n".join(lines)
