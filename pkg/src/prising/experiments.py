"""Simulation studies and real-network analyses, driven by flat config files.

Every replicate is an independent task keyed by its grid indices; each of
its random streams is derived from the master seed and that key alone.
Results are sorted by key before they are written, so the CSV bytes depend
only on (config, seed), never on scheduling or thread count.
"""

from __future__ import annotations

import configparser
import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .estimator import PrivacyBudget, calibrate, mple, prising, prising_many
from .graph import (CouplingMatrix, GraphFormatError, Network, coupling_normalized_laplacian,
                    coupling_scaled_adjacency, generate_erdos_renyi, generate_regular,
                    load_edge_list, load_outcomes, prune, zero_coupling)
from .ising import IsingModel, sample_glauber
from .privacy_audit import (SensitivityReport, audit_density_ratio, audit_jacobian_ratio,
                            audit_sensitivity)
from .rng import stream

GRAPH_FAMILIES = ("erdos_renyi", "regular", "edge_list")
COUPLINGS = ("scaled_adjacency", "normalized_laplacian")

# task-key prefixes keep the random streams of different purposes apart
_GRAPH, _SPINS, _NOISE, _REAL, _AUDIT = range(5)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class DataError(ValueError):
    """Input network or outcome files are missing or malformed."""


@dataclass(frozen=True)
class ExperimentConfig:
    graph_family: str = "erdos_renyi"
    coupling: str | None = None
    n_grid: tuple[int, ...] = (2000,)
    p_exponent: tuple[float, ...] = (1.0 / 3.0,)
    p: float | None = None
    degree: int | None = None
    beta_grid: tuple[float, ...] = (0.5, 1.5)
    epsilon_grid: tuple[float, ...] = (5.0,)
    delta_rule: str | float = "one_over_n"
    replicates: int = 500
    sweeps: int = 1000
    seed: int = 0
    beta_max: float = 50.0
    tol: float = 1e-8
    fix_graph: bool = False
    edge_list_path: str | None = None
    outcomes_path: str | None = None
    prune_max_degree: int | None = None
    drop_isolated: bool = False
    audit_instances: int = 10
    audit_mode: str = "exhaustive"
    audit_samples: int = 1000
    audit_p: float = 0.5
    audit_delta_cap: float | None = None
    audit_zero_coupling: bool = False
    record_time: bool = False

    def __post_init__(self):
        if self.graph_family not in GRAPH_FAMILIES:
            raise ConfigError(f"graph_family must be one of {GRAPH_FAMILIES}")
        if self.coupling is not None and self.coupling not in COUPLINGS:
            raise ConfigError(f"coupling must be one of {COUPLINGS}")
        for name in ("n_grid", "beta_grid", "epsilon_grid", "p_exponent"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.sweeps < 1:
            raise ConfigError("sweeps must be at least 1")
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("n_grid entries must be positive")
        if any(b < 0 for b in self.beta_grid):
            raise ConfigError("beta_grid entries must be non-negative")
        if any(not e > 0 for e in self.epsilon_grid):
            raise ConfigError("epsilon_grid entries must be positive")
        if self.p is not None and not 0 <= self.p <= 1:
            raise ConfigError("p must lie in [0, 1]")
        if isinstance(self.delta_rule, str) and self.delta_rule != "one_over_n":
            raise ConfigError("delta_rule must be 'one_over_n' or a number")
        if not isinstance(self.delta_rule, str) and not 0 <= self.delta_rule < 1:
            raise ConfigError("a fixed delta must lie in [0, 1)")
        if self.graph_family == "regular" and self.degree is None:
            raise ConfigError("graph_family = regular needs degree")
        if self.audit_mode not in ("exhaustive", "sampled"):
            raise ConfigError("audit_mode must be exhaustive or sampled")
        if not (self.beta_max > 0 and self.tol > 0):
            raise ConfigError("beta_max and tol must be positive")

    @property
    def coupling_kind(self) -> str:
        if self.coupling is not None:
            return self.coupling
        return "normalized_laplacian" if self.graph_family == "edge_list" else "scaled_adjacency"

    def delta_for(self, n: int) -> float:
        return 1.0 / n if self.delta_rule == "one_over_n" else float(self.delta_rule)

    def edge_probs(self, n: int) -> list[float]:
        if self.p is not None:
            return [float(self.p)]
        return [min(1.0, n ** (-a)) for a in self.p_exponent]


def parse_grid(text: str, kind=float) -> tuple:
    """``"0, 0.5, 1"`` or inclusive ``"start:stop:step"``."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad range {text!r}; expected start:stop:step") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"bad range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(kind(round(start + k * step, 12)) for k in range(count))
    try:
        return tuple(kind(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad list {text!r}") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _optional(kind):
    def conv(text):
        return None if text.strip().lower() in ("", "none") else kind(text)
    return conv


def _delta_rule(text: str):
    t = text.strip()
    return t if t == "one_over_n" else float(t)


_CONVERTERS = {
    "graph_family": str.strip, "coupling": _optional(str.strip),
    "n_grid": lambda t: parse_grid(t, int), "p_exponent": parse_grid,
    "p": _optional(float), "degree": _optional(int),
    "beta_grid": parse_grid, "epsilon_grid": parse_grid, "delta_rule": _delta_rule,
    "replicates": int, "sweeps": int, "seed": int, "beta_max": float, "tol": float,
    "fix_graph": _bool, "edge_list_path": _optional(str.strip),
    "outcomes_path": _optional(str.strip), "prune_max_degree": _optional(int),
    "drop_isolated": _bool, "audit_instances": int, "audit_mode": str.strip,
    "audit_samples": int, "audit_p": float, "audit_delta_cap": _optional(float),
    "audit_zero_coupling": _bool, "record_time": _bool,
}


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse flat ``key = value`` lines (``#`` comments) into a config.

    Relative file paths are resolved against ``base_dir``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",),
                                       interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {}
    for key, raw in parser["experiment"].items():
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _CONVERTERS[key](raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    if base_dir is not None:
        for key in ("edge_list_path", "outcomes_path"):
            if values.get(key) and not Path(values[key]).is_absolute():
                values[key] = str(base_dir / values[key])
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


RESULT_FIELDS = (
    "study", "n", "p", "beta_true", "epsilon", "delta", "replicate",
    "beta_hat_nonprivate", "beta_hat_private",
    "nonprivate_saturated_low", "nonprivate_saturated_high",
    "private_saturated_low", "private_saturated_high",
    "noise_draw", "wall_time",
)


@dataclass(frozen=True)
class ResultRow:
    study: str
    n: int
    p: float
    beta_true: float
    epsilon: float
    delta: float
    replicate: int
    beta_hat_nonprivate: float
    beta_hat_private: float
    nonprivate_saturated_low: bool
    nonprivate_saturated_high: bool
    private_saturated_low: bool
    private_saturated_high: bool
    noise_draw: float
    wall_time: float | None = None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows: Iterable, fieldnames: Sequence[str], out: TextIO) -> None:
    """RFC-4180 style CSV with a header row; floats written with ``repr``."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(fieldnames)
    for r in rows:
        d = r if isinstance(r, dict) else {f.name: getattr(r, f.name) for f in fields(r)}
        w.writerow([_fmt(d.get(k)) for k in fieldnames])


def _network(cfg: ExperimentConfig, n: int, p: float, rng) -> Network:
    if cfg.graph_family == "erdos_renyi":
        return generate_erdos_renyi(n, p, rng)
    if cfg.graph_family == "regular":
        return generate_regular(n, cfg.degree, rng)
    raise ConfigError("simulation studies need a generated graph family")


def _coupling(cfg: ExperimentConfig, g: Network, p: float | None) -> CouplingMatrix:
    if cfg.coupling_kind == "normalized_laplacian":
        return coupling_normalized_laplacian(g)
    if cfg.graph_family == "erdos_renyi":
        scale = g.n * p
    elif cfg.graph_family == "regular":
        scale = cfg.degree
    else:
        raise ConfigError("scaled_adjacency on an edge list needs a scale; "
                          "use coupling = normalized_laplacian")
    if scale <= 0:
        return zero_coupling(g.n)
    return coupling_scaled_adjacency(g, scale)


def load_network(cfg: ExperimentConfig) -> tuple[Network, np.ndarray | None]:
    """Read (and optionally prune) the configured edge list and outcomes."""
    if not cfg.edge_list_path:
        raise ConfigError("edge_list_path is required")
    try:
        with open(cfg.edge_list_path) as fh:
            g = load_edge_list(fh)
        sigma = None
        if cfg.outcomes_path:
            with open(cfg.outcomes_path) as fh:
                sigma = load_outcomes(fh)
    except (OSError, GraphFormatError) as exc:
        raise DataError(str(exc)) from None
    if sigma is not None and sigma.size != g.n:
        raise DataError(f"outcomes have {sigma.size} entries, network has {g.n} nodes")
    if cfg.prune_max_degree is not None or cfg.drop_isolated:
        g, keep = prune(g, cfg.prune_max_degree, cfg.drop_isolated)
        if sigma is not None:
            sigma = sigma[keep]
    return g, sigma


@dataclass(frozen=True)
class _Task:
    n_idx: int
    p_idx: int
    beta_idx: int
    rep: int


def _run_task(cfg: ExperimentConfig, study: str, task: _Task, fixed=None) -> list[ResultRow]:
    start = time.perf_counter()
    n0 = cfg.n_grid[task.n_idx]
    beta = cfg.beta_grid[task.beta_idx]
    if fixed is not None:
        J, p = fixed, float("nan")
    else:
        p = cfg.edge_probs(n0)[task.p_idx]
        gkey = (_GRAPH, task.n_idx, task.p_idx) + (() if cfg.fix_graph else (task.rep,))
        J = _coupling(cfg, _network(cfg, n0, p, stream(cfg.seed, *gkey)), p)
    n = J.n
    key = (task.n_idx, task.p_idx, task.beta_idx, task.rep)
    sigma = sample_glauber(IsingModel(J, beta), cfg.sweeps, stream(cfg.seed, _SPINS, *key))
    base = mple(J, sigma, cfg.beta_max, cfg.tol)
    delta = cfg.delta_for(n)
    rows = []
    for e_idx, eps in enumerate(cfg.epsilon_grid):
        budget = PrivacyBudget(eps, delta)
        est = prising(J, sigma, budget, cfg.beta_max, cfg.tol,
                      stream(cfg.seed, _NOISE, *key, e_idx))
        rows.append(ResultRow(
            study=study, n=n, p=p, beta_true=beta, epsilon=eps, delta=delta,
            replicate=task.rep, beta_hat_nonprivate=base.beta_hat,
            beta_hat_private=est.beta_hat,
            nonprivate_saturated_low=base.saturated_low,
            nonprivate_saturated_high=base.saturated_high,
            private_saturated_low=est.saturated_low,
            private_saturated_high=est.saturated_high,
            noise_draw=est.noise_draw, wall_time=None))
    if cfg.record_time:
        elapsed = time.perf_counter() - start
        rows = [replace(r, wall_time=elapsed) for r in rows]
    return rows


def simulate(cfg: ExperimentConfig, study: str, threads: int = 1) -> list[ResultRow]:
    """Per-replicate rows for every (n, p, beta, replicate, epsilon) grid point.

    With ``graph_family = edge_list`` the configured network is used as the
    fixed coupling for every replicate.
    """
    fixed = None
    n_count = len(cfg.n_grid)
    p_count = max(len(cfg.edge_probs(n)) for n in cfg.n_grid)
    if cfg.graph_family == "edge_list":
        g, _ = load_network(cfg)
        fixed = _coupling(cfg, g, None)
        n_count, p_count = 1, 1
    tasks = [_Task(i, k, b, r) for i in range(n_count) for k in range(p_count)
             for b in range(len(cfg.beta_grid)) for r in range(cfg.replicates)]

    def work(t):
        return t, _run_task(cfg, study, t, fixed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    results.sort(key=lambda tr: (tr[0].n_idx, tr[0].p_idx, tr[0].beta_idx, tr[0].rep))
    return [row for _, rows in results for row in rows]


def _group(rows: Sequence[ResultRow], keyf):
    groups: dict = {}
    for r in rows:
        groups.setdefault(keyf(r), []).append(r)
    return groups


def summarize_sweep(rows: Sequence[ResultRow]) -> list[dict]:
    """Mean, replicate sd, sd of the mean and MSE of both estimators per grid point."""
    out = []
    for (n, p, beta, eps, delta), grp in _group(
            rows, lambda r: (r.n, r.p, r.beta_true, r.epsilon, r.delta)).items():
        k = len(grp)
        rec = {"n": n, "p": p, "beta_true": beta, "epsilon": eps, "delta": delta,
               "replicates": k}
        for tag, attr in (("nonprivate", "beta_hat_nonprivate"),
                          ("private", "beta_hat_private")):
            x = np.array([getattr(r, attr) for r in grp])
            sd = float(x.std(ddof=1)) if k > 1 else 0.0
            rec[f"mean_{tag}"] = float(x.mean())
            rec[f"sd_{tag}"] = sd
            rec[f"sem_{tag}"] = sd / math.sqrt(k)
            rec[f"mse_{tag}"] = float(np.mean((x - beta) ** 2))
        out.append(rec)
    return out


SWEEP_SUMMARY_FIELDS = ("n", "p", "beta_true", "epsilon", "delta", "replicates",
                        "mean_nonprivate", "sd_nonprivate", "sem_nonprivate", "mse_nonprivate",
                        "mean_private", "sd_private", "sem_private", "mse_private")

MSE_FIELDS = ("study", "n", "p", "p_exponent", "beta_true", "epsilon", "delta",
              "replicates", "mse_private", "mse_nonprivate",
              "private_saturations", "nonprivate_saturations")


def aggregate_mse(rows: Sequence[ResultRow], cfg: ExperimentConfig) -> list[dict]:
    """MSE of both estimators against the true beta per (n, p, beta, epsilon).

    Saturated estimates enter at their clamped value; the saturation
    columns count how many did.
    """
    out = []
    for (study, n, p, beta, eps, delta), grp in _group(
            rows, lambda r: (r.study, r.n, r.p, r.beta_true, r.epsilon, r.delta)).items():
        priv = np.array([r.beta_hat_private for r in grp])
        base = np.array([r.beta_hat_nonprivate for r in grp])
        alpha = ""
        if cfg.p is None and cfg.graph_family == "erdos_renyi" and p > 0 and n > 1:
            alpha = round(-math.log(p) / math.log(n), 12)
        out.append({
            "study": study, "n": n, "p": p, "p_exponent": alpha, "beta_true": beta,
            "epsilon": eps, "delta": delta, "replicates": len(grp),
            "mse_private": float(np.mean((priv - beta) ** 2)),
            "mse_nonprivate": float(np.mean((base - beta) ** 2)),
            "private_saturations": sum(r.private_saturated_low or r.private_saturated_high
                                       for r in grp),
            "nonprivate_saturations": sum(r.nonprivate_saturated_low
                                          or r.nonprivate_saturated_high for r in grp),
        })
    return out


def run_study_beta_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[ResultRow]:
    return simulate(cfg, "beta_sweep", threads)


def run_study_mse_vs_n(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    if len(cfg.n_grid) < 2:
        raise ConfigError("mse-n needs at least two entries in n_grid")
    return aggregate_mse(simulate(cfg, "mse_n", threads), cfg)


def run_study_mse_vs_density(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    if cfg.p is not None:
        raise ConfigError("mse-density varies p_exponent; do not set p")
    return aggregate_mse(simulate(cfg, "mse_density", threads), cfg)


REAL_FIELDS = ("epsilon", "delta", "n", "beta_hat_nonprivate", "replicates",
               "cost_of_privacy", "mean_private", "sd_private",
               "private_saturated_low", "private_saturated_high")


@dataclass
class RealDataResult:
    n: int
    num_edges: int
    beta_hat: float
    saturated: bool
    rows: list[dict] = field(default_factory=list)

    def summary(self) -> str:
        flag = " (saturated)" if self.saturated else ""
        return (f"n = {self.n}, edges = {self.num_edges}, "
                f"non-private estimate = {self.beta_hat:.6g}{flag}")


def run_real_data(cfg: ExperimentConfig) -> RealDataResult:
    """Cost of privacy on an observed network: for each epsilon, the Monte
    Carlo mean of ``(private estimate - MPLE)^2`` over ``replicates`` noise
    draws with sigma and J held fixed."""
    g, sigma = load_network(cfg)
    if sigma is None:
        raise ConfigError("real-data needs outcomes_path")
    J = _coupling(cfg, g, None)
    base = mple(J, sigma, cfg.beta_max, cfg.tol)
    delta = cfg.delta_for(J.n)
    res = RealDataResult(J.n, g.num_edges, base.beta_hat,
                         base.saturated_low or base.saturated_high)
    for e_idx, eps in enumerate(cfg.epsilon_grid):
        budget = PrivacyBudget(eps, delta)
        est = prising_many(J, sigma, budget, cfg.replicates, cfg.beta_max, cfg.tol,
                           stream(cfg.seed, _REAL, e_idx), calibration=calibrate(J, budget))
        x = est.beta_hat
        res.rows.append({
            "epsilon": eps, "delta": delta, "n": J.n, "beta_hat_nonprivate": base.beta_hat,
            "replicates": cfg.replicates,
            "cost_of_privacy": float(np.mean((x - base.beta_hat) ** 2)),
            "mean_private": float(x.mean()),
            "sd_private": float(x.std(ddof=1)) if x.size > 1 else 0.0,
            "private_saturated_low": int(est.saturated_low.sum()),
            "private_saturated_high": int(est.saturated_high.sum()),
        })
    return res


def run_audits(cfg: ExperimentConfig) -> list[SensitivityReport]:
    """All three privacy audits on each of several random G(n, audit_p) instances.

    Instances use ``J = A / (n p)``; sizes cycle through ``n_grid``, the
    grid is ``beta_grid`` and the budget is the first epsilon with the
    configured delta rule.  ``audit_zero_coupling`` appends an empty
    instance; ``audit_delta_cap`` overrides the regulariser in the Jacobian
    and density audits.
    """
    grid = np.asarray(cfg.beta_grid, dtype=np.float64)
    couplings = []
    for k in range(cfg.audit_instances):
        n = cfg.n_grid[k % len(cfg.n_grid)]
        g = generate_erdos_renyi(n, cfg.audit_p, stream(cfg.seed, _AUDIT, k))
        scale = n * cfg.audit_p
        couplings.append(coupling_scaled_adjacency(g, scale) if scale > 0
                         else zero_coupling(n))
    if cfg.audit_zero_coupling:
        couplings.append(zero_coupling(cfg.n_grid[0]))
    reports = []
    for k, J in enumerate(couplings):
        budget = PrivacyBudget(cfg.epsilon_grid[0], cfg.delta_for(J.n))
        seed = stream(cfg.seed, _AUDIT, 1, k)
        reports.append(audit_sensitivity(J, grid, cfg.audit_mode, seed, cfg.audit_samples))
        reports.append(audit_jacobian_ratio(J, budget, grid, cfg.audit_mode, seed,
                                            cfg.audit_samples, cfg.audit_delta_cap))
        reports.append(audit_density_ratio(J, budget, grid, cfg.audit_mode, seed,
                                           cfg.audit_samples, cfg.audit_delta_cap))
    return reports
