"""Monte-Carlo breakdown-point estimation and perturbation sweep harnesses.

A scalar breakdown point sigma_w* is the largest perturbation strength on the
grid at which |f(perturbed) - f(original)| <= epsilon holds with empirical
probability at least 1 - alpha.  Clustering has no scalar value to compare, so
its breakdown is detected from the spread of misclassification errors: the
smallest grid strength whose interquartile range exceeds tau.

Reproducibility contract: the generator of grid point g, trial j is
``default_rng(SeedSequence(seed, spawn_key=(g, j)))``, so results are
bit-identical for a fixed config regardless of trial scheduling; the baseline
clustering uses spawn_key=(0,).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, GraphRobustError, NegativeAffinityError
from .graph import Graph, laplacian
from .perturb import SCHEMES, perturb_with_rejection
from .spectral import (Clustering, eigs_smallest, f_e, f_l, f_u,
                       misclassification, spectral_clustering)
from .weights import (FAMILY_NAMES, distribution_for_sigma,
                      make_partial_mean_shift, make_partial_uniform_window)

QUANTILES = (5, 25, 50, 75, 95)


@dataclass(frozen=True)
class SweepConfig:
    """Grid, trial count, scheme/family, and the epsilon/alpha/tau thresholds."""

    grid: tuple[float, ...]
    trials: int
    scheme: str
    family: str
    epsilon: float
    alpha: float
    seed: int
    tau: float = 0.05
    max_resamples: int = 100
    threads: int = 1

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ConfigError("sweep grid is empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("sweep grid must be strictly ascending")
        if self.grid[0] < 0:
            raise ConfigError("sweep grid must be nonnegative")
        if self.trials < 1:
            raise ConfigError("need at least one trial per grid point")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.family not in FAMILY_NAMES:
            raise ConfigError(f"unknown weight family {self.family!r}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive (may be inf)")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")


def trial_rng(seed: int, grid_index: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(grid_index, trial_index)))


def baseline_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


@dataclass
class GridPointResult:
    """Raw per-trial property values at one grid level (NaN = failed trial)."""

    index: int
    level: float
    mean_level: float
    values: dict[str, np.ndarray]
    failures: int = 0
    rejections: int = 0
    dropped_trials: int = 0

    @property
    def trials(self) -> int:
        return len(next(iter(self.values.values())))

    @property
    def valid(self) -> bool:
        return self.failures <= 0.5 * self.trials

    def quantiles(self, prop: str) -> dict[str, float]:
        vals = self.values[prop]
        ok = vals[~np.isnan(vals)]
        if len(ok) == 0:
            return {f"q{q}": math.nan for q in QUANTILES} | {"mean": math.nan}
        out = {f"q{q}": float(np.percentile(ok, q)) for q in QUANTILES}
        out["mean"] = float(ok.mean())
        return out

    def iqr(self, prop: str) -> float:
        q = self.quantiles(prop)
        return q["q75"] - q["q25"]

    def exceed_rate(self, prop: str, baseline: float, epsilon: float) -> float:
        vals = self.values[prop]
        ok = vals[~np.isnan(vals)]
        if len(ok) == 0:
            return math.nan
        return float(np.mean(np.abs(ok - baseline) > epsilon))


@dataclass
class RobustnessReport:
    """Per-grid-point Monte-Carlo summaries plus the estimated breakdown point.

    ``sigma_star`` is a grid value, "all" (never exceeded / never broke), or
    "none" (already exceeded at the first valid grid point).
    """

    kind: str
    scheme: str
    family: str
    grid: tuple[float, ...]
    properties: tuple[str, ...]
    baselines: dict[str, float]
    points: list[GridPointResult]
    epsilon: float
    alpha: float
    tau: float
    seed: int
    sigma_star: float | str = "all"
    extras: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def point(self, index: int) -> GridPointResult:
        return self.points[index]

    def exceedance_curve(self, prop: str) -> list[float]:
        return [p.exceed_rate(prop, self.baselines[prop], self.epsilon)
                for p in self.points]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "scheme": self.scheme,
            "family": self.family,
            "grid": list(self.grid),
            "properties": list(self.properties),
            "baselines": self.baselines,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "tau": self.tau,
            "seed": self.seed,
            "sigma_star": self.sigma_star,
            "extras": self.extras,
            "warnings": self.warnings,
            "points": [
                {
                    "index": p.index,
                    "level": p.level,
                    "mean_level": p.mean_level,
                    "failures": p.failures,
                    "rejections": p.rejections,
                    "dropped_trials": p.dropped_trials,
                    "summaries": {prop: p.quantiles(prop) for prop in self.properties},
                    "exceed_rates": {
                        prop: p.exceed_rate(prop, self.baselines[prop], self.epsilon)
                        for prop in self.properties if prop in self.baselines},
                }
                for p in self.points
            ],
        }

    def iter_rows(self):
        """Long-format rows: one per (grid point, trial, property)."""
        for p in self.points:
            for prop in self.properties:
                vals = p.values[prop]
                for j, v in enumerate(vals):
                    yield {
                        "grid_index": p.index,
                        "level": p.level,
                        "trial_index": j,
                        "property": prop,
                        "value": "" if np.isnan(v) else float(v),
                    }


def _map_indexed(fn: Callable[[int], object], count: int, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _scalar_sigma_star(report: RobustnessReport, prop: str) -> float | str:
    valid = [p for p in report.points if p.valid]
    if not valid:
        report.warnings.append("no valid grid points; sigma_star undefined")
        return "none"
    rates = [p.exceed_rate(prop, report.baselines[prop], report.epsilon)
             for p in valid]
    tolerated = [p.level for p, r in zip(valid, rates) if r <= report.alpha]
    if len(tolerated) == len(valid):
        return "all"
    if not tolerated or rates[0] > report.alpha:
        return "none"
    return max(tolerated)


def _run_grid(graph: Graph, cfg: SweepConfig, evaluate, properties) -> list[GridPointResult]:
    """Shared trial loop: evaluate(pg, rng) -> dict of property values."""
    points = []
    for g_idx, level in enumerate(cfg.grid):
        dist = distribution_for_sigma(cfg.family, level, n=graph.n)
        arrays = {prop: np.full(cfg.trials, np.nan) for prop in properties}
        failures = 0
        rejections = 0
        dropped = 0

        def one_trial(j, _g=g_idx, _dist=dist):
            rng = trial_rng(cfg.seed, _g, j)
            try:
                pg, rej = perturb_with_rejection(
                    graph, _dist, cfg.scheme, rng, cfg.max_resamples)
            except NegativeAffinityError:
                return None, cfg.max_resamples, 0
            drop = 1 if len(pg.dropped_nodes) else 0
            try:
                return evaluate(pg, rng), rej, drop
            except GraphRobustError:
                return None, rej, drop

        results = _map_indexed(one_trial, cfg.trials, cfg.threads)
        for j, (vals, rej, drop) in enumerate(results):
            rejections += rej
            dropped += drop
            if vals is None:
                failures += 1
                continue
            for prop, v in vals.items():
                arrays[prop][j] = v
        points.append(GridPointResult(
            index=g_idx, level=level, mean_level=1.0, values=arrays,
            failures=failures, rejections=rejections, dropped_trials=dropped))
    return points


def bp_scalar(graph: Graph, prop_fn: Callable, cfg: SweepConfig,
              prop_name: str = "property") -> RobustnessReport:
    """Breakdown point of a scalar graph property under full perturbation.

    ``prop_fn`` maps a graph or perturbed graph to a float; trials in which it
    raises a package error are counted as failures, and grid points with more
    than 50% failures are excluded from the sigma_w* search.
    """
    baseline = float(prop_fn(graph))

    def evaluate(pg, rng):
        return {prop_name: float(prop_fn(pg))}

    points = _run_grid(graph, cfg, evaluate, (prop_name,))
    report = RobustnessReport(
        kind="scalar", scheme=cfg.scheme, family=cfg.family, grid=cfg.grid,
        properties=(prop_name,), baselines={prop_name: baseline}, points=points,
        epsilon=cfg.epsilon, alpha=cfg.alpha, tau=cfg.tau, seed=cfg.seed)
    for p in points:
        if not p.valid:
            report.warnings.append(
                f"grid point {p.index} (level {p.level:g}) excluded: "
                f"{p.failures}/{cfg.trials} failures")
    report.sigma_star = _scalar_sigma_star(report, prop_name)
    return report


def _clustering_break(report: RobustnessReport, prop: str) -> tuple[float | str, float | str]:
    """(sigma_star, break_sigma) from the IQR-threshold rule."""
    valid = [p for p in report.points if p.valid]
    if not valid:
        report.warnings.append("no valid grid points; breakdown undefined")
        return "none", "none"
    iqrs = [p.iqr(prop) for p in valid]
    broken = [i for i, v in enumerate(iqrs) if v > report.tau]
    if not broken:
        return "all", "all"
    first = broken[0]
    if first == 0:
        return "none", valid[0].level
    return valid[first - 1].level, valid[first].level


def bp_clustering(graph: Graph, k: int, cfg: SweepConfig,
                  true_clustering: Clustering | None = None,
                  restarts: int = 20) -> RobustnessReport:
    """Clustering breakdown point via misclassification spread.

    Each trial reruns spectral clustering on the perturbed graph and measures
    misclassification against the unperturbed spectral clustering (and the
    planted clustering when given).  When perturbation dropped nodes, the
    comparison restricts to the surviving ones.
    """
    base_lap = laplacian(graph)
    c_spc = spectral_clustering(base_lap, k, baseline_rng(cfg.seed), restarts=restarts)
    props = ["misclassification_vs_spc"]
    if true_clustering is not None:
        props.append("misclassification_vs_true")

    def evaluate(pg, rng):
        lap = laplacian(pg)
        ct = spectral_clustering(lap, k, rng, restarts=restarts)
        out = {}
        if lap.node_ids is None:
            out["misclassification_vs_spc"] = misclassification(ct, c_spc)
            if true_clustering is not None:
                out["misclassification_vs_true"] = misclassification(ct, true_clustering)
        else:
            out["misclassification_vs_spc"] = misclassification(
                ct.labels, c_spc.restricted(lap.node_ids))
            if true_clustering is not None:
                out["misclassification_vs_true"] = misclassification(
                    ct.labels, true_clustering.restricted(lap.node_ids))
        return out

    points = _run_grid(graph, cfg, evaluate, tuple(props))
    report = RobustnessReport(
        kind="clustering", scheme=cfg.scheme, family=cfg.family, grid=cfg.grid,
        properties=tuple(props),
        baselines={p: 0.0 for p in props},
        points=points, epsilon=cfg.epsilon, alpha=cfg.alpha, tau=cfg.tau,
        seed=cfg.seed)
    sigma_star, break_sigma = _clustering_break(report, "misclassification_vs_spc")
    report.sigma_star = sigma_star
    report.extras["break_sigma"] = break_sigma
    report.extras["iqr_curve"] = [p.iqr("misclassification_vs_spc") for p in report.points]
    return report


def spectral_property(kind: str, k: int) -> Callable:
    """Property closure evaluating f_l / f_u / f_e at cluster count K."""
    fns = {"f_l": f_l, "f_u": f_u, "f_e": f_e}
    if kind not in fns:
        raise ConfigError(f"unknown spectral property {kind!r}")

    def prop(g):
        lap = laplacian(g)
        sd = eigs_smallest(lap, min(k + 1, lap.n))
        return fns[kind](sd, k)

    prop.__name__ = f"{kind}_K{k}"
    return prop


def wcut_property(clustering: Clustering) -> Callable:
    from .influence import wcut  # deferred: influence imports this module's deps

    def prop(g):
        return wcut(g, clustering)

    prop.__name__ = f"wcut_K{clustering.k}"
    return prop


def wcc_eigengap_sweep(graph: Graph, k: int, cfg: SweepConfig,
                       k_max: int | None = None) -> RobustnessReport:
    """Joint sweep of f_l, f_u, f_e at K plus dominated-K tracking.

    Per trial the argmax over candidate K in [2, k_max] of each property is
    recorded; the dominated-K breakdown for a property is the smallest grid
    strength at which the trial median of that argmax differs from the
    unperturbed argmax.
    """
    k_max = k_max or min(graph.n - 1, k + 3)
    if k_max < max(2, k):
        raise ConfigError("k_max must be at least max(2, K)")
    fns = {"f_l": f_l, "f_u": f_u, "f_e": f_e}
    props = ["f_l", "f_u", "f_e"] + [f"argmax_{p}" for p in fns]

    def all_values(g):
        lap = laplacian(g)
        m = min(k_max + 1, lap.n)
        sd = eigs_smallest(lap, m)
        out = {}
        for name, fn in fns.items():
            out[name] = fn(sd, k)
            cand = np.array([fn(sd, kk) for kk in range(2, m)])
            out[f"argmax_{name}"] = float(2 + int(cand.argmax())) if len(cand) else math.nan
        return out

    baselines = all_values(graph)

    def evaluate(pg, rng):
        return all_values(pg)

    points = _run_grid(graph, cfg, evaluate, tuple(props))
    report = RobustnessReport(
        kind="wcc-eigengap", scheme=cfg.scheme, family=cfg.family, grid=cfg.grid,
        properties=tuple(props), baselines=baselines, points=points,
        epsilon=cfg.epsilon, alpha=cfg.alpha, tau=cfg.tau, seed=cfg.seed)
    report.sigma_star = _scalar_sigma_star(report, "f_e")
    dominated = {}
    for name in fns:
        base_arg = baselines[f"argmax_{name}"]
        level = "all"
        for p in report.points:
            if not p.valid:
                continue
            med = p.quantiles(f"argmax_{name}")["q50"]
            if not math.isnan(med) and med != base_arg:
                level = p.level
                break
        dominated[name] = level
    report.extras["dominated_k_breakdown"] = dominated
    report.extras["sigma_star_per_property"] = {
        name: _scalar_sigma_star(report, name) for name in fns}
    return report


def partial_sweep(graph: Graph, subset, properties: dict[str, Callable],
                  levels, scheme: str, trials: int, seed: int,
                  variance: float = 0.1, family: str = "gamma",
                  window_width: float = 0.25, max_resamples: int = 100,
                  threads: int = 1) -> RobustnessReport:
    """Sweep the mean weight of a node subset and record property trajectories.

    family "gamma": subset weights ~ Gamma with mean = level, fixed variance.
    family "uniform": subset weights ~ Uniform(level, level + window_width),
    the window form used for symmetric perturbation (keeps affinities
    nonnegative for level >= 0.5); the realized mean level + width/2 is
    recorded per grid point.
    """
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ConfigError("partial perturbation selector produced no nodes")
    levels = tuple(float(x) for x in levels)
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("levels must be non-empty and strictly ascending")
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    if family not in ("gamma", "uniform"):
        raise ConfigError("partial sweep family must be 'gamma' or 'uniform'")

    baselines = {name: float(fn(graph)) for name, fn in properties.items()}
    names = tuple(properties)
    points = []
    for g_idx, level in enumerate(levels):
        if family == "gamma":
            gen = make_partial_mean_shift(subset, level, variance)
        else:
            gen = make_partial_uniform_window(subset, level, window_width)
        arrays = {prop: np.full(trials, np.nan) for prop in names}
        failures = rejections = dropped = 0

        def one_trial(j, _g=g_idx, _gen=gen):
            rng = trial_rng(seed, _g, j)
            try:
                pg, rej = perturb_with_rejection(graph, _gen, scheme, rng, max_resamples)
            except NegativeAffinityError:
                return None, max_resamples, 0
            drop = 1 if len(pg.dropped_nodes) else 0
            try:
                return {name: float(fn(pg)) for name, fn in properties.items()}, rej, drop
            except GraphRobustError:
                return None, rej, drop

        for j, (vals, rej, drop) in enumerate(_map_indexed(one_trial, trials, threads)):
            rejections += rej
            dropped += drop
            if vals is None:
                failures += 1
                continue
            for prop, v in vals.items():
                arrays[prop][j] = v
        points.append(GridPointResult(
            index=g_idx, level=level, mean_level=gen.mean, values=arrays,
            failures=failures, rejections=rejections, dropped_trials=dropped))

    report = RobustnessReport(
        kind="partial", scheme=scheme, family=f"partial-{family}", grid=levels,
        properties=names, baselines=baselines, points=points,
        epsilon=math.inf, alpha=0.05, tau=0.05, seed=seed)
    report.extras["subset_size"] = int(subset.size)
    report.extras["median_curves"] = {
        name: [p.quantiles(name)["q50"] for p in points] for name in names}
    return report


def isotonic_non_decreasing(values) -> np.ndarray:
    """Pool-adjacent-violators fit of a non-decreasing curve (equal weights)."""
    vals = [float(v) for v in values]
    blocks = [[v, 1] for v in vals]
    i = 0
    while i < len(blocks) - 1:
        if blocks[i][0] > blocks[i + 1][0] + 1e-15:
            total = blocks[i][0] * blocks[i][1] + blocks[i + 1][0] * blocks[i + 1][1]
            count = blocks[i][1] + blocks[i + 1][1]
            blocks[i:i + 2] = [[total / count, count]]
            i = max(i - 1, 0)
        else:
            i += 1
    out = []
    for mean, count in blocks:
        out.extend([mean] * count)
    return np.asarray(out)
