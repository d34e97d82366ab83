"""Degree-corrected stochastic block model generation.

Edges are realized as independent Bernoulli draws with success probability
min(1, w_i w_j B[k(i), k(j)]) for i < j, mirrored to an undirected simple
graph.  Node weights w follow a configurable law (default 0.5 + 0.5 U(0, 1)),
and planted labels are returned alongside the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .graph import Graph, build_graph
from .spectral import Clustering


def uniform_weight_law(floor: float, spread: float):
    """The paper-style node-weight law floor + spread * Uniform(0, 1)."""
    if floor < 0 or spread < 0 or floor + spread <= 0:
        raise ConfigError("weight law needs nonnegative floor/spread, not both 0")

    def law(n: int, rng: np.random.Generator) -> np.ndarray:
        return floor + spread * rng.random(n)

    law.description = f"{floor:g} + {spread:g}*U(0,1)"  # type: ignore[attr-defined]
    return law


@dataclass(frozen=True)
class DcSbmSpec:
    """Parameters of one synthetic graph draw."""

    n: int
    k: int
    proportions: tuple[float, ...]
    block_matrix: np.ndarray
    weight_floor: float = 0.5
    weight_spread: float = 0.5
    node_weights: np.ndarray | None = field(default=None, compare=False)
    retry_cap: int = 20

    def __post_init__(self):
        pi = np.asarray(self.proportions, dtype=float)
        if len(pi) != self.k:
            raise ConfigError(f"{len(pi)} proportions for K={self.k} clusters")
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-9:
            raise ConfigError("cluster proportions must be positive and sum to 1")
        b = np.asarray(self.block_matrix, dtype=float)
        if b.shape != (self.k, self.k):
            raise ConfigError(f"block matrix must be {self.k}x{self.k}")
        if np.any(b < 0) or not np.allclose(b, b.T, atol=1e-12):
            raise ConfigError("block matrix must be symmetric nonnegative")
        if self.n < 2 * self.k:
            raise ConfigError("need at least two nodes per cluster on average")


@dataclass(frozen=True)
class DcSbmResult:
    graph: Graph
    clustering: Clustering
    node_weights: np.ndarray
    clamped_pairs: int
    clamp_rate: float
    isolated_retries: int


def _cluster_sizes(n: int, pi: np.ndarray) -> np.ndarray:
    sizes = np.floor(pi * n).astype(int)
    # largest-remainder rounding keeps sum exact and deterministic
    rem = pi * n - sizes
    short = n - sizes.sum()
    for idx in np.argsort(-rem)[:short]:
        sizes[idx] += 1
    if np.any(sizes == 0):
        raise ConfigError("a cluster rounded to zero size; increase n")
    return sizes


def generate_dcsbm(spec: DcSbmSpec, rng) -> DcSbmResult:
    """Draw a graph and its planted clustering.

    Isolated nodes get their incident edge indicators redrawn up to
    ``spec.retry_cap`` times; a node still isolated afterwards is an error
    (the Laplacian pipeline cannot use it).
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    pi = np.asarray(spec.proportions, dtype=float)
    sizes = _cluster_sizes(spec.n, pi)
    labels = np.repeat(np.arange(spec.k), sizes)
    if spec.node_weights is not None:
        w = np.asarray(spec.node_weights, dtype=float)
        if w.shape != (spec.n,):
            raise ConfigError("explicit node weights must have length n")
    else:
        w = spec.weight_floor + spec.weight_spread * rng.random(spec.n)
    b = np.asarray(spec.block_matrix, dtype=float)

    probs = np.outer(w, w) * b[np.ix_(labels, labels)]
    clamped = int(np.count_nonzero(np.triu(probs, 1) > 1.0))
    total_pairs = spec.n * (spec.n - 1) // 2
    probs = np.minimum(probs, 1.0)

    upper = np.triu(rng.random((spec.n, spec.n)) < probs, 1)
    adj = upper | upper.T

    retries = 0
    for _ in range(spec.retry_cap):
        degree = adj.sum(axis=1)
        isolated = np.flatnonzero(degree == 0)
        if len(isolated) == 0:
            break
        retries += 1
        for i in isolated:
            row = rng.random(spec.n) < probs[i]
            row[i] = False
            adj[i, :] |= row
            adj[:, i] |= row
    else:
        degree = adj.sum(axis=1)
        isolated = np.flatnonzero(degree == 0)
        if len(isolated):
            raise NumericalError(
                f"{len(isolated)} nodes still isolated after {spec.retry_cap} "
                f"redraws (first: {int(isolated[0])}); the model is too sparse")

    ii, jj = np.nonzero(np.triu(adj, 1))
    rows = np.column_stack([ii, jj, np.ones(len(ii))])
    graph = build_graph(rows, directed=False, n=spec.n)
    return DcSbmResult(
        graph=graph,
        clustering=Clustering.from_labels(labels, spec.k),
        node_weights=w,
        clamped_pairs=clamped,
        clamp_rate=clamped / total_pairs,
        isolated_retries=retries,
    )


def planted_partition(k: int, within: float, between: float) -> np.ndarray:
    """Block matrix with `within` on the diagonal, `between` elsewhere."""
    if not (0 < within < 1) or not (0 <= between < 1):
        raise ConfigError("intensities must lie in (0, 1) (between may be 0)")
    b = np.full((k, k), float(between))
    np.fill_diagonal(b, float(within))
    return b


def block_matrix_from_target_gap(k: int, proportions, within: float, between: float,
                                 average_degree: float | None = None,
                                 n: int | None = None,
                                 mean_weight: float = 0.75) -> tuple[np.ndarray, np.ndarray]:
    """Planted-partition block matrix plus its achieved population spectrum.

    Optionally rescales intensities so the expected average degree of a
    generated graph hits ``average_degree`` (requires ``n``; uses the mean
    node weight, 0.75 for the default law).  Arbitrary target spectra are not
    representable by equal-intensity planted partitions, so the achieved
    population normalized-Laplacian spectrum is reported for inspection
    instead.
    """
    pi = np.asarray(proportions, dtype=float)
    if len(pi) != k or np.any(pi <= 0) or abs(pi.sum() - 1) > 1e-9:
        raise ConfigError("proportions must be positive and sum to 1")
    b = planted_partition(k, within, between)
    if average_degree is not None:
        if n is None:
            raise ConfigError("average-degree scaling needs n")
        expected = float(n * mean_weight**2 * (pi @ b @ pi))
        scale = average_degree / expected
        b = b * scale
        if b.max() > 1.0:
            raise ConfigError(
                f"average degree {average_degree} needs intensity {b.max():.3f} > 1")
    return b, population_spectrum(b, pi)


def population_spectrum(block_matrix: np.ndarray, proportions) -> np.ndarray:
    """Normalized-Laplacian spectrum of the K-block population graph.

    Blocks act as super-nodes with masses pi; edge mass between blocks k, l
    is pi_k pi_l B[k, l].  Uniform weight scaling cancels, so the node-weight
    law does not enter.
    """
    pi = np.asarray(proportions, dtype=float)
    omega = np.outer(pi, pi) * np.asarray(block_matrix, dtype=float)
    deg = omega.sum(axis=1)
    if np.any(deg <= 0):
        return np.zeros(len(pi))
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(len(pi)) - inv_sqrt[:, None] * omega * inv_sqrt[None, :]
    return np.linalg.eigvalsh((lap + lap.T) / 2.0)
