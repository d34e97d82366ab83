"""Node-weight perturbation schemes and baseline perturbations.

Asymmetric scheme: each node scales its outgoing edges, At[i, j] = w_i A[i, j],
so perturbed out-degrees are exactly dt_i = w_i d_i.  Symmetric scheme:
At[i, j] = (w_i + w_j - 1) A[i, j], which keeps At symmetric whenever A is.
Both preserve E(At) = A for mean-1 weights and never move an edge, so the
sparsity pattern is preserved for strictly positive weights.

Baselines for comparison: uniform edge rewiring (keeps |V| and |E|, moves
edge positions) and induced-subgraph node subsampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, GraphStructureError, NegativeAffinityError
from .graph import Graph, Laplacian, build_graph, laplacian

ASYMMETRIC = "asymmetric"
SYMMETRIC = "symmetric"
SCHEMES = (ASYMMETRIC, SYMMETRIC)


class PerturbedGraph:
    """A graph with node-weight-perturbed affinities.

    Exposes the same surface the Laplacian constructor needs (``n``,
    ``adjacency()``, ``out_degrees``).  Nodes whose perturbed degree is zero
    (weight-zero draws under the asymmetric scheme) are listed in
    ``dropped_nodes`` and are removed during Laplacian construction, matching
    the deletion interpretation of zero resampling weights.
    """

    allows_degree_drop = True

    def __init__(self, base: Graph, weights: np.ndarray, scheme: str,
                 adj: sp.csr_array, out_degrees: np.ndarray):
        self.base = base
        self.weights = weights
        self.scheme = scheme
        self.n = base.n
        self.directed = base.directed
        self._adj = adj
        self.out_degrees = out_degrees
        self.dropped_nodes = np.flatnonzero(out_degrees <= 0)

    # the asymmetric scheme breaks the degree/affinity match, so its
    # "Laplacian" may have spectrum slightly outside [0, 2]
    @property
    def proper_laplacian(self) -> bool:
        return self.scheme == SYMMETRIC

    def adjacency(self) -> sp.csr_array:
        return self._adj

    def __repr__(self) -> str:
        return (f"PerturbedGraph(n={self.n}, scheme={self.scheme}, "
                f"dropped={len(self.dropped_nodes)})")


def _check_weights(g: Graph, weights) -> np.ndarray:
    w = np.asarray(getattr(weights, "values", weights), dtype=float)
    if w.shape != (g.n,):
        raise ConfigError(f"weight vector has length {w.shape}, expected ({g.n},)")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigError("node weights must be finite and nonnegative")
    return w


def perturb_asymmetric(g: Graph, weights) -> PerturbedGraph:
    """Scale each node's outgoing edges by its weight."""
    w = _check_weights(g, weights)
    new_w = g.weight * w[g.src]
    adj = sp.csr_array((new_w, (g.src, g.dst)), shape=(g.n, g.n))
    return PerturbedGraph(g, w, ASYMMETRIC, adj, g.out_degrees * w)


def perturb_symmetric(g: Graph, weights) -> PerturbedGraph:
    """Apply At[i, j] = (w_i + w_j - 1) A[i, j].

    Raises :class:`NegativeAffinityError` when some edge factor w_i + w_j - 1
    is negative; callers running Monte-Carlo trials should resample the whole
    weight vector (see :func:`perturb_with_rejection`).
    """
    w = _check_weights(g, weights)
    factor = w[g.src] + w[g.dst] - 1.0
    neg = factor < 0
    if neg.any():
        k = int(neg.argmax())
        raise NegativeAffinityError(
            f"edge ({int(g.src[k])}, {int(g.dst[k])}) got affinity factor "
            f"{factor[k]:.6g} < 0")
    new_w = g.weight * factor
    adj = sp.csr_array((new_w, (g.src, g.dst)), shape=(g.n, g.n))
    deg = np.zeros(g.n)
    np.add.at(deg, g.src, new_w)
    return PerturbedGraph(g, w, SYMMETRIC, adj, deg)


def perturb(g: Graph, weights, scheme: str) -> PerturbedGraph:
    if scheme == ASYMMETRIC:
        return perturb_asymmetric(g, weights)
    if scheme == SYMMETRIC:
        return perturb_symmetric(g, weights)
    raise ConfigError(f"unknown perturbation scheme {scheme!r}")


def perturb_with_rejection(g: Graph, dist, scheme: str, rng,
                           max_resamples: int = 100) -> tuple[PerturbedGraph, int]:
    """Sample weights and perturb, resampling on negative affinities.

    Returns the perturbed graph and the number of rejected draws.  Raises
    after ``max_resamples`` consecutive rejections.
    """
    rejections = 0
    while True:
        w = dist.sample(g.n, rng)
        try:
            return perturb(g, w, scheme), rejections
        except NegativeAffinityError:
            rejections += 1
            if rejections >= max_resamples:
                raise


def transition_equivalent_laplacian(pg: PerturbedGraph) -> Laplacian:
    """Base-degree similarity transform of I - Dt^{-1} At.

    For an asymmetric perturbation of an undirected graph with strictly
    positive weights, the perturbed transition matrix Dt^{-1} At equals
    D^{-1} A exactly, so this matrix has exactly the spectrum of the
    unperturbed normalized Laplacian.  It is the operator behind the
    eigenvalue-invariance property of the asymmetric scheme.
    """
    if pg.base.directed:
        raise GraphStructureError("transition-equivalent form needs an undirected base")
    if np.any(pg.out_degrees <= 0):
        raise ConfigError("transition-equivalent form needs strictly positive weights")
    d = pg.base.out_degrees
    s = np.sqrt(d)
    at = pg.adjacency().toarray()
    m = (s[:, None] / pg.out_degrees[:, None]) * at / s[None, :]
    m = (m + m.T) / 2.0
    lap = -m
    np.fill_diagonal(lap, 1.0 + np.diag(lap))
    return Laplacian(lap, proper=True)


def baseline_edge_rewire(g: Graph, alpha: float, rng: np.random.Generator) -> Graph:
    """Relocate ceil(alpha * |E|) edges to uniformly random free slots.

    Keeps node and edge counts; relocated edges carry their original weights.
    """
    if not 0 <= alpha <= 1:
        raise ConfigError(f"rewire fraction alpha must be in [0, 1], got {alpha}")
    if g.directed:
        raise GraphStructureError("edge rewiring is defined for undirected graphs")
    pairs = g.undirected_pairs()
    m = len(pairs)
    k = math.ceil(alpha * m)
    if k == 0:
        return build_graph(pairs, directed=False, n=g.n)
    move_idx = rng.choice(m, size=k, replace=False)
    keep_mask = np.ones(m, dtype=bool)
    keep_mask[move_idx] = False
    occupied = set(map(tuple, pairs[keep_mask, :2].astype(int)))
    max_slots = g.n * (g.n - 1) // 2
    if m > max_slots - 1:
        raise GraphStructureError("graph too dense to relocate edges")
    new_rows = []
    for w in pairs[move_idx, 2]:
        for _ in range(10000):
            i = int(rng.integers(g.n))
            j = int(rng.integers(g.n))
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            if key in occupied:
                continue
            occupied.add(key)
            new_rows.append((key[0], key[1], w))
            break
        else:
            raise GraphStructureError("could not place a relocated edge")
    rows = np.vstack([pairs[keep_mask], np.asarray(new_rows)])
    return build_graph(rows, directed=False, n=g.n)


def baseline_node_subsample(g: Graph, beta: float,
                            rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    """Induced subgraph on ceil(beta * n) uniformly chosen nodes.

    Returns the subgraph (ids remapped to [0, k)) and the kept original ids
    in ascending order.
    """
    if not 0 < beta <= 1:
        raise ConfigError(f"subsample fraction beta must be in (0, 1], got {beta}")
    k = math.ceil(beta * g.n)
    if k == 0:
        raise ConfigError("empty node subsample")
    kept = np.sort(rng.choice(g.n, size=k, replace=False))
    pos = -np.ones(g.n, dtype=np.int64)
    pos[kept] = np.arange(k)
    mask = (pos[g.src] >= 0) & (pos[g.dst] >= 0)
    if g.directed:
        rows = np.column_stack([pos[g.src[mask]], pos[g.dst[mask]], g.weight[mask]])
    else:
        sub_mask = mask & (g.src < g.dst)
        rows = np.column_stack(
            [pos[g.src[sub_mask]], pos[g.dst[sub_mask]], g.weight[sub_mask]])
    return build_graph(rows, directed=g.directed, n=k), kept


@dataclass(frozen=True)
class EdgeBiasReport:
    """Per-edge Monte-Carlo summary of perturbed Laplacian entries.

    ``edges`` holds (i, j) positions (i < j for undirected input), ``mean``
    and ``std_error`` the trial statistics of Lt[i, j], ``reference`` the
    unperturbed L[i, j], and ``counts`` how many trials had the entry defined
    (both endpoints surviving).  ``ratio_deviation`` summarizes
    |mean(Lt_ij)/L_ij - 1| averaged over edges.
    """

    edges: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    reference: np.ndarray
    counts: np.ndarray
    trials: int
    rejections: int
    ratio_deviation: float


def _edge_positions(g: Graph) -> np.ndarray:
    if g.directed:
        return np.column_stack([g.src, g.dst])
    pairs = g.undirected_pairs()
    return pairs[:, :2].astype(np.int64)


def _summarize_bias(g: Graph, edges, sums, sqsums, counts, trials, rejections):
    lap0 = laplacian(g).dense()
    ref = lap0[edges[:, 0], edges[:, 1]]
    valid = counts > 1
    mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    var = np.where(valid, (sqsums - counts * mean**2) / np.maximum(counts - 1, 1), np.nan)
    se = np.sqrt(np.maximum(var, 0.0) / np.maximum(counts, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        dev = np.abs(mean / ref - 1.0)
    ratio_dev = float(np.nanmean(dev))
    return EdgeBiasReport(edges=edges, mean=mean, std_error=se, reference=ref,
                          counts=counts, trials=trials, rejections=rejections,
                          ratio_deviation=ratio_dev)


def empirical_laplacian_bias(g: Graph, scheme: str, dist, trials: int,
                             rng, max_resamples: int = 100) -> EdgeBiasReport:
    """Monte-Carlo mean of perturbed Laplacian entries at the original edges."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    edges = _edge_positions(g)
    sums = np.zeros(len(edges))
    sqsums = np.zeros(len(edges))
    counts = np.zeros(len(edges))
    rejections = 0
    for _ in range(trials):
        pg, rej = perturb_with_rejection(g, dist, scheme, rng, max_resamples)
        rejections += rej
        lap = laplacian(pg)
        mat = lap.dense()
        if lap.node_ids is None:
            vals = mat[edges[:, 0], edges[:, 1]]
            defined = np.ones(len(edges), dtype=bool)
        else:
            pos = -np.ones(g.n, dtype=np.int64)
            pos[lap.node_ids] = np.arange(len(lap.node_ids))
            defined = (pos[edges[:, 0]] >= 0) & (pos[edges[:, 1]] >= 0)
            vals = np.zeros(len(edges))
            vals[defined] = mat[pos[edges[defined, 0]], pos[edges[defined, 1]]]
        sums[defined] += vals[defined]
        sqsums[defined] += vals[defined] ** 2
        counts[defined] += 1
    return _summarize_bias(g, edges, sums, sqsums, counts, trials, rejections)


class _DroppableView:
    """Adapter letting :func:`laplacian` drop isolated nodes of a plain graph."""

    allows_degree_drop = True
    proper_laplacian = True

    def __init__(self, g: Graph):
        self._g = g
        self.n = g.n
        self.out_degrees = g.out_degrees

    def adjacency(self):
        return self._g.adjacency()


def baseline_bias(g: Graph, kind: str, fraction: float, trials: int,
                  rng) -> EdgeBiasReport:
    """Laplacian entry bias at original edge positions for baseline schemes.

    kind "rewire": entries are 0 for trials in which the edge was relocated.
    kind "subsample": entries are averaged over trials where both endpoints
    were kept (the entry is undefined otherwise).
    """
    if kind not in ("rewire", "subsample"):
        raise ConfigError(f"unknown baseline kind {kind!r}")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    edges = _edge_positions(g)
    sums = np.zeros(len(edges))
    sqsums = np.zeros(len(edges))
    counts = np.zeros(len(edges))
    for _ in range(trials):
        if kind == "rewire":
            h = baseline_edge_rewire(g, fraction, rng)
            lap = laplacian(_DroppableView(h))
            kept = np.arange(g.n)
        else:
            h, kept = baseline_node_subsample(g, fraction, rng)
            if not np.any(h.out_degrees > 0):
                continue
            lap = laplacian(_DroppableView(h))
        mat = lap.dense()
        pos = -np.ones(g.n, dtype=np.int64)
        rows = kept if lap.node_ids is None else kept[lap.node_ids]
        pos[rows] = np.arange(len(rows))
        defined = (pos[edges[:, 0]] >= 0) & (pos[edges[:, 1]] >= 0)
        vals = np.zeros(len(edges))
        vals[defined] = mat[pos[edges[defined, 0]], pos[edges[defined, 1]]]
        sums[defined] += vals[defined]
        sqsums[defined] += vals[defined] ** 2
        counts[defined] += 1
    return _summarize_bias(g, edges, sums, sqsums, counts, trials, 0)
