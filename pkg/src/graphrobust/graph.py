"""Graph representation, degree bookkeeping, Laplacian construction, components.

The adjacency convention: ``A[i, j]`` is the weight of the arc i -> j and the
out-degree is ``d_i = sum_j A[i, j]``.  Undirected graphs store both arc
directions so the materialized matrix is symmetric.  The Laplacian is the
symmetrized normalized form ``L = I - D^{-1/2} (A + A^T) D^{-1/2} / 2`` with
``D = diag(d)``, which reduces to the usual normalized Laplacian for symmetric
``A``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from .errors import GraphStructureError, IsolatedNodeError

# Dense Laplacians below this node count, sparse above.
DENSE_THRESHOLD = 2000


class Graph:
    """Immutable weighted graph with cached degrees.

    Construct via :func:`build_graph`; the constructor assumes already
    validated arc arrays (both directions present for undirected input).
    """

    def __init__(self, n: int, directed: bool, src: np.ndarray, dst: np.ndarray,
                 weight: np.ndarray):
        self.n = int(n)
        self.directed = bool(directed)
        self.src = src
        self.dst = dst
        self.weight = weight
        self._adj: sp.csr_array | None = None
        deg = np.zeros(self.n)
        np.add.at(deg, src, weight)
        self.out_degrees = deg

    def adjacency(self) -> sp.csr_array:
        """Adjacency matrix as CSR (arcs as stored; symmetric if undirected)."""
        if self._adj is None:
            adj = sp.csr_array(
                (self.weight, (self.src, self.dst)), shape=(self.n, self.n))
            adj.sum_duplicates()
            self._adj = adj
        return self._adj

    @property
    def num_arcs(self) -> int:
        return len(self.src)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges (arc pairs) or directed arcs."""
        return len(self.src) if self.directed else len(self.src) // 2

    def undirected_pairs(self) -> np.ndarray:
        """Unique (i, j, w) rows with i < j.  Undirected graphs only."""
        if self.directed:
            raise GraphStructureError("undirected_pairs requires an undirected graph")
        mask = self.src < self.dst
        return np.column_stack(
            [self.src[mask], self.dst[mask], self.weight[mask]])

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, edges={self.num_edges}, {kind})"


class Laplacian:
    """Symmetric (normalized) Laplacian matrix, dense or sparse by size.

    ``node_ids`` maps matrix rows back to original node ids when zero-degree
    nodes were dropped during perturbed construction; ``None`` means identity.
    ``proper`` is True when the matrix is a genuine normalized Laplacian
    (degrees equal the row sums of the symmetrized affinity), guaranteeing a
    spectrum inside [0, 2].  Asymmetrically perturbed graphs mismatch degrees
    and affinities, so their spectra may leave that range slightly.
    """

    def __init__(self, matrix, node_ids: np.ndarray | None = None,
                 proper: bool = True):
        self.matrix = matrix
        self.n = matrix.shape[0]
        self.node_ids = node_ids
        self.proper = proper

    @property
    def is_dense(self) -> bool:
        return isinstance(self.matrix, np.ndarray)

    def dense(self) -> np.ndarray:
        return self.matrix if self.is_dense else self.matrix.toarray()

    def norm_bound(self) -> float:
        """Gershgorin upper bound on the spectral norm."""
        m = np.abs(self.dense()) if self.is_dense else abs(self.matrix)
        return float(m.sum(axis=1).max())


def build_graph(edges: Iterable[Sequence], directed: bool, n: int | None = None) -> Graph:
    """Build a graph from (i, j) or (i, j, weight) tuples.

    Undirected input is symmetrized by mirroring each edge.  Rejects
    self-loops, negative weights, out-of-range ids, and duplicate edges
    (simple-graph contract).  Zero-weight entries are treated as absent,
    because they contribute nothing to degrees or the Laplacian and would
    only pollute sparsity-pattern comparisons.
    """
    rows = list(edges)
    if rows:
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] not in (2, 3):
            raise GraphStructureError("edges must be (i, j) or (i, j, weight) tuples")
        ii = arr[:, 0]
        jj = arr[:, 1]
        ww = arr[:, 2] if arr.shape[1] == 3 else np.ones(len(arr))
        if not np.all(ii == ii.astype(np.int64)) or not np.all(jj == jj.astype(np.int64)):
            raise GraphStructureError("node ids must be integers")
        ii = ii.astype(np.int64)
        jj = jj.astype(np.int64)
    else:
        ii = np.zeros(0, dtype=np.int64)
        jj = np.zeros(0, dtype=np.int64)
        ww = np.zeros(0)

    if n is None:
        n = int(max(ii.max(initial=-1), jj.max(initial=-1)) + 1)
    if len(ii):
        if ii.min() < 0 or jj.min() < 0 or ii.max() >= n or jj.max() >= n:
            raise GraphStructureError(f"node id out of range [0, {n})")
        loops = ii == jj
        if loops.any():
            raise GraphStructureError(f"self-loop at node {int(ii[loops.argmax()])}")
        if not np.all(np.isfinite(ww)):
            raise GraphStructureError("edge weights must be finite")
        neg = ww < 0
        if neg.any():
            k = int(neg.argmax())
            raise GraphStructureError(
                f"negative weight {ww[k]} on edge ({int(ii[k])}, {int(jj[k])})")

    keep = ww > 0
    ii, jj, ww = ii[keep], jj[keep], ww[keep]

    if directed:
        src, dst, wt = ii, jj, ww
        dup_keys = src.astype(np.int64) * n + dst
    else:
        canon = np.minimum(ii, jj).astype(np.int64) * n + np.maximum(ii, jj)
        uniq, counts = np.unique(canon, return_counts=True)
        if np.any(counts > 1):
            bad = int(uniq[counts > 1][0])
            raise GraphStructureError(
                f"duplicate undirected edge ({bad // n}, {bad % n})")
        src = np.concatenate([ii, jj])
        dst = np.concatenate([jj, ii])
        wt = np.concatenate([ww, ww])
        dup_keys = None
    if directed and len(src):
        uniq, counts = np.unique(dup_keys, return_counts=True)
        if np.any(counts > 1):
            bad = int(uniq[counts > 1][0])
            raise GraphStructureError(f"duplicate arc ({bad // n}, {bad % n})")

    return Graph(n, directed, src, dst, wt)


def laplacian(g, dense_threshold: int = DENSE_THRESHOLD) -> Laplacian:
    """Normalized Laplacian ``I - D^{-1/2}(A + A^T)D^{-1/2}/2`` of a graph.

    Accepts a :class:`Graph` or a perturbed graph exposing ``n``,
    ``adjacency()`` and ``out_degrees``.  For plain graphs, any zero-degree
    node is an error (the formula divides by sqrt(d_i)).  Perturbed graphs may
    carry zero perturbed degrees (weight-zero resampling draws); those nodes
    are dropped from the matrix, with the surviving ids recorded in
    ``node_ids``.
    """
    d = np.asarray(g.out_degrees, dtype=float)
    allow_drop = getattr(g, "allows_degree_drop", False)
    zero = d <= 0
    node_ids = None
    if zero.any():
        if not allow_drop:
            raise IsolatedNodeError(
                f"node {int(np.flatnonzero(zero)[0])} has zero degree; "
                "isolated nodes have no normalized Laplacian")
        node_ids = np.flatnonzero(~zero)
        d = d[node_ids]
    adj = g.adjacency()
    if node_ids is not None:
        adj = adj[node_ids][:, node_ids]

    m = len(d)
    inv_sqrt = 1.0 / np.sqrt(d)
    proper = getattr(g, "proper_laplacian", True)
    if m <= dense_threshold:
        s = (adj.toarray() + adj.toarray().T) / 2.0
        mat = -(inv_sqrt[:, None] * s * inv_sqrt[None, :])
        mat = (mat + mat.T) / 2.0  # enforce exact symmetry
        np.fill_diagonal(mat, 1.0)
        return Laplacian(mat, node_ids=node_ids, proper=proper)
    s = (adj + adj.T) * 0.5
    dm = sp.dia_array((inv_sqrt[None, :], [0]), shape=(m, m))
    mat = (dm @ s @ dm).tocsr()
    mat = (mat + mat.T) * 0.5
    mat = (sp.eye_array(m, format="csr") - mat).tocsr()
    return Laplacian(mat, node_ids=node_ids, proper=proper)


def connected_components(g) -> tuple[int, np.ndarray]:
    """Component count and per-node component labels by graph traversal.

    Direction is ignored (weak connectivity).  Labels are contiguous from 0
    in order of first appearance.
    """
    count, raw = _cc(g.adjacency(), directed=True, connection="weak")
    # relabel to first-appearance order for determinism across scipy versions
    order = {}
    labels = np.empty(g.n, dtype=np.int64)
    for i, lab in enumerate(raw):
        if lab not in order:
            order[lab] = len(order)
        labels[i] = order[lab]
    return int(count), labels
