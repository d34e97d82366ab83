"""Eigensolver facade, spectral property functions, clustering, and distances.

Spectral properties for a cluster count K, all on the normalized Laplacian
spectrum (ascending eigenvalues):

* ``f_l = sum_{k <= K} lambda_k`` -- near 0 when the graph has K weakly
  connected components;
* ``f_u = lambda_{K+1} - f_l`` -- away from 0 when those K components are
  stable;
* ``f_e = lambda_{K+1} - lambda_K`` -- the K-th eigengap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import ArpackNoConvergence

from .errors import ConfigError, NumericalError
from .graph import Laplacian

RESIDUAL_TOL = 1e-8
ORTHO_TOL = 1e-8
RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class SpectralData:
    """Smallest eigenpairs of a symmetric Laplacian, ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column k matches eigenvalues[k]
    m: int

    def eigenvalue(self, k: int) -> float:
        """k-th smallest eigenvalue, 1-based."""
        if not 1 <= k <= self.m:
            raise ConfigError(f"eigenvalue index k={k} outside computed range 1..{self.m}")
        return float(self.eigenvalues[k - 1])

    def eigenvector(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.m:
            raise ConfigError(f"eigenvector index k={k} outside computed range 1..{self.m}")
        return self.eigenvectors[:, k - 1]


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.abs(vecs).argmax(axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigs_smallest(lap: Laplacian, m: int, maxiter_factor: int = 10) -> SpectralData:
    """The m smallest eigenpairs of a symmetric Laplacian.

    Dense graphs use a direct symmetric solve; large sparse ones a
    shift-inverted Lanczos iteration with a cap of ``maxiter_factor * n``
    iterations.  Residuals and orthonormality are verified; eigenvalues of
    proper normalized Laplacians are range-checked against [0, 2] and clipped
    of sub-tolerance numerical overshoot.
    """
    n = lap.n
    if not 1 <= m <= n:
        raise ConfigError(f"requested m={m} eigenpairs of an n={n} Laplacian")
    if lap.is_dense:
        vals, vecs = scipy.linalg.eigh(lap.matrix, subset_by_index=(0, m - 1))
    elif m >= n - 1:
        vals, vecs = scipy.linalg.eigh(lap.dense(), subset_by_index=(0, m - 1))
    else:
        try:
            # shift below 0 keeps L - sigma I positive definite and well factorable
            vals, vecs = spla.eigsh(lap.matrix.tocsc(), k=m, sigma=-0.05,
                                    which="LM", maxiter=maxiter_factor * n,
                                    tol=1e-12)
        except ArpackNoConvergence as exc:
            raise NumericalError(
                f"eigensolver failed to converge within {maxiter_factor * n} "
                f"iterations for m={m}, n={n}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]

    bound = max(1.0, lap.norm_bound())
    resid = lap.matrix @ vecs - vecs * vals[None, :]
    worst = float(np.linalg.norm(resid, axis=0).max())
    if worst > RESIDUAL_TOL * bound:
        raise NumericalError(f"eigenpair residual {worst:.3e} exceeds tolerance")
    gram = vecs.T @ vecs
    if float(np.abs(gram - np.eye(m)).max()) > ORTHO_TOL:
        raise NumericalError("eigenvectors are not orthonormal within tolerance")
    if lap.proper:
        if vals.min() < -RANGE_SLACK or vals.max() > 2.0 + RANGE_SLACK:
            raise NumericalError(
                f"normalized-Laplacian spectrum left [0, 2]: "
                f"[{vals.min():.3e}, {vals.max():.3e}]")
        vals = np.clip(vals, 0.0, 2.0)
    return SpectralData(eigenvalues=vals, eigenvectors=_canonical_signs(vecs), m=m)


def _need(sd: SpectralData, k_plus_1: int) -> None:
    if sd.m < k_plus_1:
        raise ConfigError(
            f"need at least {k_plus_1} eigenvalues, have {sd.m}")


def f_l(sd: SpectralData, k: int) -> float:
    """Sum of the K smallest eigenvalues."""
    _need(sd, k + 1)
    return float(sd.eigenvalues[:k].sum())


def f_u(sd: SpectralData, k: int) -> float:
    """lambda_{K+1} minus the K smallest eigenvalues' sum."""
    _need(sd, k + 1)
    return float(sd.eigenvalues[k] - sd.eigenvalues[:k].sum())


def f_e(sd: SpectralData, k: int) -> float:
    """K-th eigengap lambda_{K+1} - lambda_K."""
    _need(sd, k + 1)
    return float(sd.eigenvalues[k] - sd.eigenvalues[k - 1])


@dataclass(frozen=True)
class Clustering:
    """Partition of nodes into K labeled clusters."""

    labels: np.ndarray
    k: int

    @classmethod
    def from_labels(cls, labels, k: int | None = None) -> "Clustering":
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ConfigError("labels must be a 1-d array")
        if k is None:
            k = int(labels.max()) + 1 if len(labels) else 0
        if labels.min(initial=0) < 0 or labels.max(initial=-1) >= k:
            raise ConfigError(f"labels must lie in [0, {k})")
        sizes = np.bincount(labels, minlength=k)
        if np.any(sizes == 0):
            raise ConfigError(f"cluster {int(np.flatnonzero(sizes == 0)[0])} is empty")
        return cls(labels=labels, k=k)

    @property
    def n(self) -> int:
        return len(self.labels)

    def restricted(self, node_ids: np.ndarray) -> np.ndarray:
        """Raw label array on a node subset (clusters may come up empty)."""
        return self.labels[node_ids]


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
            continue
        probs = d2 / total
        centers[j] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _kmeans_single(x: np.ndarray, k: int, rng: np.random.Generator,
                   max_iter: int) -> tuple[np.ndarray, float]:
    centers = _kmeans_pp_init(x, k, rng)
    labels = None
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        # revive empty clusters with the currently worst-fit points
        for kk in range(k):
            if not np.any(new_labels == kk):
                worst = d2[np.arange(len(x)), new_labels].argmax()
                new_labels[worst] = kk
                d2[worst, :] = 0.0
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for kk in range(k):
            centers[kk] = x[labels == kk].mean(axis=0)
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    inertia = float(d2[np.arange(len(x)), labels].sum())
    return labels, inertia


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator, restarts: int = 20,
           max_iter: int = 300) -> np.ndarray:
    """Deterministic k-means: k-means++ seeding, best inertia over restarts.

    Restart seeds are pre-derived from the supplied generator, so the result
    does not depend on evaluation order; ties in inertia break toward the
    lowest restart index.
    """
    if len(x) < k:
        raise ConfigError(f"cannot form {k} clusters from {len(x)} points")
    seeds = rng.integers(0, 2**63 - 1, size=restarts)
    best_labels, best_inertia = None, np.inf
    for seed in seeds:
        labels, inertia = _kmeans_single(x, k, np.random.default_rng(int(seed)), max_iter)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    if best_labels is None or len(np.unique(best_labels)) < k:
        raise NumericalError(f"k-means failed to produce {k} non-empty clusters")
    return best_labels


def spectral_clustering(lap: Laplacian, k: int, rng,
                        restarts: int = 20, max_iter: int = 300,
                        reseed_limit: int = 3) -> Clustering:
    """Row-normalized spectral embedding of the K smallest eigenvectors +
    k-means.

    Zero embedding rows are left at zero.  If k-means degenerates (an empty
    cluster surviving every restart) the whole procedure reseeds up to
    ``reseed_limit`` times before raising.
    """
    if k < 2:
        raise ConfigError("spectral clustering needs K >= 2")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    sd = eigs_smallest(lap, k)
    emb = sd.eigenvectors.copy()
    norms = np.linalg.norm(emb, axis=1)
    pos = norms > 0
    emb[pos] /= norms[pos, None]
    last_err: Exception | None = None
    for _ in range(reseed_limit):
        try:
            labels = kmeans(emb, k, rng, restarts=restarts, max_iter=max_iter)
            return Clustering.from_labels(labels, k)
        except NumericalError as exc:
            last_err = exc
    raise NumericalError(f"spectral clustering degenerate after {reseed_limit} "
                         f"reseeds: {last_err}")


def misclassification(a, b) -> float:
    """Minimum disagreement fraction over bijections of cluster labels.

    Solved exactly by maximum-agreement assignment on the confusion matrix;
    unequal label counts are padded with empty clusters.  Accepts
    :class:`Clustering` or raw label arrays.
    """
    la = np.asarray(getattr(a, "labels", a), dtype=np.int64)
    lb = np.asarray(getattr(b, "labels", b), dtype=np.int64)
    if la.shape != lb.shape:
        raise ConfigError(f"clusterings cover {la.shape} vs {lb.shape} nodes")
    n = len(la)
    if n == 0:
        return 0.0
    k = int(max(la.max(), lb.max())) + 1
    confusion = np.zeros((k, k))
    np.add.at(confusion, (la, lb), 1.0)
    rows, cols = linear_sum_assignment(-confusion)
    agree = confusion[rows, cols].sum()
    return float(1.0 - agree / n)
