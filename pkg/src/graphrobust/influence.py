"""Weighted cut, analytic influence functions, and the finite-difference oracle.

The influence function of a graph property f under a perturbation scheme is
the partial derivative of f with respect to one node weight, evaluated at the
all-ones weight vector.  Positive WCut influence marks a node whose
up-weighting worsens the clustering (a badly clustered node); cluster
influences always sum to zero under the asymmetric scheme.

Closed forms implemented here (validated against central finite differences):

* asymmetric WCut:   IF_t = (d_t D_kk - d_tk D_k) / D_k^2    for t in cluster k
* symmetric WCut:    sum over other clusters of D_kk d_kt / D_k^2, minus the
  own-cluster correction ((d_tk0 + d_k0t) D_k0 - D_k0k0 (d_t + d_k0t)) / D_k0^2
* symmetric eigenvalue (simple lambda_k, undirected graph):
  IF_t = (1 - lambda_k) (sum_i v_i^2 P_it - v_t^2) with P = D^{-1} A
* composites for f_l, f_u, f_e as the matching linear combinations.

The symmetric WCut form is a re-derivation; the published display sums over a
mistyped index and mixes two cross-mass symbols, so correctness is gated on
the finite-difference oracle rather than the typeset equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, GraphStructureError, MultiplicityError,
                     NumericalError)
from .graph import Graph, connected_components, laplacian
from .perturb import SCHEMES, perturb
from .spectral import Clustering, SpectralData, eigs_smallest

EIGENGAP_RTOL = 1e-8  # relative to the [0, 2] Laplacian norm bound


@dataclass(frozen=True)
class ClusterAggregates:
    """Cluster-level masses used by WCut and its influence functions.

    d_out[t, k] is the out-mass of node t into cluster k, d_in[t, k] the
    in-mass of cluster k into t; volume[k] is the summed out-degree D_k and
    within[k] the internal mass D_kk.  cross_out[k] = D_k - D_kk.
    """

    volume: np.ndarray
    within: np.ndarray
    d_out: np.ndarray
    d_in: np.ndarray

    @property
    def cross_out(self) -> np.ndarray:
        return self.volume - self.within


def cluster_aggregates(g, clustering: Clustering) -> ClusterAggregates:
    """Aggregate masses of a (possibly perturbed) graph under a clustering."""
    labels = clustering.labels
    if len(labels) != g.n:
        raise ConfigError(f"clustering covers {len(labels)} nodes, graph has {g.n}")
    k = clustering.k
    onehot = np.zeros((g.n, k))
    onehot[np.arange(g.n), labels] = 1.0
    adj = g.adjacency()
    d_out = adj @ onehot
    d_in = adj.T @ onehot
    volume = onehot.T @ np.asarray(g.out_degrees, dtype=float)
    within = np.array([d_out[labels == kk, kk].sum() for kk in range(k)])
    return ClusterAggregates(volume=volume, within=within, d_out=d_out, d_in=d_in)


def wcut(g, clustering: Clustering) -> float:
    """Weighted cut sum_k (1 - D_kk / D_k); in [0, K], small = well separated."""
    agg = cluster_aggregates(g, clustering)
    if np.any(agg.volume <= 0):
        kk = int(np.flatnonzero(agg.volume <= 0)[0])
        raise ConfigError(f"cluster {kk} has zero volume")
    return float(np.sum(1.0 - agg.within / agg.volume))


@dataclass(frozen=True)
class InfluenceVector:
    """Per-node influence values for one property/scheme combination."""

    values: np.ndarray
    property_tag: str

    def __len__(self) -> int:
        return len(self.values)

    def rows(self):
        for i, v in enumerate(self.values):
            yield i, float(v), self.property_tag


def if_wcut_asymmetric(g: Graph, clustering: Clustering) -> InfluenceVector:
    """WCut influence under the asymmetric scheme (cluster-local closed form)."""
    agg = cluster_aggregates(g, clustering)
    if np.any(agg.volume <= 0):
        raise ConfigError("zero-volume cluster")
    lab = clustering.labels
    d = np.asarray(g.out_degrees, dtype=float)
    dtk = agg.d_out[np.arange(g.n), lab]
    vol = agg.volume[lab]
    within = agg.within[lab]
    vals = (d * within - dtk * vol) / vol**2
    return InfluenceVector(values=vals, property_tag="wcut-asymmetric")


def if_wcut_symmetric(g: Graph, clustering: Clustering) -> InfluenceVector:
    """WCut influence under the symmetric scheme (all-cluster closed form)."""
    agg = cluster_aggregates(g, clustering)
    if np.any(agg.volume <= 0):
        raise ConfigError("zero-volume cluster")
    lab = clustering.labels
    d = np.asarray(g.out_degrees, dtype=float)
    coeff = agg.within / agg.volume**2
    term_all = agg.d_in @ coeff  # includes own cluster, removed next
    idx = np.arange(g.n)
    d_in_own = agg.d_in[idx, lab]
    d_out_own = agg.d_out[idx, lab]
    vol = agg.volume[lab]
    within = agg.within[lab]
    own_part = coeff[lab] * d_in_own
    correction = ((d_out_own + d_in_own) * vol - within * (d + d_in_own)) / vol**2
    vals = term_all - own_part - correction
    return InfluenceVector(values=vals, property_tag="wcut-symmetric")


def _require_undirected(g: Graph, what: str) -> None:
    if g.directed:
        raise GraphStructureError(f"{what} is defined for undirected graphs only")


def _structural_zero_count(g: Graph) -> int:
    count, _ = connected_components(g)
    return count


def _check_simple(sd: SpectralData, k: int, n: int) -> None:
    """Require eigenvalue k (1-based) to be numerically simple.

    Checks the gap to the lower neighbor, and to the upper neighbor when that
    eigenvalue was computed (callers wanting the full guard should request
    k + 1 eigenpairs).
    """
    lam = sd.eigenvalue(k)
    gap_tol = EIGENGAP_RTOL * 2.0
    if k > 1:
        gap = lam - sd.eigenvalue(k - 1)
        if gap <= gap_tol:
            raise MultiplicityError(
                f"eigenvalue {k} ({lam:.6g}) is within {gap:.3e} of its lower "
                "neighbor; derivative undefined")
    if k < n and sd.m >= k + 1:
        gap = sd.eigenvalue(k + 1) - lam
        if gap <= gap_tol:
            raise MultiplicityError(
                f"eigenvalue {k} ({lam:.6g}) is within {gap:.3e} of its upper "
                "neighbor; derivative undefined")


def if_eigenvalue_symmetric(g: Graph, sd: SpectralData, k: int) -> InfluenceVector:
    """Derivative of the k-th smallest eigenvalue under symmetric perturbation.

    k is 1-based.  Structural zero eigenvalues (one per connected component)
    have identically zero influence: components cannot be joined by the
    scheme, so their zeros persist exactly.  This covers the multiplicity of
    eigenvalue 0 on disconnected graphs; all other eigenvalues must be simple.
    """
    _require_undirected(g, "eigenvalue influence")
    zeros = _structural_zero_count(g)
    if k <= zeros:
        return InfluenceVector(values=np.zeros(g.n), property_tag=f"lambda_{k}-symmetric")
    _check_simple(sd, k, g.n)
    lam = sd.eigenvalue(k)
    v = sd.eigenvector(k)
    d = np.asarray(g.out_degrees, dtype=float)
    weighted = v**2 / d
    u = g.adjacency().T @ weighted  # u_t = sum_i v_i^2 P_it
    vals = (1.0 - lam) * (u - v**2)
    return InfluenceVector(values=vals, property_tag=f"lambda_{k}-symmetric")


@dataclass(frozen=True)
class AsymmetricZeroCheck:
    """Finite-difference audit of Prop.-style eigenvalue flatness."""

    k: int
    magnitudes: np.ndarray
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.magnitudes <= self.tolerance))


def if_eigenvalue_asymmetric_is_zero(g: Graph, k: int, h: float = 1e-5,
                                     tolerance: float = 1e-6) -> AsymmetricZeroCheck:
    """Verify that asymmetric perturbation leaves eigenvalue k flat at w = 1.

    Returns the per-node central finite-difference magnitudes and asserts all
    are below tolerance; raises naming an offending node otherwise.
    """
    _require_undirected(g, "asymmetric eigenvalue check")
    zeros = _structural_zero_count(g)
    sd = eigs_smallest(laplacian(g), min(k + 1, g.n))
    if k > zeros:
        _check_simple(sd, k, g.n)

    def prop(pg) -> float:
        return eigs_smallest(laplacian(pg), k).eigenvalue(k)

    mags = np.array([abs(finite_difference_if(g, prop, "asymmetric", t, h))
                     for t in range(g.n)])
    if np.any(mags > tolerance):
        t = int(mags.argmax())
        raise NumericalError(
            f"asymmetric eigenvalue derivative at node {t} is {mags[t]:.3e} "
            f"> {tolerance:g}")
    return AsymmetricZeroCheck(k=k, magnitudes=mags, tolerance=tolerance)


COMPOSITE_PROPERTIES = ("f_l", "f_u", "f_e")


def if_composite(g: Graph, sd: SpectralData, k: int, which: str) -> InfluenceVector:
    """Influence of f_l, f_u, or f_e at cluster count K under the symmetric scheme."""
    if which not in COMPOSITE_PROPERTIES:
        raise ConfigError(f"unknown composite property {which!r}")
    if sd.m < k + 1:
        raise ConfigError(f"composite IF at K={k} needs {k + 1} eigenpairs, have {sd.m}")
    derivs = {}
    needed = range(1, k + 2) if which != "f_e" else (k, k + 1)
    for idx in needed:
        derivs[idx] = if_eigenvalue_symmetric(g, sd, idx).values
    if which == "f_l":
        vals = sum(derivs[i] for i in range(1, k + 1))
    elif which == "f_u":
        vals = derivs[k + 1] - sum(derivs[i] for i in range(1, k + 1))
    else:
        vals = derivs[k + 1] - derivs[k]
    return InfluenceVector(values=np.asarray(vals, dtype=float),
                           property_tag=f"{which}(K={k})-symmetric")


def finite_difference_if(g: Graph, prop, scheme: str, t: int, h: float = 1e-5) -> float:
    """Central difference (f(1 + h e_t) - f(1 - h e_t)) / (2h).

    ``prop`` maps a perturbed graph to a float.  Independent oracle for every
    analytic influence formula above.
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown perturbation scheme {scheme!r}")
    if h <= 0:
        raise ConfigError("finite-difference step must be positive")
    if not 0 <= t < g.n:
        raise ConfigError(f"node {t} out of range")
    up = np.ones(g.n)
    up[t] += h
    down = np.ones(g.n)
    down[t] -= h
    f_up = prop(perturb(g, up, scheme))
    f_down = prop(perturb(g, down, scheme))
    return (f_up - f_down) / (2.0 * h)


def bad_influence_nodes(g: Graph, k: int, m: int | None = None) -> np.ndarray:
    """Nodes hurting the K-component/eigengap structure under the symmetric
    scheme: IF^{f_u} < 0 or IF^{f_l} > 0 or IF^{f_e} < 0."""
    sd = eigs_smallest(laplacian(g), m or min(g.n, k + 1))
    fl = if_composite(g, sd, k, "f_l").values
    fu = if_composite(g, sd, k, "f_u").values
    fe = if_composite(g, sd, k, "f_e").values
    mask = (fu < 0) | (fl > 0) | (fe < 0)
    return np.flatnonzero(mask)
