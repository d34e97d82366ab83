"""Edge-list and label-file ingestion with id remapping, plus export.

Edge files are whitespace-separated ``u v [weight]`` lines; ``#`` starts a
comment.  Node tokens may be arbitrary strings; they are remapped to dense
ids [0, n) in order of first appearance and the mapping is returned (and
written as a sidecar by the CLI).  Label files are ``node_id cluster_id``
lines using the original tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .graph import Graph, build_graph
from .spectral import Clustering


@dataclass(frozen=True)
class IngestedGraph:
    graph: Graph
    id_map: dict[str, int]

    @property
    def reverse_map(self) -> list[str]:
        out = [""] * len(self.id_map)
        for token, idx in self.id_map.items():
            out[idx] = token
        return out


def _parse_lines(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            yield lineno, line.split()


def ingest_edge_list(path: str | Path, directed: bool) -> IngestedGraph:
    """Parse an edge list into a Graph with contiguous remapped ids."""
    id_map: dict[str, int] = {}
    rows = []
    for lineno, parts in _parse_lines(path):
        if len(parts) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 'u v [weight]', got {len(parts)} fields")
        u, v = parts[0], parts[1]
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed weight {parts[2]!r}") from None
            if not np.isfinite(w):
                raise DataError(f"{path}:{lineno}: non-finite weight")
            if w < 0:
                raise DataError(f"{path}:{lineno}: negative weight {w}")
        else:
            w = 1.0
        for token in (u, v):
            if token not in id_map:
                id_map[token] = len(id_map)
        if u == v:
            raise DataError(f"{path}:{lineno}: self-loop on {u!r}")
        rows.append((id_map[u], id_map[v], w))
    if not rows:
        raise DataError(f"{path}: no edges found")
    try:
        graph = build_graph(rows, directed=directed, n=len(id_map))
    except Exception as exc:
        raise DataError(f"{path}: {exc}") from exc
    return IngestedGraph(graph=graph, id_map=id_map)


def ingest_labels(path: str | Path, id_map: dict[str, int]) -> Clustering:
    """Parse node labels into a Clustering over the mapped ids.

    Every mapped node must be labeled exactly once; cluster tokens are
    remapped to [0, K) in order of first appearance.
    """
    n = len(id_map)
    labels = np.full(n, -1, dtype=np.int64)
    cluster_ids: dict[str, int] = {}
    seen_tokens: dict[str, str] = {}
    for lineno, parts in _parse_lines(path):
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'node_id cluster_id'")
        token, cluster = parts
        if token not in id_map:
            raise DataError(f"{path}:{lineno}: unknown node id {token!r}")
        if token in seen_tokens:
            if seen_tokens[token] != cluster:
                raise DataError(
                    f"{path}:{lineno}: node {token!r} labeled both "
                    f"{seen_tokens[token]!r} and {cluster!r}")
            continue
        seen_tokens[token] = cluster
        if cluster not in cluster_ids:
            cluster_ids[cluster] = len(cluster_ids)
        labels[id_map[token]] = cluster_ids[cluster]
    missing = np.flatnonzero(labels < 0)
    if len(missing):
        rev = [""] * n
        for tok, idx in id_map.items():
            rev[idx] = tok
        names = ", ".join(repr(rev[i]) for i in missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise DataError(f"{path}: unlabeled nodes: {names}{more}")
    return Clustering.from_labels(labels, len(cluster_ids))


def export_edge_list(graph: Graph, path: str | Path) -> None:
    """Write internal-id edges, one undirected pair (or directed arc) per line."""
    with open(path, "w", encoding="utf-8") as fh:
        if graph.directed:
            for i, j, w in zip(graph.src, graph.dst, graph.weight):
                fh.write(f"{int(i)} {int(j)} {float(w)!r}\n")
        else:
            for i, j, w in graph.undirected_pairs():
                fh.write(f"{int(i)} {int(j)} {float(w)!r}\n")


def export_labels(clustering: Clustering, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node, label in enumerate(clustering.labels):
            fh.write(f"{node} {int(label)}\n")


def write_id_map(ig: IngestedGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ig.id_map, fh, indent=0, sort_keys=True)
        fh.write("\n")
