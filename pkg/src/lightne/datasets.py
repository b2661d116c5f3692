"""Seeded benchmark graph generators, label handling, and task splits.

Desk-scale acceptance runs generate their own stochastic-block-model and
Erdos-Renyi inputs, so nothing needs to be downloaded.  All generators are
driven by the counter-based streams and are pure functions of their seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .graph import EdgeList, Graph, build_graph, normalize_edges
from .rng import STREAM_CORRUPT, STREAM_GRAPH_GEN, STREAM_SPLIT, hash_arrays, uniform_from_bits


def erdos_renyi_graph(n: int, prob: float, seed: int, compress: bool = False) -> Graph:
    """G(n, p): each of the n(n-1)/2 pairs kept independently. n <= ~4000."""
    iu, iv = np.triu_indices(n, k=1)
    pair_id = np.arange(len(iu), dtype=np.int64)
    u = uniform_from_bits(hash_arrays(seed, STREAM_GRAPH_GEN, pair_id))
    keep = u < prob
    edges = np.stack([iu[keep], iv[keep]], axis=1)
    return build_graph(normalize_edges(edges, n_hint=n), compress=compress)


def sbm_graph(
    n_blocks: int,
    block_size: int,
    p_in: float,
    p_out: float,
    seed: int,
    compress: bool = False,
) -> tuple[Graph, list[list[int]]]:
    """Equal-block stochastic block model plus per-vertex block labels."""
    n = n_blocks * block_size
    iu, iv = np.triu_indices(n, k=1)
    pair_id = np.arange(len(iu), dtype=np.int64)
    u = uniform_from_bits(hash_arrays(seed, STREAM_GRAPH_GEN, pair_id))
    same = (iu // block_size) == (iv // block_size)
    keep = u < np.where(same, p_in, p_out)
    edges = np.stack([iu[keep], iv[keep]], axis=1)
    g = build_graph(normalize_edges(edges, n_hint=n), compress=compress)
    labels = [[int(i // block_size)] for i in range(n)]
    return g, labels


def random_graph_edges(n: int, target_m: int, seed: int) -> EdgeList:
    """About target_m distinct random edges; usable up to n ~ 1e5."""
    draws = int(target_m * 1.3) + 8
    i = np.arange(draws, dtype=np.int64)
    a = hash_arrays(seed, STREAM_GRAPH_GEN, i, 0) % np.uint64(n)
    b = hash_arrays(seed, STREAM_GRAPH_GEN, i, 1) % np.uint64(n)
    pairs = np.stack([a, b], axis=1).astype(np.int64)
    return normalize_edges(pairs, n_hint=n)


def is_connected(g: Graph) -> bool:
    import scipy.sparse.csgraph as csgraph

    if g.n == 0:
        return True
    ncomp, _ = csgraph.connected_components(g.adjacency_csr_matrix(), directed=False)
    return ncomp == 1


def random_connected_graph(n: int, prob: float, seed: int, max_tries: int = 64) -> Graph:
    """First connected G(n, p) along the seed sequence."""
    for k in range(max_tries):
        g = erdos_renyi_graph(n, prob, seed + k)
        if g.n == n and is_connected(g):
            return g
    raise RuntimeError(f"no connected graph in {max_tries} tries (n={n}, p={prob})")


# ---------------------------------------------------------------------------
# labels


@dataclass
class LabeledNodes:
    """Per-vertex label-id sets; multi-label allowed.

    ``labels[i]`` lists the label ids of vertex i (possibly empty).  Label
    ids must be dense 0..n_labels-1.
    """

    labels: list[list[int]]
    n_labels: int

    def __post_init__(self):
        seen = sorted({l for row in self.labels for l in row})
        if seen and (seen[0] < 0 or seen[-1] >= self.n_labels):
            raise ValueError("label ids must fall in 0..n_labels-1")

    @classmethod
    def from_lists(cls, labels: list[list[int]]) -> "LabeledNodes":
        n_labels = 1 + max((l for row in labels for l in row), default=-1)
        return cls(labels=[sorted(set(r)) for r in labels], n_labels=n_labels)

    def labeled_vertices(self) -> np.ndarray:
        return np.array([i for i, row in enumerate(self.labels) if row], dtype=np.int64)

    def multihot(self, vertices: np.ndarray) -> np.ndarray:
        out = np.zeros((len(vertices), self.n_labels), dtype=np.float64)
        for row, v in enumerate(vertices):
            out[row, self.labels[int(v)]] = 1.0
        return out


def load_labels(path, n: int) -> LabeledNodes:
    """Read "node_id label_id" lines; repeated node ids mean multi-label."""
    labels: list[list[int]] = [[] for _ in range(n)]
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected two fields")
            try:
                node, label = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer field")
            if not 0 <= node < n:
                raise FormatError(f"{path}:{lineno}: node {node} out of range")
            if label < 0:
                raise FormatError(f"{path}:{lineno}: negative label id")
            labels[node].append(label)
    return LabeledNodes.from_lists(labels)


def save_labels(labeled: LabeledNodes, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node, row in enumerate(labeled.labels):
            for label in row:
                fh.write(f"{node} {label}\n")


def split_train_test(
    vertices: np.ndarray, train_ratio: float, seed: int, repeat: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint train/test split of the given vertices, seeded per repeat."""
    if not 0 < train_ratio < 1:
        raise ValueError(f"train_ratio must be in (0, 1), got {train_ratio}")
    vertices = np.asarray(vertices, dtype=np.int64)
    order = np.argsort(
        hash_arrays(seed, STREAM_SPLIT, repeat, vertices), kind="stable"
    )
    n_train = max(1, int(round(train_ratio * len(vertices))))
    n_train = min(n_train, len(vertices) - 1)
    shuffled = vertices[order]
    return np.sort(shuffled[:n_train]), np.sort(shuffled[n_train:])


# ---------------------------------------------------------------------------
# link prediction split


@dataclass
class LinkPredSplit:
    """Held-out positives plus the residual graph they were removed from."""

    positives: np.ndarray  # (k, 2) uint32 canonical pairs
    residual: Graph
    n_negatives: int
    seed: int


def make_linkpred_split(
    g: Graph, holdout_fraction: float, n_negatives: int, seed: int
) -> LinkPredSplit:
    """Remove a seeded random fraction of edges (at least one) for ranking."""
    if not 0 < holdout_fraction < 1:
        raise ValueError("holdout_fraction must be in (0, 1)")
    edges = g.edge_array()
    n_hold = max(1, int(round(holdout_fraction * g.m)))
    if n_hold >= g.m:
        raise ValueError("holdout would remove every edge")
    order = np.argsort(
        hash_arrays(seed, STREAM_CORRUPT, 0, np.arange(g.m, dtype=np.int64)),
        kind="stable",
    )
    held = np.sort(order[:n_hold])
    mask = np.ones(g.m, dtype=bool)
    mask[held] = False
    residual = build_graph(
        EdgeList(edges=edges[mask], n=g.n), compress=g.compressed
    )
    return LinkPredSplit(
        positives=edges[held].copy(),
        residual=residual,
        n_negatives=n_negatives,
        seed=seed,
    )
