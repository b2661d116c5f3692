"""Sparse estimator of the trunc-log random-walk matrix.

Work per undirected edge e = (u, v):

1. draw ``n_e = floor(M/m) + Bernoulli(frac(M/m))`` so the expected total
   draw count is exactly M;
2. per draw, flip a coin against ``p_e = min(1, C (1/d_u + 1/d_v))`` and, if
   kept, pick a walk length ``r`` from the coefficient distribution, split it
   uniformly around the edge, walk both sides, and accumulate weight
   ``1/p_e`` at the canonical endpoint pair.

Every random value is a pure function of (seed, edge index, draw index,
slot), so the aggregated table is identical for any thread count or batch
size.  Aggregation is exact fixed-point integer arithmetic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph, random_walk
from .hashtable import FIXED_POINT_SCALE, SparsifierTable
from .parallel import chunk_ranges, resolve_threads
from .rng import (
    STREAM_EDGE_COUNT,
    STREAM_SAMPLING,
    hash_arrays,
    u32_from_bits,
    uniform_from_bits,
)

# Per-draw slot layout inside STREAM_SAMPLING.  Walk steps for the two
# endpoints occupy disjoint slot ranges of length T - 1 each.
SLOT_COIN = 0
SLOT_LENGTH = 1
SLOT_SPLIT = 2
SLOT_WALK = 3

_MAX_BATCH_DRAWS = 1 << 21


@dataclass(frozen=True)
class SamplingParams:
    """Knobs of the sampling stage.  ``C=None`` means ln(n) at use;
    ``C=inf`` disables downsampling (every coin is kept)."""

    M: int
    T: int = 10
    s_coeffs: tuple[float, ...] | None = None
    C: float | None = None
    b: float = 1.0
    seed: int = 0
    capacity_multiplier: float = 2.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.b <= 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if self.C is not None and not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.capacity_multiplier < 1:
            raise ValueError("capacity_multiplier must be >= 1")
        coeffs = self.s_coeffs
        if coeffs is None:
            coeffs = (1.0 / self.T,) * self.T
            object.__setattr__(self, "s_coeffs", coeffs)
        else:
            coeffs = tuple(float(c) for c in coeffs)
            object.__setattr__(self, "s_coeffs", coeffs)
        if len(coeffs) != self.T:
            raise ValueError(f"need {self.T} coefficients, got {len(coeffs)}")
        if any(c < 0 for c in coeffs):
            raise ValueError("coefficients must be non-negative")
        if abs(sum(coeffs) - 1.0) > 1e-9:
            raise ValueError(f"coefficients must sum to 1, got {sum(coeffs)}")

    def resolve_C(self, n: int) -> float:
        return math.log(n) if self.C is None else self.C


def downsample_prob(g: Graph, u: int, v: int, C: float) -> float:
    """Per-edge keep probability min(1, C (1/d_u + 1/d_v))."""
    row = g.neighbors(u)
    at = np.searchsorted(row, v)
    if at >= len(row) or row[at] != v:
        raise ValueError(f"({u}, {v}) is not an edge")
    return min(1.0, C * (1.0 / g.degrees[u] + 1.0 / g.degrees[v]))


def path_sample(g: Graph, u: int, v: int, r: int, rng) -> tuple[int, int]:
    """Walk endpoints after splitting r around edge (u, v).

    Draws the split s uniformly from {0..r-1}, then walks u for s steps and
    v for r-1-s steps, all from ``rng``.  Endpoints may coincide.
    """
    if r < 1:
        raise ValueError(f"walk length must be >= 1, got {r}")
    s = rng.next_u32() % r
    u2 = random_walk(g, u, s, rng)
    v2 = random_walk(g, v, r - 1 - s, rng)
    return u2, v2


def _edge_probs(g: Graph, C: float) -> tuple[np.ndarray, np.ndarray]:
    edges = g.edge_array()
    deg = g.degrees
    pe = np.minimum(1.0, C * (1.0 / deg[edges[:, 0]] + 1.0 / deg[edges[:, 1]]))
    wfp = np.rint(FIXED_POINT_SCALE / pe).astype(np.int64)
    return pe, wfp


def _walk_batch(
    indptr: np.ndarray,
    indices: np.ndarray,
    degrees: np.ndarray,
    cur: np.ndarray,
    nsteps: np.ndarray,
    seed: int,
    e_of: np.ndarray,
    j_of: np.ndarray,
    slot_base: int,
) -> np.ndarray:
    t = 0
    while True:
        active = nsteps > t
        if not active.any():
            return cur
        bits = hash_arrays(seed, STREAM_SAMPLING, e_of[active], j_of[active], slot_base + t)
        at = cur[active]
        pick = u32_from_bits(bits) % degrees[at].astype(np.uint64)
        cur[active] = indices[indptr[at] + pick.astype(np.int64)]
        t += 1


def _sample_edge_range(g: Graph, p: SamplingParams, pe, wfp, lo: int, hi: int):
    """Aggregate contributions for edges [lo, hi); returns sorted unique keys,
    fixed-point sums, and (draws, kept) counters."""
    edges = g.edge_array()
    indptr, indices = g.csr()
    degrees = g.degrees
    m = g.m
    n_base, frac = divmod(p.M, m)
    frac = frac / m
    cum = np.cumsum(np.asarray(p.s_coeffs, dtype=np.float64))
    cum[-1] = 1.0

    key_parts: list[np.ndarray] = []
    sum_parts: list[np.ndarray] = []
    draws = kept = 0
    batch_edges = max(1, _MAX_BATCH_DRAWS // max(1, n_base + 1))
    for blo in range(lo, hi, batch_edges):
        bhi = min(blo + batch_edges, hi)
        e = np.arange(blo, bhi, dtype=np.int64)
        u_ne = uniform_from_bits(hash_arrays(p.seed, STREAM_EDGE_COUNT, e))
        n_e = n_base + (u_ne < frac).astype(np.int64)
        total = int(n_e.sum())
        draws += total
        if total == 0:
            continue
        e_of = np.repeat(e, n_e)
        start = np.concatenate(([0], np.cumsum(n_e)[:-1]))
        j_of = np.arange(total, dtype=np.int64) - np.repeat(start, n_e)

        coin = uniform_from_bits(hash_arrays(p.seed, STREAM_SAMPLING, e_of, j_of, SLOT_COIN))
        u_r = uniform_from_bits(hash_arrays(p.seed, STREAM_SAMPLING, e_of, j_of, SLOT_LENGTH))
        keep = coin < pe[e_of]
        if not keep.any():
            continue
        e_of, j_of, u_r = e_of[keep], j_of[keep], u_r[keep]
        kept += len(e_of)
        r = np.searchsorted(cum, u_r, side="right").astype(np.int64) + 1
        split_bits = hash_arrays(p.seed, STREAM_SAMPLING, e_of, j_of, SLOT_SPLIT)
        s = (u32_from_bits(split_bits) % r.astype(np.uint64)).astype(np.int64)

        ends_u = _walk_batch(
            indptr, indices, degrees,
            edges[e_of, 0].astype(np.int64), s,
            p.seed, e_of, j_of, SLOT_WALK,
        )
        ends_v = _walk_batch(
            indptr, indices, degrees,
            edges[e_of, 1].astype(np.int64), r - 1 - s,
            p.seed, e_of, j_of, SLOT_WALK + (p.T - 1),
        )
        a = np.minimum(ends_u, ends_v).astype(np.uint64)
        b = np.maximum(ends_u, ends_v).astype(np.uint64)
        keys = (a << np.uint64(32)) | b
        uniq, inv = np.unique(keys, return_inverse=True)
        sums = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(sums, inv, wfp[e_of])
        key_parts.append(uniq)
        sum_parts.append(sums)

    if not key_parts:
        return np.empty(0, np.uint64), np.empty(0, np.int64), draws, kept
    keys, sums = _merge_contributions(key_parts, sum_parts)
    return keys, sums, draws, kept


def _merge_contributions(key_parts, sum_parts):
    keys = np.concatenate(key_parts)
    sums = np.concatenate(sum_parts)
    uniq, inv = np.unique(keys, return_inverse=True)
    out = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(out, inv, sums)
    return uniq, out


def sample_sparsifier(
    g: Graph, p: SamplingParams, threads: int | None = None
) -> SparsifierTable:
    """Run the downsampled per-edge sampler and aggregate into a table.

    The table (layout included) is identical for any thread count given the
    same seed.  ``table.stats`` records draw counters for reporting.
    """
    if g.m == 0:
        raise ValueError("graph has no edges")
    threads = resolve_threads(threads)
    C = p.resolve_C(g.n)
    pe, wfp = _edge_probs(g, C)

    ranges = chunk_ranges(g.m, threads)
    if len(ranges) == 1:
        results = [_sample_edge_range(g, p, pe, wfp, *ranges[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_sample_edge_range, g, p, pe, wfp, lo, hi)
                for lo, hi in ranges
            ]
            results = [f.result() for f in futures]

    keys, sums = _merge_contributions(
        [r[0] for r in results], [r[1] for r in results]
    )
    draws = sum(r[2] for r in results)
    kept = sum(r[3] for r in results)

    possible = g.n * (g.n + 1) // 2
    table = SparsifierTable.for_expected_entries(
        min(p.M, possible), multiplier=p.capacity_multiplier
    )
    table.merge_unique(keys, sums)
    table.stats = {"draws": int(draws), "kept": int(kept), "distinct": int(table.count)}
    return table


def assemble_netmf(
    table: SparsifierTable, g: Graph, p: SamplingParams, apply_log: bool = True
) -> sp.csr_matrix:
    """Turn aggregated pair weights into the symmetric CSR estimator.

    Each canonical pair with aggregate weight W maps to
    ``raw = vol * m / (b * M) * W / (d_u * d_v)``; diagonal aggregates are
    doubled first because an unordered off-diagonal key absorbs both
    orientations of its ordered pair while a diagonal key has only one.
    With ``apply_log`` the truncated logarithm max(0, ln raw) is applied and
    zero entries dropped.
    """
    keys, fp = table.items_sorted()
    u = (keys >> np.uint64(32)).astype(np.int64)
    v = (keys & np.uint64(0xFFFFFFFF)).astype(np.int64)
    w = fp.astype(np.float64) / FIXED_POINT_SCALE
    w = np.where(u == v, 2.0 * w, w)
    deg = g.degrees.astype(np.float64)
    raw = (g.vol * g.m / (p.b * p.M)) * w / (deg[u] * deg[v])
    if apply_log:
        values = np.where(raw > 1.0, np.log(np.maximum(raw, 1e-300)), 0.0)
    else:
        values = raw
    keep = values > 0
    u, v, values = u[keep], v[keep], values[keep]

    off = u != v
    rows = np.concatenate([u, v[off]])
    cols = np.concatenate([v, u[off]])
    vals = np.concatenate([values, values[off]]).astype(np.float32)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(g.n, g.n)).tocsr()
    mat.sort_indices()
    return mat
