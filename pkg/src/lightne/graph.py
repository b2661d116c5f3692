"""Immutable undirected graph in CSR form with optional block compression.

Neighbor lists are stored sorted ascending.  The compressed layout follows
the parallel-byte idea: each vertex's list is cut into blocks of at most
``BLOCK_SIZE`` neighbors, every block difference-encoded independently so a
single block can be decoded without touching the rest of the list.  Per
vertex the payload is::

    u32 degree | u32 rel_offset[n_blocks] | block bytes...

where ``rel_offset[b]`` is the byte offset of block ``b`` from the start of
this vertex's block data.  Within a block the first neighbor is stored as
zigzag(neighbor - source) and the rest as plain deltas (always >= 1), both
as little-endian base-128 varints (7 data bits per byte, high bit set on
continuation bytes).

Graphs are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ResourceError
from .parallel import chunk_ranges, resolve_threads

BLOCK_SIZE = 64
MAX_VERTEX_ID = 2**32 - 2  # top id is reserved as a sentinel elsewhere

GRAPH_MAGIC = b"LNE2GRPH"
GRAPH_VERSION = 1
_HEADER = struct.Struct("<8sIBQQ")  # magic, version, compression flag, n, m


@dataclass(frozen=True)
class EdgeList:
    """Deduplicated, loop-free undirected edges.

    ``edges`` is a (k, 2) uint32 array with ``u < v`` per row, sorted
    lexicographically.  Row order defines the canonical edge index used to
    key per-edge random streams.
    """

    edges: np.ndarray
    n: int

    def __len__(self) -> int:
        return len(self.edges)


def normalize_edges(raw, n_hint: int | None = None, remap: bool = False) -> EdgeList:
    """Clean a raw pair list: drop self-loops, keep each unordered pair once.

    Ids are used verbatim (n = max id + 1) unless ``remap`` is set, in which
    case ids are compacted to 0..n-1 preserving order.  Empty input yields an
    empty list.  Ids above ``MAX_VERTEX_ID`` are rejected.
    """
    arr = np.asarray(list(raw) if not isinstance(raw, np.ndarray) else raw, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FormatError(f"edge list must be pairs, got shape {arr.shape}")
    if arr.size:
        if arr.min() < 0:
            raise FormatError("vertex ids must be non-negative")
        if arr.max() > MAX_VERTEX_ID:
            raise FormatError(f"vertex ids must be <= {MAX_VERTEX_ID}")

    raw_max = int(arr.max()) if arr.size else -1
    keep = arr[:, 0] != arr[:, 1]
    arr = arr[keep]
    lo = np.minimum(arr[:, 0], arr[:, 1]).astype(np.uint64)
    hi = np.maximum(arr[:, 0], arr[:, 1]).astype(np.uint64)
    packed = np.unique((lo << np.uint64(32)) | hi)
    edges = np.empty((len(packed), 2), dtype=np.uint32)
    edges[:, 0] = (packed >> np.uint64(32)).astype(np.uint32)
    edges[:, 1] = (packed & np.uint64(0xFFFFFFFF)).astype(np.uint32)

    if remap:
        ids = np.unique(edges.ravel())
        edges = np.searchsorted(ids, edges).astype(np.uint32)
        n = len(ids)
    else:
        # ids verbatim; vertices seen only in dropped self-loops still count
        n = raw_max + 1
    if n_hint is not None:
        n = max(n, n_hint)
    return EdgeList(edges=edges, n=n)


# ---------------------------------------------------------------------------
# varint block codec


def _zigzag(v: int) -> int:
    return ((v << 1) ^ (v >> 63)) & ((1 << 64) - 1)


def _unzigzag(z: int) -> int:
    return (z >> 1) ^ -(z & 1)


def _append_varint(out: bytearray, v: int) -> None:
    while v >= 0x80:
        out.append((v & 0x7F) | 0x80)
        v >>= 7
    out.append(v)


def encode_block(source: int, neighbors) -> bytes:
    """Encode one block (<= BLOCK_SIZE ascending neighbor ids) to bytes."""
    neighbors = np.asarray(neighbors, dtype=np.int64)
    if len(neighbors) == 0:
        return b""
    if len(neighbors) > BLOCK_SIZE:
        raise ValueError(f"block holds at most {BLOCK_SIZE} neighbors")
    if np.any(np.diff(neighbors) < 1):
        raise ValueError("neighbors must be strictly ascending")
    out = bytearray()
    _append_varint(out, _zigzag(int(neighbors[0]) - source))
    prev = int(neighbors[0])
    for nbr in neighbors[1:]:
        _append_varint(out, int(nbr) - prev)
        prev = int(nbr)
    return bytes(out)


def decode_block(source: int, data: bytes) -> np.ndarray:
    """Decode one block; inverse of ``encode_block`` given the same source."""
    if not data:
        return np.empty(0, dtype=np.uint32)
    values = []
    acc = 0
    shift = 0
    for byte in data:
        acc |= (byte & 0x7F) << shift
        if byte & 0x80:
            shift += 7
        else:
            values.append(acc)
            acc = 0
            shift = 0
    if shift != 0:
        raise FormatError("truncated varint in block")
    out = np.empty(len(values), dtype=np.uint32)
    cur = source + _unzigzag(values[0])
    out[0] = cur
    for i, delta in enumerate(values[1:], start=1):
        cur += delta
        out[i] = cur
    return out


def _varint_lengths(values: np.ndarray) -> np.ndarray:
    lengths = np.ones(len(values), dtype=np.int64)
    threshold = np.uint64(0x80)
    while True:
        mask = values >= threshold
        if not mask.any():
            return lengths
        lengths[mask] += 1
        if int(threshold) >= 1 << 57:  # next shift would overflow u64
            return lengths
        threshold = threshold << np.uint64(7)


def _encode_payload(n: int, indptr: np.ndarray, indices: np.ndarray):
    """Vectorized whole-graph encoder; one payload blob plus byte offsets."""
    degrees = np.diff(indptr)
    nblocks = (degrees + BLOCK_SIZE - 1) // BLOCK_SIZE
    total = len(indices)

    src = np.repeat(np.arange(n, dtype=np.int64), degrees)
    pos = np.arange(total, dtype=np.int64) - np.repeat(indptr[:-1], degrees)
    first = pos % BLOCK_SIZE == 0

    ind64 = indices.astype(np.int64)
    prev = np.empty(total, dtype=np.int64)
    if total:
        prev[1:] = ind64[:-1]
        prev[0] = 0
    deltas = ind64 - prev
    signed_first = ind64 - src
    zz = ((signed_first << 1) ^ (signed_first >> 63)).astype(np.uint64)
    values = np.where(first, zz, deltas.astype(np.uint64))

    lens = _varint_lengths(values)
    csum = np.zeros(total + 1, dtype=np.int64)
    np.cumsum(lens, out=csum[1:])
    data_len = csum[indptr[1:]] - csum[indptr[:-1]]
    payload_len = 4 + 4 * nblocks + data_len
    byte_offsets = np.zeros(n + 1, dtype=np.uint64)
    np.cumsum(payload_len, out=byte_offsets[1:])

    out = np.zeros(int(byte_offsets[-1]), dtype=np.uint8)
    base = byte_offsets[:-1].astype(np.int64)

    def scatter_u32(positions: np.ndarray, vals: np.ndarray) -> None:
        for b in range(4):
            out[positions + b] = (vals >> (8 * b)) & 0xFF

    scatter_u32(base, degrees)

    # block directory: rel offset of each block's data from the vertex's
    # block-data start
    blk_vertex = np.repeat(np.arange(n, dtype=np.int64), nblocks)
    blk_index = np.arange(int(nblocks.sum()), dtype=np.int64) - np.repeat(
        np.concatenate(([0], np.cumsum(nblocks)[:-1])), nblocks
    )
    blk_first_entry = indptr[blk_vertex] + blk_index * BLOCK_SIZE
    rel = csum[blk_first_entry] - csum[indptr[blk_vertex]]
    scatter_u32(base[blk_vertex] + 4 + 4 * blk_index, rel)

    # varint bytes
    entry_base = (
        base[src]
        + 4
        + 4 * nblocks[src]
        + (csum[:-1] - csum[np.repeat(indptr[:-1], degrees)])
    )
    max_len = int(lens.max()) if total else 0
    for g in range(max_len):
        mask = lens > g
        byte = (values[mask] >> np.uint64(7 * g)) & np.uint64(0x7F)
        cont = (lens[mask] - 1 > g).astype(np.uint8) << 7
        out[entry_base[mask] + g] = byte.astype(np.uint8) | cont
    return out.tobytes(), byte_offsets


def _decode_payload(n: int, payload: bytes, byte_offsets: np.ndarray):
    """Vectorized inverse of ``_encode_payload``."""
    buf = np.frombuffer(payload, dtype=np.uint8)
    base = byte_offsets[:-1].astype(np.int64)

    def gather_u32(positions: np.ndarray) -> np.ndarray:
        v = np.zeros(len(positions), dtype=np.int64)
        for b in range(4):
            v |= buf[positions + b].astype(np.int64) << (8 * b)
        return v

    degrees = gather_u32(base)
    nblocks = (degrees + BLOCK_SIZE - 1) // BLOCK_SIZE
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    total = int(indptr[-1])

    # concatenated varint stream over all vertices in order
    data_start = base + 4 + 4 * nblocks
    data_len = byte_offsets[1:].astype(np.int64) - data_start
    keep = np.zeros(len(buf), dtype=bool)
    for lo, ln in zip(data_start, data_len):  # n iterations of O(1) slicing
        if ln:
            keep[lo : lo + ln] = True
    stream = buf[keep]

    cont = (stream & 0x80) != 0
    ends = np.flatnonzero(~cont)
    if len(ends) != total:
        raise FormatError("corrupt adjacency payload")
    starts = np.empty(total, dtype=np.int64)
    if total:
        starts[0] = 0
        starts[1:] = ends[:-1] + 1
    values = np.zeros(total, dtype=np.uint64)
    g = 0
    live = np.arange(total)
    while len(live):
        p = starts[live] + g
        values[live] |= (stream[p].astype(np.uint64) & np.uint64(0x7F)) << np.uint64(7 * g)
        live = live[p < ends[live]]
        g += 1

    src = np.repeat(np.arange(n, dtype=np.int64), degrees)
    pos = np.arange(total, dtype=np.int64) - np.repeat(indptr[:-1], degrees)
    first = pos % BLOCK_SIZE == 0
    signed = (values >> np.uint64(1)).astype(np.int64) ^ -(values & np.uint64(1)).astype(
        np.int64
    )
    steps = np.where(first, 0, values.astype(np.int64))
    run = np.cumsum(steps)
    first_idx = np.flatnonzero(first)
    first_abs = src[first_idx] + signed[first_idx]
    blk_of_entry = np.searchsorted(first_idx, np.arange(total), side="right") - 1
    neighbors = first_abs[blk_of_entry] + run - run[first_idx[blk_of_entry]]
    if total and (neighbors.min() < 0 or neighbors.max() > MAX_VERTEX_ID):
        raise FormatError("decoded neighbor id out of range")
    return indptr, neighbors.astype(np.uint32)


# ---------------------------------------------------------------------------
# graph container


@dataclass
class Graph:
    """Compressed or raw CSR graph; see module docstring for the layout."""

    n: int
    m: int
    degrees: np.ndarray  # int64 (n,)
    indptr: np.ndarray  # int64 (n+1,), element offsets
    indices: np.ndarray | None = None  # uint32 (2m,), raw storage only
    adj_payload: bytes | None = None  # compressed storage only
    byte_offsets: np.ndarray | None = None  # uint64 (n+1,)
    compressed: bool = False
    _csr_cache: np.ndarray | None = field(default=None, repr=False)
    _edges_cache: np.ndarray | None = field(default=None, repr=False)

    @property
    def vol(self) -> int:
        """Graph volume, 2m."""
        return 2 * self.m

    def neighbors(self, u: int) -> np.ndarray:
        """Sorted neighbor ids of u."""
        if not 0 <= u < self.n:
            raise IndexError(f"vertex {u} out of range")
        if not self.compressed:
            return self.indices[self.indptr[u] : self.indptr[u + 1]]
        deg = int(self.degrees[u])
        if deg == 0:
            return np.empty(0, dtype=np.uint32)
        out = np.empty(deg, dtype=np.uint32)
        for b in range((deg + BLOCK_SIZE - 1) // BLOCK_SIZE):
            block = self._decode_vertex_block(u, b)
            out[b * BLOCK_SIZE : b * BLOCK_SIZE + len(block)] = block
        return out

    def _decode_vertex_block(self, u: int, b: int) -> np.ndarray:
        deg = int(self.degrees[u])
        nblocks = (deg + BLOCK_SIZE - 1) // BLOCK_SIZE
        base = int(self.byte_offsets[u])
        dir_at = base + 4 + 4 * b
        rel = int.from_bytes(self.adj_payload[dir_at : dir_at + 4], "little")
        if b + 1 < nblocks:
            nxt = int.from_bytes(
                self.adj_payload[dir_at + 4 : dir_at + 8], "little"
            )
        else:
            nxt = int(self.byte_offsets[u + 1]) - (base + 4 + 4 * nblocks)
        start = base + 4 + 4 * nblocks + rel
        end = base + 4 + 4 * nblocks + nxt
        return decode_block(u, self.adj_payload[start:end])

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) view of the full adjacency (decoded once)."""
        if not self.compressed:
            return self.indptr, self.indices
        if self._csr_cache is None:
            _, indices = _decode_payload(self.n, self.adj_payload, self.byte_offsets)
            object.__setattr__(self, "_csr_cache", indices)
        return self.indptr, self._csr_cache

    def edge_array(self) -> np.ndarray:
        """(m, 2) uint32 canonical edges (u < v), lexicographically sorted.

        Row order is the canonical edge index used for per-edge streams.
        """
        if self._edges_cache is None:
            indptr, indices = self.csr()
            src = np.repeat(
                np.arange(self.n, dtype=np.uint32), np.diff(indptr).astype(np.int64)
            )
            keep = indices > src
            edges = np.stack([src[keep], indices[keep]], axis=1)
            object.__setattr__(self, "_edges_cache", edges)
        return self._edges_cache

    def adjacency_csr_matrix(self, dtype=np.float64):
        """Adjacency as a scipy CSR matrix (ones on edges)."""
        import scipy.sparse as sp

        indptr, indices = self.csr()
        data = np.ones(len(indices), dtype=dtype)
        return sp.csr_matrix((data, indices.astype(np.int64), indptr), shape=(self.n, self.n))


def _estimate_graph_bytes(n: int, k: int) -> int:
    # CSR build working set: directed endpoints, sort order, final arrays
    return 2 * k * (8 + 8 + 4) + (n + 1) * 8 + n * 8


def build_graph(edges: EdgeList, compress: bool = False) -> Graph:
    """Build the immutable CSR container from normalized edges."""
    n, k = edges.n, len(edges)
    try:
        src = np.concatenate([edges.edges[:, 0], edges.edges[:, 1]])
        dst = np.concatenate([edges.edges[:, 1], edges.edges[:, 0]])
        order = np.lexsort((dst, src))
        indices = dst[order]
        degrees = np.bincount(src.astype(np.int64), minlength=n).astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        if compress:
            payload, byte_offsets = _encode_payload(n, indptr, indices)
            return Graph(
                n=n,
                m=k,
                degrees=degrees,
                indptr=indptr,
                adj_payload=payload,
                byte_offsets=byte_offsets,
                compressed=True,
            )
        return Graph(n=n, m=k, degrees=degrees, indptr=indptr, indices=indices)
    except MemoryError as exc:
        raise ResourceError(
            f"graph build needs about {_estimate_graph_bytes(n, k)} bytes"
        ) from exc


def kth_neighbor(g: Graph, u: int, i: int) -> int:
    """i-th smallest neighbor of u.

    Compressed graphs decode only the block containing index i.
    """
    if not 0 <= u < g.n:
        raise IndexError(f"vertex {u} out of range")
    if not 0 <= i < g.degrees[u]:
        raise IndexError(f"neighbor index {i} out of range for degree {g.degrees[u]}")
    if not g.compressed:
        return int(g.indices[g.indptr[u] + i])
    block = g._decode_vertex_block(u, i // BLOCK_SIZE)
    return int(block[i % BLOCK_SIZE])


def random_walk(g: Graph, start: int, steps: int, rng) -> int:
    """Endpoint of a uniform random walk.

    Each step draws a fresh 32-bit value from ``rng`` and moves to
    ``kth_neighbor(v, draw % degree(v))``.  Pure function of the graph,
    start, step count and stream state.
    """
    if not 0 <= start < g.n:
        raise IndexError(f"vertex {start} out of range")
    if steps > 0 and g.degrees[start] == 0:
        raise ValueError(f"cannot walk from isolated vertex {start}")
    v = start
    for _ in range(steps):
        v = kth_neighbor(g, v, rng.next_u32() % int(g.degrees[v]))
    return v


def map_edges_parallel(g: Graph, f, threads: int | None = None) -> None:
    """Invoke f(u, v) exactly once per canonical edge (u < v).

    Work is split over threads by vertex ranges; ``f`` must tolerate
    concurrent invocation.  Exceptions raised by ``f`` propagate.
    """
    threads = resolve_threads(threads)
    indptr, indices = g.csr()

    def run(lo: int, hi: int) -> None:
        for u in range(lo, hi):
            row = indices[indptr[u] : indptr[u + 1]]
            for v in row[np.searchsorted(row, u, side="right") :]:
                f(int(u), int(v))

    ranges = chunk_ranges(g.n, threads)
    if threads == 1 or len(ranges) == 1:
        for lo, hi in ranges:
            run(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run, lo, hi) for lo, hi in ranges]
        for fut in futures:
            fut.result()


# ---------------------------------------------------------------------------
# file formats


def read_edge_list(path) -> np.ndarray:
    """Parse a text edge list: one "u v" per line, '#' lines ignored."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected two fields, got {len(parts)}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer vertex id")
            if u < 0 or v < 0:
                raise FormatError(f"{path}:{lineno}: negative vertex id")
            rows.append((u, v))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def save_graph(g: Graph, path) -> int:
    """Write the binary graph file; returns bytes written."""
    if g.compressed:
        payload = g.adj_payload
        offsets = g.byte_offsets
        flag = 1
    else:
        payload = g.indices.astype("<u4").tobytes()
        offsets = (g.indptr * 4).astype(np.uint64)
        flag = 0
    header = _HEADER.pack(GRAPH_MAGIC, GRAPH_VERSION, flag, g.n, g.m)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(offsets.astype("<u8").tobytes())
        fh.write(payload)
    return len(header) + offsets.nbytes + len(payload)


def load_graph(path) -> Graph:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError("graph file too short")
    magic, version, flag, n, m = _HEADER.unpack_from(blob, 0)
    if magic != GRAPH_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != GRAPH_VERSION:
        raise FormatError(f"unsupported version {version}")
    off_at = _HEADER.size
    offsets = np.frombuffer(blob, dtype="<u8", count=n + 1, offset=off_at).astype(np.uint64)
    payload = blob[off_at + (n + 1) * 8 :]
    if flag == 0:
        indptr = (offsets // 4).astype(np.int64)
        indices = np.frombuffer(payload, dtype="<u4", count=int(indptr[-1])).astype(np.uint32)
        degrees = np.diff(indptr)
        return Graph(n=n, m=m, degrees=degrees, indptr=indptr, indices=indices)
    if flag != 1:
        raise FormatError(f"unknown compression flag {flag}")
    indptr, _ = _indptr_from_payload(n, payload, offsets)
    degrees = np.diff(indptr)
    return Graph(
        n=n,
        m=m,
        degrees=degrees,
        indptr=indptr,
        adj_payload=payload,
        byte_offsets=offsets,
        compressed=True,
    )


def _indptr_from_payload(n: int, payload: bytes, byte_offsets: np.ndarray):
    buf = np.frombuffer(payload, dtype=np.uint8)
    base = byte_offsets[:-1].astype(np.int64)
    degrees = np.zeros(n, dtype=np.int64)
    for b in range(4):
        degrees |= buf[base + b].astype(np.int64) << (8 * b)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    return indptr, degrees
