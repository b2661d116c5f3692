import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lightne as ln
from lightne.errors import FormatError, ResourceError
from lightne.graph import BLOCK_SIZE, decode_block, encode_block
from lightne.rng import StreamRng


def naive_adjacency(pairs, n):
    """Independent oracle: dict-of-sets adjacency from raw pairs."""
    adj = {u: set() for u in range(n)}
    for u, v in pairs:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    return adj


# ---------------------------------------------------------------------------
# normalize_edges


def test_normalize_drops_duplicates_and_loops():
    el = ln.normalize_edges([(0, 1), (1, 0), (2, 2)])
    assert el.edges.tolist() == [[0, 1]]
    assert el.n == 3  # vertex 2 survives as isolated


def test_normalize_already_clean():
    el = ln.normalize_edges([(0, 1), (1, 2), (0, 2)])
    assert el.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    assert el.n == 3


def test_normalize_against_set_oracle():
    rng = np.random.default_rng(42)
    pairs = rng.integers(0, 300, size=(10_000, 2))
    el = ln.normalize_edges(pairs)
    oracle = {(min(u, v), max(u, v)) for u, v in pairs.tolist() if u != v}
    assert set(map(tuple, el.edges.tolist())) == oracle
    assert len(el.edges) == len(oracle)


def test_normalize_empty_and_hint():
    el = ln.normalize_edges([])
    assert len(el) == 0 and el.n == 0
    assert ln.normalize_edges([], n_hint=5).n == 5


def test_normalize_remap_compacts_ids():
    el = ln.normalize_edges([(10, 20), (20, 30)], remap=True)
    assert el.edges.tolist() == [[0, 1], [1, 2]]
    assert el.n == 3


def test_normalize_rejects_huge_and_negative_ids():
    with pytest.raises(FormatError):
        ln.normalize_edges([(0, 2**32 - 1)])
    with pytest.raises(FormatError):
        ln.normalize_edges([(-1, 2)])


# ---------------------------------------------------------------------------
# build_graph


@pytest.mark.parametrize("compress", [False, True])
def test_build_triangle(compress):
    g = ln.build_graph(ln.normalize_edges([(0, 1), (1, 2), (0, 2)]), compress=compress)
    assert (g.n, g.m, g.vol) == (3, 3, 6)
    assert g.degrees.tolist() == [2, 2, 2]


def test_build_single_edge():
    g = ln.build_graph(ln.normalize_edges([(0, 1)]))
    assert (g.n, g.m, g.vol) == (2, 1, 2)
    assert g.degrees.tolist() == [1, 1]


@pytest.mark.parametrize("compress", [False, True])
def test_build_matches_naive_oracle(compress):
    rng = np.random.default_rng(7)
    n = 200
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < 0.05
    pairs = np.stack([iu[keep], iv[keep]], axis=1)
    g = ln.build_graph(ln.normalize_edges(pairs, n_hint=n), compress=compress)
    oracle = naive_adjacency(pairs.tolist(), n)
    for u in range(n):
        assert g.neighbors(u).tolist() == sorted(oracle[u])
    assert g.degrees.sum() == 2 * g.m


def test_build_oom_becomes_resource_error(monkeypatch):
    def boom(*args, **kwargs):
        raise MemoryError

    monkeypatch.setattr(np, "lexsort", boom)
    with pytest.raises(ResourceError, match="bytes"):
        ln.build_graph(ln.normalize_edges([(0, 1)]))


# ---------------------------------------------------------------------------
# block codec


def test_encode_block_hand_examples():
    # zigzag(2 - 5) = zigzag(-3) = 5, then deltas 5 and 2
    assert list(encode_block(5, [2, 7, 9])) == [0x05, 0x05, 0x02]
    # zigzag(1 - 0) = 2
    assert list(encode_block(0, [1])) == [0x02]


def test_decode_block_inverts_hand_examples():
    assert decode_block(5, bytes([0x05, 0x05, 0x02])).tolist() == [2, 7, 9]
    assert decode_block(0, bytes([0x02])).tolist() == [1]


def test_encode_block_rejects_bad_input():
    with pytest.raises(ValueError):
        encode_block(0, [3, 2])
    with pytest.raises(ValueError):
        encode_block(0, [4, 4])
    with pytest.raises(ValueError):
        encode_block(0, list(range(BLOCK_SIZE + 1)))


def test_block_round_trip_bulk():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        size = rng.integers(1, BLOCK_SIZE + 1)
        neighbors = np.sort(
            rng.choice(2**31, size=size, replace=False)
        )
        source = int(rng.integers(0, 2**31))
        assert decode_block(source, encode_block(source, neighbors)).tolist() == neighbors.tolist()


@given(
    source=st.integers(0, 2**32 - 2),
    neighbors=st.sets(st.integers(0, 2**32 - 2), min_size=1, max_size=BLOCK_SIZE),
)
@settings(max_examples=200, deadline=None)
def test_block_round_trip_property(source, neighbors):
    ordered = sorted(neighbors)
    assert decode_block(source, encode_block(source, ordered)).tolist() == ordered


# ---------------------------------------------------------------------------
# kth_neighbor


def test_kth_neighbor_triangle():
    g = ln.build_graph(ln.normalize_edges([(0, 1), (1, 2), (0, 2)]))
    assert ln.kth_neighbor(g, 0, 1) == 2


def test_kth_neighbor_star():
    g = ln.build_graph(ln.normalize_edges([(0, i) for i in range(1, 11)]))
    assert ln.kth_neighbor(g, 0, 9) == 10


def test_kth_neighbor_out_of_range():
    g = ln.build_graph(ln.normalize_edges([(0, 1)]))
    with pytest.raises(IndexError):
        ln.kth_neighbor(g, 0, 1)
    with pytest.raises(IndexError):
        ln.kth_neighbor(g, 5, 0)


def test_kth_neighbor_compressed_matches_uncompressed():
    el = ln.random_graph_edges(400, 3000, seed=3)
    raw = ln.build_graph(el)
    comp = ln.build_graph(el, compress=True)
    for u in range(raw.n):
        for i in range(int(raw.degrees[u])):
            assert ln.kth_neighbor(comp, u, i) == ln.kth_neighbor(raw, u, i)


def test_multi_block_vertex_decodes_per_block():
    # star center with 200 neighbors spans four blocks
    g = ln.build_graph(ln.normalize_edges([(0, i) for i in range(1, 201)]), compress=True)
    assert g.neighbors(0).tolist() == list(range(1, 201))
    assert ln.kth_neighbor(g, 0, 64) == 65
    assert ln.kth_neighbor(g, 0, 199) == 200


# ---------------------------------------------------------------------------
# random_walk


def test_walk_zero_steps_is_identity():
    g = ln.build_graph(ln.normalize_edges([(0, 1)]))
    assert ln.random_walk(g, 0, 0, StreamRng(0, 99)) == 0


def test_walk_single_edge_alternates():
    g = ln.build_graph(ln.normalize_edges([(0, 1)]))
    assert ln.random_walk(g, 0, 3, StreamRng(0, 99)) == 1


def test_walk_isolated_vertex_rejected():
    g = ln.build_graph(ln.normalize_edges([(0, 1)], n_hint=3))
    with pytest.raises(ValueError):
        ln.random_walk(g, 2, 1, StreamRng(0, 99))
    assert ln.random_walk(g, 2, 0, StreamRng(0, 99)) == 2


def test_walk_path_graph_distribution():
    # exact transition matrix: from the middle of 0-1-2, one step is 50/50
    g = ln.build_graph(ln.normalize_edges([(0, 1), (1, 2)]))
    trials = 100_000
    rng = StreamRng(123, 99)
    hits = sum(ln.random_walk(g, 1, 1, rng) == 0 for _ in range(trials))
    sigma = (trials * 0.25) ** 0.5
    assert abs(hits - trials / 2) < 3 * sigma


def test_walk_is_pure_function_of_stream():
    g = ln.build_graph(ln.normalize_edges([(0, 1), (1, 2), (0, 2), (2, 3)]))
    a = ln.random_walk(g, 0, 7, StreamRng(5, 99, 1))
    b = ln.random_walk(g, 0, 7, StreamRng(5, 99, 1))
    assert a == b


# ---------------------------------------------------------------------------
# map_edges_parallel


def test_map_edges_triangle_counts():
    import threading

    g = ln.build_graph(ln.normalize_edges([(0, 1), (1, 2), (0, 2)]))
    seen = []
    lock = threading.Lock()

    def f(u, v):
        with lock:
            seen.append((u, v))

    ln.map_edges_parallel(g, f, threads=4)
    assert sorted(seen) == [(0, 1), (0, 2), (1, 2)]


def test_map_edges_single_edge_sum():
    g = ln.build_graph(ln.normalize_edges([(0, 1)]))
    total = []
    ln.map_edges_parallel(g, lambda u, v: total.append(u + v), threads=1)
    assert sum(total) == 1


@pytest.mark.parametrize("threads", [1, 4, 8])
def test_map_edges_multiset_matches_sequential(threads):
    import threading

    el = ln.random_graph_edges(150, 900, seed=9)
    g = ln.build_graph(el)
    expected = sorted(map(tuple, g.edge_array().tolist()))
    seen = []
    lock = threading.Lock()

    def f(u, v):
        with lock:
            seen.append((u, v))

    ln.map_edges_parallel(g, f, threads=threads)
    assert sorted(seen) == expected


def test_map_edges_propagates_exceptions():
    g = ln.build_graph(ln.normalize_edges([(0, 1)]))
    with pytest.raises(RuntimeError, match="boom"):
        ln.map_edges_parallel(g, lambda u, v: (_ for _ in ()).throw(RuntimeError("boom")), threads=2)


# ---------------------------------------------------------------------------
# files


@pytest.mark.parametrize("compress", [False, True])
def test_graph_file_round_trip(tmp_path, compress):
    el = ln.random_graph_edges(120, 700, seed=4)
    g = ln.build_graph(el, compress=compress)
    path = tmp_path / "g.bin"
    ln.save_graph(g, path)
    h = ln.load_graph(path)
    assert (h.n, h.m, h.compressed) == (g.n, g.m, compress)
    ip_g, ind_g = g.csr()
    ip_h, ind_h = h.csr()
    assert np.array_equal(ip_g, ip_h) and np.array_equal(ind_g, ind_h)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTAGRPH" + b"\0" * 40)
    with pytest.raises(FormatError, match="magic"):
        ln.load_graph(path)


def test_read_edge_list_skips_comments(tmp_path):
    path = tmp_path / "edges.txt"
    path.write_text("# header\n0 1\n\n1 2\n# trailing\n")
    assert ln.read_edge_list(path).tolist() == [[0, 1], [1, 2]]


def test_read_edge_list_reports_line_numbers(tmp_path):
    path = tmp_path / "edges.txt"
    path.write_text("0 1\n0 x\n")
    with pytest.raises(FormatError, match=":2"):
        ln.read_edge_list(path)
    path.write_text("0 1\n1 2 3\n")
    with pytest.raises(FormatError, match=":2"):
        ln.read_edge_list(path)
