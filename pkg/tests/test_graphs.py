import io
import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from edgelimits import rng
from edgelimits.graphs import (
    Graph,
    GraphStats,
    band_warning,
    gen_gnm,
    gen_gnp,
    graph_from_edges,
    read_graph,
    stats,
    third_moment_stat,
    write_graph,
)


def test_stream_deterministic():
    a = rng.stream(42, 0).integers(0, 1 << 62, size=8)
    b = rng.stream(42, 0).integers(0, 1 << 62, size=8)
    assert np.array_equal(a, b)


def test_stream_ids_disjoint():
    a = rng.stream(42, 0).integers(0, 1 << 62, size=64)
    b = rng.stream(42, 1).integers(0, 1 << 62, size=64)
    assert not np.array_equal(a, b)


def test_spawn_streams_matches_stream():
    gens = rng.spawn_streams(7, 3)
    assert len(gens) == 3
    for w, g in enumerate(gens):
        assert np.array_equal(g.integers(0, 100, 10),
                              rng.stream(7, w).integers(0, 100, 10))


# ---------------------------------------------------------------- generation


def test_gen_gnm_basic():
    G = gen_gnm(10, 20, seed=1)
    assert G.n == 10 and G.M == 20
    G.validate()
    E = G.edges()
    assert E.shape == (20, 2)
    assert (E[:, 0] < E[:, 1]).all()
    pairs = {tuple(e) for e in E.tolist()}
    assert len(pairs) == 20
    assert int(G.deg.sum()) == 40


def test_gen_gnm_deterministic():
    a = gen_gnm(30, 100, seed=5).edges()
    b = gen_gnm(30, 100, seed=5).edges()
    assert np.array_equal(a, b)
    c = gen_gnm(30, 100, seed=6).edges()
    assert not np.array_equal(a, c)


def test_gen_gnm_sparse_branch():
    # M < N/64 takes the rejection path; contract is the same
    G = gen_gnm(64, 10, seed=3)
    assert G.M == 10
    G.validate()


def test_gen_gnm_extremes():
    assert gen_gnm(5, 0, seed=0).M == 0
    full = gen_gnm(5, 10, seed=0)
    assert full.M == 10 and full.N == 10
    with pytest.raises(ValueError):
        gen_gnm(5, 11, seed=0)
    with pytest.raises(ValueError):
        gen_gnm(5, -1, seed=0)


def test_gen_gnm_uniform_over_small_space():
    # n=4, M=2: all C(6,2)=15 edge pairs should appear with frequency ~1/15
    from collections import Counter

    counts = Counter()
    for s in range(3000):
        counts[tuple(map(tuple, gen_gnm(4, 2, seed=s).edges().tolist()))] += 1
    assert len(counts) == 15
    # 4 sigma band for Binomial(3000, 1/15)
    lo, hi = 200 - 4 * math.sqrt(200 * 14 / 15), 200 + 4 * math.sqrt(200 * 14 / 15)
    assert all(lo < c < hi for c in counts.values()), counts


def test_gen_gnp_edges_iid():
    G = gen_gnp(50, 0.3, seed=2)
    G.validate()
    # M ~ Binomial(1225, 0.3): mean 367.5, sd 16; allow 5 sigma
    assert abs(G.M - 367.5) < 80
    assert gen_gnp(50, 0.0, seed=0).M == 0
    assert gen_gnp(50, 1.0, seed=0).M == 1225


def test_gen_gnp_rejects_bad_p():
    with pytest.raises(ValueError):
        gen_gnp(10, -0.1, seed=0)
    with pytest.raises(ValueError):
        gen_gnp(10, 1.5, seed=0)


def test_graph_from_edges_validation():
    graph_from_edges(4, [(0, 1), (2, 3)]).validate()
    with pytest.raises(ValueError):
        graph_from_edges(4, [(0, 1), (0, 1)])
    with pytest.raises(ValueError):
        graph_from_edges(4, [(2, 2)])
    with pytest.raises(ValueError):
        graph_from_edges(4, [(0, 4)])
    with pytest.raises(ValueError):
        graph_from_edges(4, [(-1, 2)])


def test_adjacency_views_agree():
    G = gen_gnm(17, 40, seed=9)
    dense = G.dense_u8()
    assert np.array_equal(dense, dense.T)
    assert np.array_equal(dense.astype(np.float32), G.dense_f32())
    for v in range(G.n):
        bits = G.row_bits(v)
        row = [(bits >> u) & 1 for u in range(G.n)]
        assert row == dense[v].tolist()
    for u, v in G.edges():
        assert G.has_edge(int(u), int(v)) and G.has_edge(int(v), int(u))
    assert not G.has_edge(0, 0)


# ---------------------------------------------------------------- statistics


def test_stats_k4_regular():
    G = graph_from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    s = stats(G)
    assert s.Vn == 0 and s.is_regular
    assert s.dbar == 3 and s.p == 1


def test_stats_path3_by_hand():
    # degrees 1,2,1: Vn = 3(1+4+1) - 16 = 2, P = C(2,2) = 1
    s = stats(graph_from_edges(3, [(0, 1), (1, 2)]))
    assert s.Vn == 2
    assert s.P == 1
    assert s.V == Fraction(2, 3)
    assert not s.is_regular
    assert s.dbar == Fraction(4, 3)


@given(st.integers(3, 16), st.data())
@settings(max_examples=60, deadline=None)
def test_degree_identity(n, data):
    N = n * (n - 1) // 2
    M = data.draw(st.integers(0, N))
    seed = data.draw(st.integers(0, 10 ** 6))
    s = stats(gen_gnm(n, M, seed))
    # 2 P n = Vn + 4M^2 - 2Mn ties the pair count to the degree variance
    assert 2 * s.P * n == s.Vn + 4 * M * M - 2 * M * n
    assert s.Vn >= 0
    assert (s.Vn == 0) == s.is_regular


def test_stats_exact_vs_definition():
    G = gen_gnm(12, 30, seed=4)
    s = stats(G)
    deg = G.deg.astype(object)
    assert s.Vn == G.n * int((deg * deg).sum()) - 4 * G.M * G.M
    assert s.P == sum(int(d) * (int(d) - 1) // 2 for d in G.deg)
    assert s.V == Fraction(s.Vn, G.n)


def test_third_moment_path3():
    G = graph_from_edges(3, [(0, 1), (1, 2)])
    assert third_moment_stat(G) == 10 / 81


def test_third_moment_zero_iff_regular():
    ring = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert third_moment_stat(ring) == 0.0
    assert third_moment_stat(gen_gnm(20, 50, seed=1)) > 0


def test_band_warning():
    G = gen_gnm(20, 95, seed=0)  # density 1/2
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        band_warning(G, k=10)
    sparse = gen_gnm(20, 3, seed=0)
    with pytest.warns(UserWarning):
        band_warning(sparse)
    with pytest.warns(UserWarning):
        band_warning(G, k=1)


# ---------------------------------------------------------------- file format


def test_graph_roundtrip(tmp_path):
    G = gen_gnm(25, 80, seed=11)
    p = tmp_path / "g.graph"
    write_graph(G, p)
    H = read_graph(p)
    assert H.n == G.n and H.M == G.M
    assert np.array_equal(H.edges(), G.edges())
    first = p.read_text().splitlines()[0]
    assert first == "25 80"


def test_graph_reader_rejects(tmp_path):
    def load(text):
        p = tmp_path / "bad.graph"
        p.write_text(text)
        return read_graph(p)

    with pytest.raises(ValueError):
        load("3 2\n0 1\n0 1\n")  # duplicate
    with pytest.raises(ValueError):
        load("3 1\n1 1\n")  # self-loop
    with pytest.raises(ValueError):
        load("3 1\n0 3\n")  # out of range
    with pytest.raises(ValueError):
        load("3 1\n1 0\n")  # u < v required
    with pytest.raises(ValueError):
        load("3 2\n0 1\n")  # count mismatch
    with pytest.raises(ValueError):
        load("nonsense\n")
