import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from edgelimits.graphs import gen_gnm, graph_from_edges
from edgelimits.subsets import (
    BudgetError,
    EdgeCountDistribution,
    apply_swap,
    build_state,
    exact_distribution,
    exact_joint_distribution,
    fixed_subset_degree_stats,
    read_distribution,
    revolving_door_swaps,
    sample_edge_counts,
    split_sample,
    subset_edge_count,
    swap_delta,
    tv_distance,
    write_distribution,
)

K4 = graph_from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
C4 = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


def brute_counts(G, k):
    out = {}
    for S in itertools.combinations(range(G.n), k):
        z = subset_edge_count(G, S)
        out[z] = out.get(z, 0) + 1
    return out


def small_graphs(max_n=10):
    return st.integers(4, max_n).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.integers(0, n * (n - 1) // 2),
            st.integers(0, 10 ** 6)))


# ---------------------------------------------------------------- state


def test_build_state_k4():
    st_ = build_state(K4, [0, 1])
    assert st_.eS == 1
    assert st_.dS.tolist() == [1, 1, 2, 2]
    assert st_.members().tolist() == [0, 1]
    assert st_.complement().tolist() == [2, 3]
    # e(S) + e(Sbar) + cross = M
    assert st_.eS + st_.complement_edges() + st_.cross_edges() == K4.M


def test_build_state_rejects():
    with pytest.raises(ValueError):
        build_state(K4, [0, 0, 1])
    with pytest.raises(ValueError):
        build_state(K4, [0, 4])
    with pytest.raises(ValueError):
        build_state(K4, [-1, 2])


@given(small_graphs(), st.data())
@settings(max_examples=60, deadline=None)
def test_swap_matches_rebuild(params, data):
    n, M, seed = params
    G = gen_gnm(n, M, seed)
    k = data.draw(st.integers(1, n - 1))
    S = data.draw(st.permutations(range(n))).copy()[:k]
    st_ = build_state(G, S)
    x = data.draw(st.sampled_from(sorted(S)))
    xb = data.draw(st.sampled_from([v for v in range(n) if v not in set(S)]))
    delta = swap_delta(G, st_, x, xb)
    e0 = st_.eS
    st2 = apply_swap(st_, x, xb)  # mutates st_ and returns it
    ref = build_state(G, [v for v in S if v != x] + [xb])
    assert st2.eS == e0 + delta == ref.eS
    assert np.array_equal(st2.dS, ref.dS)
    assert np.array_equal(st2.mask, ref.mask)


def test_swap_delta_rejects_wrong_sides():
    st_ = build_state(K4, [0, 1])
    with pytest.raises(ValueError):
        swap_delta(K4, st_, 2, 3)  # 2 not inside
    with pytest.raises(ValueError):
        swap_delta(K4, st_, 0, 1)  # 1 not outside


# ---------------------------------------------------------------- gray order


@pytest.mark.parametrize("n", range(2, 11))
def test_revolving_door_visits_everything_once(n):
    for k in range(1, n):
        cur = set(range(k))
        seen = {frozenset(cur)}
        for out, into in revolving_door_swaps(n, k):
            assert out in cur and into not in cur
            cur.remove(out)
            cur.add(into)
            key = frozenset(cur)
            assert key not in seen
            seen.add(key)
        assert len(seen) == math.comb(n, k)
        if k < n:
            assert cur == set(range(k - 1)) | {n - 1}


def test_revolving_door_trivial_cases():
    assert list(revolving_door_swaps(5, 5)) == []
    assert list(revolving_door_swaps(1, 1)) == []


# ---------------------------------------------------------------- exact law


def test_exact_distribution_c4():
    d = exact_distribution(C4, 2)
    assert d.counts == {0: 2, 1: 4}
    assert d.total == 6
    assert d.kind == "exact"
    assert d.mean() == Fraction(2, 3)


@given(small_graphs(10), st.data())
@settings(max_examples=40, deadline=None)
def test_exact_distribution_vs_brute(params, data):
    n, M, seed = params
    G = gen_gnm(n, M, seed)
    k = data.draw(st.integers(1, n - 1))
    assert exact_distribution(G, k).counts == brute_counts(G, k)


def test_exact_budget_refusal():
    G = gen_gnm(30, 100, seed=0)
    with pytest.raises(BudgetError):
        exact_distribution(G, 15, budget=10 ** 4)
    with pytest.raises(BudgetError):
        exact_joint_distribution(G, 15, budget=10 ** 4)


def test_exact_joint_marginal_and_symmetry():
    G = gen_gnm(9, 16, seed=3)
    for k in (2, 4):
        joint = exact_joint_distribution(G, k)
        assert sum(joint.values()) == math.comb(G.n, k)
        marg = {}
        for (e, eb), c in joint.items():
            marg[e] = marg.get(e, 0) + c
        assert marg == exact_distribution(G, k).counts
        flipped = {(b, a): c for (a, b), c in joint.items()}
        assert flipped == exact_joint_distribution(G, G.n - k)


def test_exact_joint_vs_brute():
    G = gen_gnm(8, 13, seed=5)
    k = 3
    ref = {}
    for S in itertools.combinations(range(G.n), k):
        comp = [v for v in range(G.n) if v not in S]
        key = (subset_edge_count(G, S), subset_edge_count(G, comp))
        ref[key] = ref.get(key, 0) + 1
    assert exact_joint_distribution(G, k) == ref


# ---------------------------------------------------------------- sampling


def test_sample_deterministic_and_counts():
    G = gen_gnm(40, 300, seed=1)
    d1 = sample_edge_counts(G, 10, samples=4000, seed=9)
    d2 = sample_edge_counts(G, 10, samples=4000, seed=9)
    assert d1.counts == d2.counts
    assert d1.total == 4000
    assert d1.kind == "empirical" and d1.seed == 9
    d3 = sample_edge_counts(G, 10, samples=4000, seed=10)
    assert d3.counts != d1.counts


def test_sample_k_range():
    G = gen_gnm(10, 20, seed=0)
    for k in (0, 1, 9, 10):
        with pytest.raises(ValueError):
            sample_edge_counts(G, k, samples=10, seed=0)
    with pytest.raises(ValueError):
        sample_edge_counts(G, 5, samples=0, seed=0)


def test_sample_mean_near_exact():
    G = gen_gnm(30, 200, seed=2)
    k = 12
    exact = exact_distribution(G, k)
    mu = float(exact.mean())
    var = sum(c * (z - mu) ** 2 for z, c in exact.counts.items()) / exact.total
    emp = sample_edge_counts(G, k, samples=20000, seed=3)
    zs, cs = emp.arrays()
    m_hat = float((zs * cs).sum()) / emp.total
    assert abs(m_hat - mu) < 5 * math.sqrt(var / emp.total)
    # hypergeometric mean: E e(S) = C(k,2) M / N
    assert exact.mean() == Fraction(math.comb(k, 2) * G.M, G.N)


def test_sample_workers_merge():
    G = gen_gnm(25, 120, seed=4)
    d = sample_edge_counts(G, 8, samples=1001, seed=5, workers=3)
    assert d.total == 1001
    assert d.counts == sample_edge_counts(G, 8, samples=1001, seed=5,
                                          workers=3).counts


def test_sample_all_mass_at_one_for_k2_complete():
    d = sample_edge_counts(K4, 2, samples=500, seed=0)
    assert d.counts == {1: 500}


def test_dense_engine_agrees_with_bitset():
    G = gen_gnm(60, 700, seed=6)
    gen = np.random.default_rng(0)
    for k in (2, 17, 58):
        for _ in range(20):
            S = gen.permutation(60)[:k]
            idx = np.sort(S)
            from edgelimits.subsets import _edge_counts_dense

            got = _edge_counts_dense(G, idx[None, :])
            assert got[0] == subset_edge_count(G, idx)


def test_split_sample_consistency():
    G = gen_gnm(30, 150, seed=7)
    S_prime, T, e_sp, inc = split_sample(G, k=10, t=4, seed=8)
    assert len(S_prime) == 6 and len(T) == 4
    assert not set(S_prime) & set(T)
    assert e_sp == subset_edge_count(G, S_prime)
    union = np.concatenate([S_prime, T])
    assert inc == subset_edge_count(G, union) - e_sp


def test_fixed_subset_degree_stats_brute():
    G = gen_gnm(12, 40, seed=9)
    S = [0, 2, 5, 7, 11]
    var_in, var_out, cov = fixed_subset_degree_stats(G, S)
    comp = [v for v in range(12) if v not in S]
    dS = [sum(G.has_edge(v, u) for u in S) for v in range(12)]
    dSb = [int(G.deg[v]) - dS[v] for v in range(12)]

    def fvar(vals):
        m = len(vals)
        mu = Fraction(sum(vals), m)
        return sum((Fraction(v) - mu) ** 2 for v in vals) / m

    assert var_in == fvar([dS[v] for v in S])
    assert var_out == fvar([dS[v] for v in comp])
    mo = Fraction(sum(dS[v] for v in comp), len(comp))
    mb = Fraction(sum(dSb[v] for v in comp), len(comp))
    assert cov == sum((dS[v] - mo) * (dSb[v] - mb) for v in comp) / len(comp)


# ----------------------------------------------------- distribution objects


def test_distribution_validation():
    EdgeCountDistribution("exact", {0: 2, 1: 4}, 6, 4, 2, 4)
    with pytest.raises(ValueError):
        EdgeCountDistribution("exact", {0: 2, 1: 3}, 6, 4, 2, 4)
    with pytest.raises(ValueError):
        EdgeCountDistribution("exact", {2: 6}, 6, 4, 2, 4)  # > C(2,2)
    with pytest.raises(ValueError):
        EdgeCountDistribution("exact", {-1: 6}, 6, 4, 2, 4)
    with pytest.raises(ValueError):
        EdgeCountDistribution("guess", {0: 6}, 6, 4, 2, 4)


def test_tv_distance():
    a = EdgeCountDistribution("exact", {0: 2, 1: 4}, 6, 4, 2, 4)
    b = EdgeCountDistribution("exact", {0: 3, 1: 3}, 6, 4, 2, 4)
    assert tv_distance(a, a) == 0.0
    assert tv_distance(a, b) == pytest.approx(1 / 6)
    c = EdgeCountDistribution("empirical", {0: 5}, 5, 4, 2, 4, seed=1)
    d = EdgeCountDistribution("empirical", {1: 7}, 7, 4, 2, 4, seed=1)
    assert tv_distance(c, d) == 1.0


def test_distribution_io_roundtrip(tmp_path):
    d = sample_edge_counts(gen_gnm(20, 60, seed=1), 6, samples=500, seed=2)
    p = tmp_path / "d.csv"
    write_distribution(d, p)
    back = read_distribution(p)
    assert back == d
    text = p.read_text().splitlines()
    assert text[0] == "z,count"
    zs = [int(r.split(",")[0]) for r in text[1:]]
    assert zs == sorted(zs)
    # byte-stable
    first = p.read_bytes()
    write_distribution(d, p)
    assert p.read_bytes() == first


def test_distribution_reader_rejects(tmp_path):
    d = exact_distribution(C4, 2)
    p = tmp_path / "d.csv"
    write_distribution(d, p)
    meta = p.with_suffix(".meta.json")

    import json

    good = json.loads(meta.read_text())
    bad = dict(good, extra="x")
    meta.write_text(json.dumps(bad))
    with pytest.raises(ValueError):
        read_distribution(p)
    meta.write_text(json.dumps({k: v for k, v in good.items() if k != "total"}))
    with pytest.raises(ValueError):
        read_distribution(p)
    meta.write_text(json.dumps(good))
    p.write_text("z,count\n1,4\n0,2\n")  # unsorted
    with pytest.raises(ValueError):
        read_distribution(p)
    meta.unlink()
    with pytest.raises(OSError):
        read_distribution(p)
