"""k-subsets of a graph: swap dynamics, exact enumeration, MC sampling.

The central quantity is e(S), the edge count of the induced subgraph on a
k-subset S.  Moving one vertex x out of S and one vertex xb in changes it by

    e(S') - e(S) = dS(xb) - dS(x) - [x ~ xb],

where dS(y) counts edges from y to S.  SubsetState caches the full dS vector
so a swap is an O(n) update; the exact enumeration oracle walks all C(n,k)
subsets in a revolving-door Gray order (one swap per step) and never rebuilds.

Monte Carlo sampling draws each subset independently and uniformly (no swap
chain): a batch of subsets becomes a 0/1 indicator matrix X and the edge
counts are read off one sgemm, e = diag(X A X^T)/2, with every intermediate an
exact small integer in float32.  Samples are reproducible given (seed,
workers): worker w consumes RNG stream w.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator

import numpy as np

from .graphs import Graph
from .rng import stream

__all__ = [
    "SubsetState",
    "EdgeCountDistribution",
    "BudgetError",
    "build_state",
    "swap_delta",
    "apply_swap",
    "revolving_door_swaps",
    "exact_distribution",
    "exact_joint_distribution",
    "sample_edge_counts",
    "split_sample",
    "fixed_subset_degree_stats",
    "subset_edge_count",
    "write_distribution",
    "read_distribution",
    "tv_distance",
]

# float32 holds integers exactly below 2**24; the sgemm engine needs every
# partial sum (at most 2*C(k,2)) inside that range
_F32_EXACT = 1 << 24


class BudgetError(RuntimeError):
    """Enumeration would exceed the subset budget; no partial answer is produced."""


@dataclass
class SubsetState:
    """A k-subset with cached edge count and dS vector.

    mask is a boolean membership vector of length n; dS[v] counts edges from v
    to S for every vertex v (members included).
    """

    G: Graph
    mask: np.ndarray
    k: int
    eS: int
    dS: np.ndarray

    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def complement(self) -> np.ndarray:
        return np.flatnonzero(~self.mask)

    def cross_edges(self) -> int:
        """e(S, S-bar): edges with one endpoint on each side."""
        return int(self.dS[~self.mask].sum())

    def complement_edges(self) -> int:
        return self.G.M - self.eS - self.cross_edges()


def build_state(G: Graph, S) -> SubsetState:
    """State for the subset S (iterable of distinct vertices)."""
    idx = np.asarray(sorted(int(v) for v in S), dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= G.n):
        raise ValueError("subset vertex out of range")
    if np.any(idx[1:] == idx[:-1]):
        raise ValueError("subset has repeated vertices")
    mask = np.zeros(G.n, dtype=bool)
    mask[idx] = True
    u8 = G.dense_u8()
    dS = u8[:, idx].sum(axis=1, dtype=np.int64) if idx.size else np.zeros(G.n, dtype=np.int64)
    eS = int(dS[idx].sum()) // 2
    return SubsetState(G=G, mask=mask, k=int(idx.size), eS=eS, dS=dS)


def swap_delta(G: Graph, st: SubsetState, x: int, xb: int) -> int:
    """e(S \\ {x} + {xb}) - e(S) without touching the state."""
    if not st.mask[x]:
        raise ValueError(f"vertex {x} not in S")
    if st.mask[xb]:
        raise ValueError(f"vertex {xb} already in S")
    return int(st.dS[xb]) - int(st.dS[x]) - int(G.has_edge(x, xb))


def apply_swap(st: SubsetState, x: int, xb: int) -> SubsetState:
    """Swap x out, xb in; updates mask, eS, dS in place and returns st."""
    G = st.G
    st.eS += swap_delta(G, st, x, xb)
    st.mask[x] = False
    st.mask[xb] = True
    u8 = G.dense_u8()
    st.dS += u8[xb]
    st.dS -= u8[x]
    return st


def revolving_door_swaps(n: int, k: int) -> Iterator[tuple[int, int]]:
    """Yield (out, in) pairs joining consecutive k-subsets of {0..n-1}.

    The order is the classical revolving-door Gray sequence: starting from
    {0..k-1}, each yielded swap produces the next subset, every k-subset
    appears exactly once, and the walk ends at {0..k-2, n-1}.  Implemented as
    an explicit stack over the concatenation recursion
    seq(m, j) = seq(m-1, j) ++ reversed(seq(m-1, j-1)) * {m-1},
    emitting only the junction swap of each internal node.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    # stack entries: (m, j, rev) for nodes,
    #                (-1, out, in) for pending junction swaps
    stack: list[tuple[int, int, int]] = [(n, k, 0)]
    while stack:
        m, j, rev = stack.pop()
        if m == -1:
            yield j, rev  # (out, in) smuggled through the tuple slots
            continue
        if j == 0 or j == m:
            continue
        if j >= 2:
            out, vin = j - 2, m - 1
        else:
            out, vin = m - 2, m - 1
        if rev:
            stack.append((m - 1, j, 1))
            stack.append((-1, vin, out))
            stack.append((m - 1, j - 1, 0))
        else:
            stack.append((m - 1, j - 1, 1))
            stack.append((-1, out, vin))
            stack.append((m - 1, j, 0))


@dataclass(frozen=True)
class EdgeCountDistribution:
    """Distribution of e(S) over k-subsets, exact or empirical.

    counts maps integer edge counts to occurrence counts; total is C(n,k) for
    kind="exact" or the number of MC samples for kind="empirical".
    """

    kind: str
    counts: dict[int, int]
    total: int
    n: int
    k: int
    M: int
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("exact", "empirical"):
            raise ValueError(f"kind must be exact|empirical, got {self.kind!r}")
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts do not sum to total")
        kk = self.k * (self.k - 1) // 2
        if self.counts and not (0 <= min(self.counts) and max(self.counts) <= kk):
            raise ValueError("support outside [0, C(k,2)]")

    def support(self) -> np.ndarray:
        return np.array(sorted(self.counts), dtype=np.int64)

    def mean(self) -> Fraction:
        return Fraction(sum(z * c for z, c in self.counts.items()), self.total)

    def prob(self, z: int) -> float:
        return self.counts.get(z, 0) / self.total

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(sorted support, matching counts) as int64 arrays."""
        zs = self.support()
        cs = np.array([self.counts[int(z)] for z in zs], dtype=np.int64)
        return zs, cs


def tv_distance(a: EdgeCountDistribution, b: EdgeCountDistribution) -> float:
    """Total-variation distance, computed with an exact integer numerator."""
    num = 0
    for z in set(a.counts) | set(b.counts):
        num += abs(a.counts.get(z, 0) * b.total - b.counts.get(z, 0) * a.total)
    return float(Fraction(num, 2 * a.total * b.total))


def exact_distribution(G: Graph, k: int, budget: int = 10**8) -> EdgeCountDistribution:
    """Exact counts of {S : e(S) = z} by revolving-door enumeration.

    Refuses outright when C(n, k) exceeds the budget.
    """
    n = G.n
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}")
    total = math.comb(n, k)
    if total > budget:
        raise BudgetError(f"C({n},{k}) = {total} exceeds budget {budget}")
    rows = [G.row_bits(v) for v in range(n)]
    mask = (1 << k) - 1
    e = sum((rows[v] & mask).bit_count() for v in range(k)) // 2
    counts_arr = np.zeros(k * (k - 1) // 2 + 1, dtype=np.int64)
    counts_arr[e] += 1
    for out, vin in revolving_door_swaps(n, k):
        e += (rows[vin] & mask).bit_count() - (rows[out] & mask).bit_count() \
            - ((rows[out] >> vin) & 1)
        mask ^= (1 << out) | (1 << vin)
        counts_arr[e] += 1
    counts = {int(z): int(c) for z, c in enumerate(counts_arr) if c}
    return EdgeCountDistribution(kind="exact", counts=counts, total=total,
                                 n=n, k=k, M=G.M)


def exact_joint_distribution(G: Graph, k: int, budget: int = 10**8) -> dict[tuple[int, int], int]:
    """Exact counts of (e(S), e(S-bar)) pairs over all k-subsets."""
    n = G.n
    total = math.comb(n, k)
    if total > budget:
        raise BudgetError(f"C({n},{k}) = {total} exceeds budget {budget}")
    rows = [G.row_bits(v) for v in range(n)]
    full = (1 << n) - 1
    mask = (1 << k) - 1
    e = sum((rows[v] & mask).bit_count() for v in range(k)) // 2
    cmask = full ^ mask
    eb = sum((rows[v] & cmask).bit_count() for v in range(n) if (cmask >> v) & 1) // 2
    joint: dict[tuple[int, int], int] = {(e, eb): 1}
    for out, vin in revolving_door_swaps(n, k):
        adj = (rows[out] >> vin) & 1
        e += (rows[vin] & mask).bit_count() - (rows[out] & mask).bit_count() - adj
        # complement swap: vin leaves S-bar, out enters
        eb += (rows[out] & cmask).bit_count() - (rows[vin] & cmask).bit_count() - adj
        step = (1 << out) | (1 << vin)
        mask ^= step
        cmask ^= step
        key = (e, eb)
        joint[key] = joint.get(key, 0) + 1
    return joint


def _batch_size(n: int) -> int:
    return max(128, min(4096, (1 << 21) // max(n, 1)))


def _edge_counts_dense(G: Graph, idx: np.ndarray) -> np.ndarray:
    """Edge counts for a batch of subsets given as an (B, k) index array."""
    n = G.n
    B, k = idx.shape
    if k * (k - 1) // 2 >= _F32_EXACT or n >= _F32_EXACT:
        A = G.dense_u8().astype(np.float64)
    else:
        A = G.dense_f32()
    X = np.zeros((B, n), dtype=A.dtype)
    np.put_along_axis(X, idx, 1.0, axis=1)
    Y = X @ A
    e2 = (X * Y).sum(axis=1, dtype=np.float64)
    return np.rint(e2).astype(np.int64) >> 1


def subset_edge_count(G: Graph, S) -> int:
    """e(S) for one subset, exact, via the dense adjacency block."""
    idx = np.asarray(list(S), dtype=np.int64)
    if idx.size < 2:
        return 0
    blk = G.dense_u8()[np.ix_(idx, idx)]
    return int(blk.sum(dtype=np.int64)) // 2


def _worker_counts(G: Graph, k: int, m: int, rng: np.random.Generator) -> dict[int, int]:
    counts: dict[int, int] = {}
    B = _batch_size(G.n)
    done = 0
    while done < m:
        b = min(B, m - done)
        u = rng.random((b, G.n))
        idx = u.argpartition(k - 1, axis=1)[:, :k]
        es = _edge_counts_dense(G, idx)
        zs, cs = np.unique(es, return_counts=True)
        for z, c in zip(zs, cs):
            z = int(z)
            counts[z] = counts.get(z, 0) + int(c)
        done += b
    return counts


def sample_edge_counts(G: Graph, k: int, samples: int, seed: int,
                       workers: int = 1) -> EdgeCountDistribution:
    """Empirical distribution of e(S) over independent uniform k-subsets.

    Each sample is a fresh uniform draw (k smallest of n iid uniforms), not a
    step of any chain.  Worker w consumes stream (seed, w); the result is
    deterministic given (seed, workers).
    """
    if not 2 <= k <= G.n - 2:
        raise ValueError(f"need 2 <= k <= n-2, got k={k}, n={G.n}")
    if samples < 1:
        raise ValueError("need samples >= 1")
    if workers < 1:
        raise ValueError("need workers >= 1")
    quota = [samples // workers + (1 if i < samples % workers else 0)
             for i in range(workers)]
    parts: list[dict[int, int]] = []
    if workers == 1:
        parts.append(_worker_counts(G, k, samples, stream(seed, 0)))
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_worker_counts, G, k, q, stream(seed, w))
                    for w, q in enumerate(quota) if q]
            parts = [f.result() for f in futs]
    counts: dict[int, int] = {}
    for part in parts:
        for z, c in part.items():
            counts[z] = counts.get(z, 0) + c
    return EdgeCountDistribution(kind="empirical", counts=counts, total=samples,
                                 n=G.n, k=k, M=G.M, seed=seed)


def split_sample(G: Graph, k: int, t: int, seed: int):
    """Draw S' (uniform (k-t)-set) and T (uniform t-set of the complement).

    Returns (S', T, e(S'), e(S' + T) - e(S')).  The union S' + T is a uniform
    k-set, so the pieces can stand in for a split of a uniform draw.
    """
    if not (1 <= t and 2 * t <= k):
        raise ValueError(f"need 1 <= t <= k/2, got t={t}, k={k}")
    if not 2 <= k <= G.n - 2:
        raise ValueError(f"need 2 <= k <= n-2, got k={k}, n={G.n}")
    perm = stream(seed).permutation(G.n)
    sp = np.sort(perm[: k - t])
    ts = np.sort(perm[k - t: k])
    e_sp = subset_edge_count(G, sp)
    e_union = subset_edge_count(G, perm[:k])
    return sp, ts, e_sp, e_union - e_sp


def fixed_subset_degree_stats(G: Graph, S) -> tuple[Fraction, Fraction, Fraction]:
    """Exact (Var_x dS(x), Var_xb dS(xb), Cov_xb(dS(xb), dSbar(xb))).

    x is uniform over S, xb uniform over the complement; dSbar(y) counts edges
    from y to the complement, i.e. deg(y) - dS(y).
    """
    st = build_state(G, S)
    k = st.k
    kb = G.n - k
    if k < 1 or kb < 1:
        raise ValueError("need a proper nonempty subset")
    a_in = st.dS[st.mask].astype(object)
    a_out = st.dS[~st.mask].astype(object)
    b_out = G.deg[~st.mask].astype(object) - a_out

    def var(vals, m):
        s1 = int(sum(vals))
        s2 = int(sum(v * v for v in vals))
        return Fraction(m * s2 - s1 * s1, m * m)

    sab = int(sum(a * b for a, b in zip(a_out, b_out)))
    sa, sb = int(sum(a_out)), int(sum(b_out))
    cov = Fraction(kb * sab - sa * sb, kb * kb)
    return var(a_in, k), var(a_out, kb), cov


# ---------------------------------------------------------------------------
# file format: CSV "z,count" sorted by z, with sidecar "<stem>.meta.json"
# holding {n, k, M, kind, total, seed}


def _sidecar(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta.json")


def write_distribution(dist: EdgeCountDistribution, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z", "count"])
        for z in sorted(dist.counts):
            w.writerow([z, dist.counts[z]])
    meta = {"n": dist.n, "k": dist.k, "M": dist.M, "kind": dist.kind,
            "total": dist.total, "seed": dist.seed}
    with open(_sidecar(path), "w", encoding="ascii", newline="\n") as fh:
        fh.write(json.dumps(meta, sort_keys=True, separators=(",", ": ")))
        fh.write("\n")


_META_KEYS = {"n", "k", "M", "kind", "total", "seed"}


def read_distribution(path: str | Path) -> EdgeCountDistribution:
    path = Path(path)
    with open(_sidecar(path), "r", encoding="ascii") as fh:
        meta = json.load(fh)
    if set(meta) != _META_KEYS:
        raise ValueError(f"sidecar keys {sorted(meta)} != {sorted(_META_KEYS)}")
    counts: dict[int, int] = {}
    with open(path, "r", encoding="ascii", newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header != ["z", "count"]:
            raise ValueError(f"bad distribution header {header!r}")
        prev = None
        for row in rd:
            z, c = int(row[0]), int(row[1])
            if prev is not None and z <= prev:
                raise ValueError("distribution rows not sorted by z")
            prev = z
            counts[z] = c
    return EdgeCountDistribution(kind=meta["kind"], counts=counts,
                                 total=meta["total"], n=meta["n"], k=meta["k"],
                                 M=meta["M"], seed=meta["seed"])
