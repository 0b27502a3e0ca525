"""Dense random graphs and their degree statistics.

A Graph is an immutable simple graph on vertices 0..n-1 stored as a packed
bit matrix (n rows of n bits each).  Two generators are provided: a uniform
M-edge graph and an independent-edge graph with probability p.  The statistics
object carries the quantities every downstream formula needs: the edge count
M, the path-on-three-vertices count P = sum_v C(d(v), 2), and n times the
degree variance, kept as the exact integer Vn = n*sum d(v)^2 - 4M^2 so the
linear identity 2Pn = Vn + 4M^2 - 2Mn can be asserted without rationals.

Vertex labels are 0-based everywhere.  The text file format is a header line
"n M" followed by M lines "u v" with u < v.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .rng import stream

__all__ = [
    "Graph",
    "GraphStats",
    "gen_gnm",
    "gen_gnp",
    "graph_from_edges",
    "stats",
    "third_moment_stat",
    "write_graph",
    "read_graph",
    "band_warning",
]

_WORD = 64


def _edge_index_to_pair(e: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices 0..C(n,2)-1 to pairs (u, v), u < v, row-major.

    Row u holds indices [f(u), f(u+1)) with f(u) = u*n - u*(u+1)/2.
    """
    e = np.asarray(e, dtype=np.int64)
    # float solve of u^2 - (2n-1)u + 2e = 0, then exact correction
    u = np.floor((2 * n - 1 - np.sqrt((2 * n - 1) ** 2 - 8.0 * e)) / 2).astype(np.int64)
    u = np.clip(u, 0, n - 2)
    f = u * n - (u * (u + 1)) // 2
    too_far = f > e
    u[too_far] -= 1
    f[too_far] = u[too_far] * n - (u[too_far] * (u[too_far] + 1)) // 2
    f_next = (u + 1) * n - ((u + 1) * (u + 2)) // 2
    bump = f_next <= e
    u[bump] += 1
    f[bump] = f_next[bump]
    v = e - f + u + 1
    return u, v


def _pair_to_edge_index(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    return u * n - (u * (u + 1)) // 2 + (v - u - 1)


@dataclass(frozen=True)
class Graph:
    """Immutable simple graph with bit-row adjacency.

    `packed` has shape (n, w) with w = ceil(n/64); bit v of row u (little-end
    word order) is 1 iff uv is an edge.  Derived dense views are cached
    lazily; they are only materialized by the sampling / swap engines.
    """

    n: int
    packed: np.ndarray
    deg: np.ndarray
    M: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.n * (self.n - 1) // 2

    def has_edge(self, u: int, v: int) -> bool:
        return bool((int(self.packed[u, v >> 6]) >> (v & 63)) & 1)

    def row_bits(self, v: int) -> int:
        """Adjacency row v as a Python int bitmask."""
        rows = self._cache.get("rows")
        if rows is None:
            rows = [int.from_bytes(self.packed[u].tobytes(), "little") for u in range(self.n)]
            self._cache["rows"] = rows
        return rows[v]

    def dense_u8(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix, dtype uint8, shape (n, n)."""
        a = self._cache.get("u8")
        if a is None:
            bits = np.unpackbits(self.packed.view(np.uint8), axis=1, bitorder="little")
            a = np.ascontiguousarray(bits[:, : self.n])
            self._cache["u8"] = a
        return a

    def dense_f32(self) -> np.ndarray:
        a = self._cache.get("f32")
        if a is None:
            a = self.dense_u8().astype(np.float32)
            self._cache["f32"] = a
        return a

    def edges(self) -> np.ndarray:
        """Edge list as an (M, 2) array with u < v, sorted lexicographically."""
        u8 = self.dense_u8()
        uu, vv = np.nonzero(np.triu(u8, 1))
        return np.column_stack([uu, vv]).astype(np.int64)

    def stats(self) -> "GraphStats":
        return stats(self)

    def validate(self) -> None:
        u8 = self.dense_u8()
        if u8.shape != (self.n, self.n):
            raise ValueError("adjacency shape mismatch")
        if np.any(np.diag(u8)):
            raise ValueError("self-loop bit set")
        if not np.array_equal(u8, u8.T):
            raise ValueError("adjacency not symmetric")
        d = u8.sum(axis=1, dtype=np.int64)
        if not np.array_equal(d, self.deg):
            raise ValueError("degree vector disagrees with adjacency")
        if int(d.sum()) != 2 * self.M:
            raise ValueError("sum of degrees != 2M")


@dataclass(frozen=True)
class GraphStats:
    """Exact degree statistics of a graph.

    Vn is the integer n*sum(d^2) - 4M^2 = n * (n * degree variance); V itself
    is the rational Vn/n.  P counts paths on three vertices.
    """

    n: int
    N: int
    M: int
    Vn: int
    P: int

    @property
    def p(self) -> Fraction:
        return Fraction(self.M, self.N)

    @property
    def dbar(self) -> Fraction:
        return Fraction(2 * self.M, self.n)

    @property
    def V(self) -> Fraction:
        return Fraction(self.Vn, self.n)

    @property
    def p_float(self) -> float:
        return self.M / self.N

    @property
    def dbar_float(self) -> float:
        return 2 * self.M / self.n

    @property
    def V_float(self) -> float:
        return self.Vn / self.n

    @property
    def is_regular(self) -> bool:
        return self.Vn == 0


def graph_from_edges(n: int, edges) -> Graph:
    """Build a Graph from an iterable of (u, v) pairs, u != v, 0-based."""
    if n < 1:
        raise ValueError(f"need n >= 1, got n={n}")
    if not isinstance(edges, np.ndarray):
        edges = list(edges)
    ea = np.array(edges, dtype=np.int64).reshape(-1, 2)
    w = (n + _WORD - 1) // _WORD
    packed = np.zeros((n, w), dtype=np.uint64)
    if ea.size:
        u, v = ea[:, 0], ea[:, 1]
        if np.any(u == v):
            raise ValueError("self-loop in edge list")
        if np.any((u < 0) | (u >= n) | (v < 0) | (v >= n)):
            raise ValueError("vertex out of range in edge list")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        idx = _pair_to_edge_index(lo, hi, n)
        if len(np.unique(idx)) != len(idx):
            raise ValueError("duplicate edge in edge list")
        ones = np.uint64(1)
        np.bitwise_or.at(packed, (u, (v >> 6)), ones << (v & 63).astype(np.uint64))
        np.bitwise_or.at(packed, (v, (u >> 6)), ones << (u & 63).astype(np.uint64))
    deg = np.bitwise_count(packed).sum(axis=1, dtype=np.int64)
    return Graph(n=n, packed=packed, deg=deg, M=ea.shape[0])


def _graph_from_edge_indices(n: int, idx: np.ndarray) -> Graph:
    u, v = _edge_index_to_pair(idx, n)
    return graph_from_edges(n, np.column_stack([u, v]))


def gen_gnm(n: int, M: int, seed: int) -> Graph:
    """Uniform graph with exactly M edges on n vertices.

    The M edge indices are a uniform M-subset of 0..N-1: a shuffle prefix for
    dense M, batched rejection into a set for sparse M (< N/64).  Deterministic
    given seed (stream 0).
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got n={n}")
    N = n * (n - 1) // 2
    if not 0 <= M <= N:
        raise ValueError(f"need 0 <= M <= C(n,2) = {N}, got M={M}")
    rng = stream(seed)
    if M >= N // 64:
        idx = rng.permutation(N)[:M]
    else:
        chosen: set[int] = set()
        while len(chosen) < M:
            need = M - len(chosen)
            draw = rng.integers(0, N, size=max(16, int(1.2 * need)))
            for x in draw:
                chosen.add(int(x))
                if len(chosen) == M:
                    break
        idx = np.fromiter(chosen, dtype=np.int64, count=M)
    return _graph_from_edge_indices(n, np.asarray(idx, dtype=np.int64))


def gen_gnp(n: int, p: float, seed: int) -> Graph:
    """Independent-edge graph: each of the C(n,2) pairs present with probability p."""
    if n < 2:
        raise ValueError(f"need n >= 2, got n={n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"need 0 <= p <= 1, got p={p}")
    N = n * (n - 1) // 2
    rng = stream(seed)
    mask = rng.random(N) < p
    idx = np.flatnonzero(mask)
    return _graph_from_edge_indices(n, idx)


def stats(G: Graph) -> GraphStats:
    """Exact degree statistics; asserts the integer identity 2Pn = Vn + 4M^2 - 2Mn."""
    sum_sq = int(np.dot(G.deg, G.deg))
    M = G.M
    n = G.n
    Vn = n * sum_sq - 4 * M * M
    P = sum(dv * (dv - 1) // 2 for dv in map(int, G.deg))
    assert 2 * P * n == Vn + 4 * M * M - 2 * M * n, "degree identity violated"
    assert Vn >= 0
    return GraphStats(n=n, N=G.N, M=M, Vn=Vn, P=P)


def third_moment_stat(G: Graph) -> float:
    """(1/n) * sum_v |d(v) - 2M/n|^3, computed exactly then rounded once.

    Equals sum |n*d(v) - 2M|^3 / n^4.  The caller compares against n^{3/2+eps}.
    """
    n = G.n
    c = 2 * G.M
    total = sum(abs(n * int(dv) - c) ** 3 for dv in G.deg)
    return float(Fraction(total, n**4))


def band_warning(G: Graph, k: int | None = None, delta: float = 0.1) -> None:
    """Warn (never reject) when M/N or k/n leaves [delta, 1-delta].

    The dense-regime guarantees are only claimed inside the band; callers opt
    in by invoking this check.
    """
    N = G.N
    dens = G.M / N if N else 0.0
    if not delta <= dens <= 1 - delta:
        warnings.warn(
            f"edge density M/N = {dens:.4f} outside [{delta}, {1 - delta}]",
            stacklevel=2,
        )
    if k is not None:
        frac = k / G.n
        if not delta <= frac <= 1 - delta:
            warnings.warn(
                f"subset fraction k/n = {frac:.4f} outside [{delta}, {1 - delta}]",
                stacklevel=2,
            )


def write_graph(G: Graph, path: str | Path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        _write_graph_stream(G, fh)


def _write_graph_stream(G: Graph, fh: io.TextIOBase) -> None:
    fh.write(f"{G.n} {G.M}\n")
    for u, v in G.edges():
        fh.write(f"{u} {v}\n")


def read_graph(path: str | Path) -> Graph:
    """Parse the text format; rejects duplicates, self-loops, bad ranges, wrong counts."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError("empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"bad header {lines[0]!r}: want 'n M'")
    n, M = int(head[0]), int(head[1])
    if len(lines) - 1 != M:
        raise ValueError(f"header claims {M} edges, file has {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {ln!r}")
        u, v = int(parts[0]), int(parts[1])
        if not u < v:
            raise ValueError(f"edge line {ln!r}: need u < v")
        edges.append((u, v))
    return graph_from_edges(n, edges)
