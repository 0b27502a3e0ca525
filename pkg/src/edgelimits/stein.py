"""Exchangeable-pair machinery for the standardized edge-count vector.

The pair process swaps one uniformly chosen member of S with one uniformly
chosen outsider.  For the centered, 1/n-scaled vector

    W  = (e(S)     - K  M/N) / n,     K  = C(k, 2),
    Wb = (e(S-bar) - Kb M/N) / n,     Kb = C(n-k, 2),

the swap average satisfies E[(W', Wb') - (W, Wb) | S] = -Lam (W, Wb) exactly,
with a 2x2 matrix Lam depending only on (n, k).  Sig is the exact covariance
of (W, Wb) under the uniform subset law, positive definite exactly when the
graph is irregular.  All identity checks run in exact rationals; doubles only
enter for matrix square roots and Monte Carlo diagnostics.

The diagnostics A, B, T follow the multivariate exchangeable-pair normal
approximation recipe: with D = (W', Wb') - (W, Wb) and U = Sig^{-1/2} D,

    lam_i = column-i absolute sum of Sig^{-1/2} Lam^{-1} Sig^{1/2},
    A     = sum_{ij} lam_i * sqrt(Var of E[(Sig^{-1/2} D D^T Sig^{-1/2})_ij | S]),
    B     = E[(lam_1|U_1| + lam_2|U_2|) * (|U_1| + |U_2|)^2],
    T     = (1/(4d)) * (A/2 + sqrt(sqrt(d) B + A^2/4))^2,   d = 2.

The inner swap average is evaluated exactly over all k(n-k) swaps for each
sampled S; only the outer average over S is Monte Carlo.  Conditioning on S
refines conditioning on the W vector, so the variance term in A is an upper
bound for the coarser one; records carry conditioning="subset" to flag this.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graphs import Graph, GraphStats
from .rng import stream
from .subsets import build_state

__all__ = [
    "WVector",
    "SteinMatrices",
    "SteinDiagnostics",
    "SingularCovarianceError",
    "lambda_scalar",
    "lambda_matrix",
    "sigma_matrix",
    "stein_matrices",
    "sqrt_2x2",
    "drift_check",
    "pair_moment_matrix",
    "sigma11_vs_lambda",
    "estimate_AB",
]


class SingularCovarianceError(ValueError):
    """Sig is not positive definite (the graph is regular), no square root."""


def _frac_mat(rows) -> np.ndarray:
    out = np.empty((2, 2), dtype=object)
    for i in range(2):
        for j in range(2):
            out[i, j] = Fraction(rows[i][j])
    return out


def _to_float(mat: np.ndarray) -> np.ndarray:
    return np.array([[float(mat[0, 0]), float(mat[0, 1])],
                     [float(mat[1, 0]), float(mat[1, 1])]], dtype=np.float64)


@dataclass(frozen=True)
class WVector:
    """Centered scaled pair (W, Wb) for one concrete subset."""

    W: Fraction
    Wbar: Fraction

    @classmethod
    def from_counts(cls, n: int, k: int, M: int, eS: int, eSbar: int) -> "WVector":
        N = n * (n - 1) // 2
        K = k * (k - 1) // 2
        Kb = (n - k) * (n - k - 1) // 2
        return cls(W=Fraction(eS * N - K * M, n * N),
                   Wbar=Fraction(eSbar * N - Kb * M, n * N))

    def floats(self) -> tuple[float, float]:
        return float(self.W), float(self.Wbar)


def lambda_scalar(n: int, k: int, M: int) -> Fraction:
    """Limit variance parameter for e(S)/n: ((n^2-k^2)k^2 / 2n^4) * M(N-M)/N^2."""
    N = n * (n - 1) // 2
    if not 2 <= k <= n - 2:
        raise ValueError(f"need 2 <= k <= n-2, got k={k}, n={n}")
    if not 0 <= M <= N:
        raise ValueError(f"need 0 <= M <= N={N}, got M={M}")
    return Fraction((n * n - k * k) * k * k, 2 * n**4) * Fraction(M * (N - M), N * N)


def lambda_matrix(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(Lam, Lam_inv) as exact 2x2 Fraction arrays; their product is checked."""
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    kb = n - k
    lam = _frac_mat([[Fraction(n + kb - 1, k * kb), Fraction(k - 1, k * kb)],
                     [Fraction(kb - 1, k * kb), Fraction(n + k - 1, k * kb)]])
    pref = Fraction(k * kb, 2 * n * (n - 1))
    inv = _frac_mat([[pref * (n + k - 1), pref * (1 - k)],
                     [pref * (1 - kb), pref * (n + kb - 1)]])
    prod = lam @ inv
    ident = _frac_mat([[1, 0], [0, 1]])
    if not (prod == ident).all():
        raise AssertionError(f"Lam * Lam_inv != I: {prod}")
    return lam, inv


def sigma_matrix(stats: GraphStats, k: int) -> np.ndarray:
    """Exact covariance of (W, Wb) under the uniform k-subset law, 2x2 Fractions."""
    n, N, M = stats.n, stats.N, stats.M
    if n < 4 or not 2 <= k <= n - 2:
        raise ValueError(f"need n >= 4 and 2 <= k <= n-2, got n={n}, k={k}")
    kb = n - k
    K = k * (k - 1) // 2
    Kb = kb * (kb - 1) // 2
    V = stats.V
    base = Fraction(M * (N - M))
    NV = N * V
    pref = Fraction(2 * K * Kb, n * n * N * N * (n - 2) * (n - 3))
    s11 = pref * (base + Fraction(k - 2, kb - 1) * NV)
    s22 = pref * (base + Fraction(kb - 2, k - 1) * NV)
    s12 = pref * (base - NV)
    return _frac_mat([[s11, s12], [s12, s22]])


def sqrt_2x2(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(Sig^{1/2}, Sig^{-1/2}) of a symmetric positive definite 2x2, float64.

    Closed form: Sig^{1/2} = (Sig + sqrt(det) I) / sqrt(tr + 2 sqrt(det)), and
    the inverse root via the 2x2 adjugate (det of the root is sqrt(det)).
    """
    a, b, c = float(sigma[0, 0]), float(sigma[0, 1]), float(sigma[1, 1])
    if abs(float(sigma[1, 0]) - b) > 1e-15 * max(1.0, abs(b)):
        raise ValueError("sigma not symmetric")
    det = a * c - b * b
    tr = a + c
    if det <= 0 or tr <= 0:
        raise SingularCovarianceError(
            f"covariance not positive definite (det={det:.3g}, tr={tr:.3g}); "
            "this happens exactly for regular graphs")
    s = math.sqrt(det)
    denom = math.sqrt(tr + 2 * s)
    half = np.array([[a + s, b], [b, c + s]], dtype=np.float64) / denom
    neg = np.array([[half[1, 1], -half[0, 1]], [-half[0, 1], half[0, 0]]]) / s
    return half, neg


@dataclass(frozen=True)
class SteinMatrices:
    """All pair matrices for one (n, k, M, V): exact shadows plus doubles.

    sigma_half / sigma_neg_half are None when Sig is singular (regular graph).
    """

    n: int
    k: int
    M: int
    lam_scalar: Fraction
    Lambda: np.ndarray
    LambdaInv: np.ndarray
    Sigma: np.ndarray
    Lambda_f: np.ndarray
    LambdaInv_f: np.ndarray
    Sigma_f: np.ndarray
    sigma_half: np.ndarray | None
    sigma_neg_half: np.ndarray | None

    @property
    def Sigma11(self) -> Fraction:
        return self.Sigma[0, 0]

    @property
    def is_positive_definite(self) -> bool:
        return self.sigma_half is not None


def stein_matrices(stats: GraphStats, k: int) -> SteinMatrices:
    lam, inv = lambda_matrix(stats.n, k)
    sigma = sigma_matrix(stats, k)
    sigma_f = _to_float(sigma)
    try:
        half, neg = sqrt_2x2(sigma_f)
    except SingularCovarianceError:
        half = neg = None
    return SteinMatrices(n=stats.n, k=k, M=stats.M,
                         lam_scalar=lambda_scalar(stats.n, k, stats.M),
                         Lambda=lam, LambdaInv=inv, Sigma=sigma,
                         Lambda_f=_to_float(lam), LambdaInv_f=_to_float(inv),
                         Sigma_f=sigma_f, sigma_half=half, sigma_neg_half=neg)


def drift_check(G: Graph, S) -> Fraction:
    """Max abs difference between the exact swap-average drift and -Lam (W, Wb).

    The swap average is built the long way, one delta per (x, xb) pair, so the
    comparison against the closed-form matrix is a genuine two-route check.
    The contract is that the result is exactly zero for every graph and subset.
    """
    st = build_state(G, S)
    n, k = G.n, st.k
    kb = n - k
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={k}")
    inside = st.members()
    outside = st.complement()
    u8 = G.dense_u8()
    blk = u8[np.ix_(inside, outside)].astype(np.int64)
    d_in = st.dS[inside]
    d_out = st.dS[outside]
    # route 1: literal per-swap deltas
    delta1 = d_out[None, :] - d_in[:, None] - blk
    db_in = G.deg[inside] - d_in
    db_out = G.deg[outside] - d_out
    delta2 = db_in[:, None] - db_out[None, :] - blk
    denom = n * k * kb
    mean1 = Fraction(int(delta1.sum()), denom)
    mean2 = Fraction(int(delta2.sum()), denom)
    # route 2: closed form
    w = WVector.from_counts(n, k, G.M, st.eS, st.complement_edges())
    lam, _ = lambda_matrix(n, k)
    pred1 = -(lam[0, 0] * w.W + lam[0, 1] * w.Wbar)
    pred2 = -(lam[1, 0] * w.W + lam[1, 1] * w.Wbar)
    return max(abs(mean1 - pred1), abs(mean2 - pred2))


def pair_moment_matrix(stats: GraphStats, k: int) -> np.ndarray:
    """Exact E[D D^T] for the swap difference D: equals Lam Sig + Sig Lam^T."""
    lam, _ = lambda_matrix(stats.n, k)
    sigma = sigma_matrix(stats, k)
    return lam @ sigma + sigma @ lam.T


def sigma11_vs_lambda(stats: GraphStats, k: int) -> float:
    """|Sig_11 / lambda - 1|; rejects M in {0, N} where lambda vanishes."""
    lam = lambda_scalar(stats.n, k, stats.M)
    if lam == 0:
        raise ValueError("lambda is zero (M on the boundary), no ratio")
    sigma = sigma_matrix(stats, k)
    return abs(float(sigma[0, 0] / lam - 1))


@dataclass(frozen=True)
class SteinDiagnostics:
    """MC estimates of the normal-approximation error terms."""

    n: int
    k: int
    M: int
    lam: float
    Sigma11: float
    lambda_weights: tuple[float, float]
    A_hat: float
    A_se: float
    B_hat: float
    B_se: float
    T_hat: float
    seed: int
    samples: int

    def record(self) -> dict:
        return {"n": self.n, "k": self.k, "M": self.M, "lambda": self.lam,
                "Sigma11": self.Sigma11, "A_hat": self.A_hat, "A_se": self.A_se,
                "B_hat": self.B_hat, "B_se": self.B_se, "T_hat": self.T_hat,
                "seed": self.seed, "conditioning": "subset"}


def _inner_moments(G: Graph, inside: np.ndarray, outside: np.ndarray,
                   neg_half_over_n: np.ndarray, lam_w: np.ndarray):
    """Exact swap-average moments for one subset S.

    Returns (c11, c12, c22, b_term): the three entries of E[D D^T | S] and the
    third-order absolute term, all averaged over the k*(n-k) swaps.
    """
    u8 = G.dense_u8()
    dS = u8[:, inside].sum(axis=1, dtype=np.int64)
    blk = u8[np.ix_(inside, outside)].astype(np.int32)
    d_in = dS[inside].astype(np.int32)
    d_out = dS[outside].astype(np.int32)
    db_in = (G.deg[inside] - dS[inside]).astype(np.int32)
    db_out = (G.deg[outside] - dS[outside]).astype(np.int32)
    delta1 = (d_out[None, :] - d_in[:, None] - blk).astype(np.float64)
    delta2 = (db_in[:, None] - db_out[None, :] - blk).astype(np.float64)
    npairs = delta1.size
    inv_n2 = 1.0 / (G.n * G.n)
    c11 = float((delta1 * delta1).sum()) / npairs * inv_n2
    c12 = float((delta1 * delta2).sum()) / npairs * inv_n2
    c22 = float((delta2 * delta2).sum()) / npairs * inv_n2
    r = neg_half_over_n
    u1 = np.abs(r[0, 0] * delta1 + r[0, 1] * delta2)
    u2 = np.abs(r[1, 0] * delta1 + r[1, 1] * delta2)
    b_term = float(((lam_w[0] * u1 + lam_w[1] * u2) * (u1 + u2) ** 2).mean())
    return c11, c12, c22, b_term


def estimate_AB(G: Graph, k: int, samples: int, seed: int,
                workers: int = 1) -> SteinDiagnostics:
    """Monte Carlo estimates of the A and B error terms and derived T.

    The expectation over swaps is exact for each sampled subset; only the
    subset average is stochastic.  Standard errors: B from the plain spread of
    per-subset values, A by the delta method through the square roots.
    """
    if samples < 100:
        raise ValueError(f"need samples >= 100, got {samples}")
    stats = G.stats()
    mats = stein_matrices(stats, k)
    if not mats.is_positive_definite:
        raise SingularCovarianceError("regular graph: Sigma singular, A/B undefined")
    neg, half = mats.sigma_neg_half, mats.sigma_half
    ratio = neg @ mats.LambdaInv_f @ half
    lam_w = np.abs(ratio).sum(axis=0)
    inside_all = np.arange(G.n)
    rngs = [stream(seed, w) for w in range(max(workers, 1))]
    quota = [samples // workers + (1 if i < samples % workers else 0)
             for i in range(workers)]

    def run(w: int) -> np.ndarray:
        out = np.empty((quota[w], 4), dtype=np.float64)
        rng = rngs[w]
        for t in range(quota[w]):
            perm = rng.permutation(inside_all)
            inside = np.sort(perm[:k])
            outside = np.sort(perm[k:])
            out[t] = _inner_moments(G, inside, outside, neg / G.n, lam_w)
        return out

    if workers == 1:
        rows = run(0)
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(workers)))
        rows = np.concatenate(parts, axis=0)

    m = rows.shape[0]
    cs = rows[:, :3]
    b_vals = rows[:, 3]
    # push each per-sample C(S) through Sig^{-1/2} on both sides
    mm = np.empty_like(cs)
    a, b, c = neg[0, 0], neg[0, 1], neg[1, 1]
    c11, c12, c22 = cs[:, 0], cs[:, 1], cs[:, 2]
    mm[:, 0] = a * a * c11 + 2 * a * b * c12 + b * b * c22
    mm[:, 1] = a * b * c11 + (a * c + b * b) * c12 + b * c * c22
    mm[:, 2] = b * b * c11 + 2 * b * c * c12 + c * c * c22
    var = mm.var(axis=0, ddof=1)
    dev = mm - mm.mean(axis=0)
    var_se = np.sqrt(np.maximum((dev ** 2).var(axis=0, ddof=1), 0.0) / m)
    sd = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        sd_se = np.where(sd > 0, var_se / (2 * sd), 0.0)
    wts = np.array([lam_w[0], lam_w[0] + lam_w[1], lam_w[1]])  # (i,j) multiplicity
    # off-diagonal (i,j)=(1,2),(2,1) share one mm column; weights lam_1+lam_2
    A_hat = float(wts @ sd)
    A_se = float(wts @ sd_se)
    B_hat = float(b_vals.mean())
    B_se = float(b_vals.std(ddof=1) / math.sqrt(m))
    d = 2.0
    T_hat = (1.0 / (4 * d)) * (A_hat / 2 + math.sqrt(math.sqrt(d) * B_hat
                                                    + A_hat ** 2 / 4)) ** 2
    return SteinDiagnostics(
        n=G.n, k=k, M=G.M, lam=float(mats.lam_scalar),
        Sigma11=float(mats.Sigma11), lambda_weights=(float(lam_w[0]), float(lam_w[1])),
        A_hat=A_hat, A_se=A_se, B_hat=B_hat, B_se=B_se, T_hat=T_hat,
        seed=seed, samples=samples)
