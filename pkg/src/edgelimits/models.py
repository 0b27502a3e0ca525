"""Reference models for e(S) and the distance statistics against them.

Two limit models appear.  The normal model N(K M/N, lam n^2) approximates the
full law of e(S).  The binomial model Bin((k-t)t + C(t,2), p) matches in law
the increment e(S) - e(S') when a uniform k-set S is split as S' plus t fresh
vertices and the graph itself is an independent-edge graph with density p.

Distances are one-sided-careful: empirical CDFs are right-continuous steps,
and sup-type statistics evaluate both the value and the left limit at every
jump, which is where the sup of |step - smooth| lives.

Accuracy notes.  The normal CDF goes through the complementary error function
of scipy.special (Cephes rational/continued-fraction approximation), giving
absolute error well under 1e-12.  The binomial pmf is a log-gamma sum in
120-bit floating point (gmpy2), with 1 - p formed exactly as a rational
before rounding; relative error is far below the 1e-12 contract, which plain
double log-gamma summation misses by two orders of magnitude.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np
from scipy.special import erfc

from .stein import lambda_scalar
from .subsets import EdgeCountDistribution

__all__ = [
    "NormalModel",
    "BinomialModel",
    "DegenerateModelError",
    "normal_model",
    "normal_cdf",
    "normal_pdf",
    "normal_pdf_bounds",
    "binomial_model",
    "binomial_trials",
    "binomial_pmf",
    "binomial_pmf_exact",
    "binomial_bounds",
    "kolmogorov_distance",
    "interval_error",
    "llt_error",
    "interval_upper_check",
    "metric_record",
]

_CTX = gmpy2.context(precision=120)


class DegenerateModelError(ValueError):
    """The model has zero variance; densities and CDFs are undefined."""


@dataclass(frozen=True)
class NormalModel:
    """N(K M/N, lam n^2) with exact-rational shadows of mean and variance."""

    n: int
    k: int
    M: int
    mu_frac: Fraction
    sigma2_frac: Fraction

    @property
    def mu(self) -> float:
        return float(self.mu_frac)

    @property
    def sigma2(self) -> float:
        return float(self.sigma2_frac)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def cdf(self, z):
        return normal_cdf(self, z)

    def pdf(self, z):
        return normal_pdf(self, z)


def normal_model(n: int, k: int, M: int) -> NormalModel:
    lam = lambda_scalar(n, k, M)  # validates ranges
    K = k * (k - 1) // 2
    N = n * (n - 1) // 2
    return NormalModel(n=n, k=k, M=M, mu_frac=Fraction(K * M, N),
                       sigma2_frac=lam * n * n)


def _require_spread(model: NormalModel) -> float:
    if model.sigma2 <= 0:
        raise DegenerateModelError(
            f"normal model has sigma2={model.sigma2}; need M strictly inside (0, N)")
    return model.sigma


def normal_cdf(model: NormalModel, z):
    """P(Z <= z); accepts scalars (including +-inf) or arrays."""
    sigma = _require_spread(model)
    x = (np.asarray(z, dtype=np.float64) - model.mu) / sigma
    out = 0.5 * erfc(-x / math.sqrt(2.0))
    return float(out) if np.isscalar(z) or np.ndim(z) == 0 else out


def normal_pdf(model: NormalModel, z):
    sigma = _require_spread(model)
    x = (np.asarray(z, dtype=np.float64) - model.mu) / sigma
    out = np.exp(-0.5 * x * x) / (sigma * math.sqrt(2.0 * math.pi))
    return float(out) if np.isscalar(z) or np.ndim(z) == 0 else out


def normal_pdf_bounds(model: NormalModel) -> tuple[float, float]:
    """(sup of the density, Lipschitz constant of the density).

    The density is at most 1/(sigma sqrt(2 pi)) and changes by at most
    |x - y| / (sigma^2 sqrt(2 pi e)).
    """
    sigma = _require_spread(model)
    return (1.0 / (sigma * math.sqrt(2.0 * math.pi)),
            1.0 / (sigma * sigma * math.sqrt(2.0 * math.pi * math.e)))


@dataclass(frozen=True)
class BinomialModel:
    """Bin(trials, p) with p kept as an exact rational."""

    trials: int
    p_frac: Fraction

    def __post_init__(self):
        if self.trials < 0:
            raise ValueError(f"trials must be >= 0, got {self.trials}")
        if not 0 <= self.p_frac <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p_frac}")

    @property
    def p(self) -> float:
        return float(self.p_frac)

    @property
    def mean_frac(self) -> Fraction:
        return self.trials * self.p_frac

    @property
    def variance_frac(self) -> Fraction:
        return self.trials * self.p_frac * (1 - self.p_frac)

    @property
    def variance(self) -> float:
        return float(self.variance_frac)


def binomial_trials(k: int, t: int) -> int:
    """Pair slots a t-set adds to a (k-t)-set: (k-t)t + C(t,2)."""
    if not 1 <= t <= k:
        raise ValueError(f"need 1 <= t <= k, got t={t}, k={k}")
    return (k - t) * t + t * (t - 1) // 2


def binomial_model(k: int, t: int, p) -> BinomialModel:
    return BinomialModel(trials=binomial_trials(k, t), p_frac=Fraction(p))


def binomial_pmf(model: BinomialModel, m: int) -> float:
    """P(Bin = m) to better than 1e-12 relative, via 120-bit log-gamma."""
    n = model.trials
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= trials={n}, got m={m}")
    p = model.p_frac
    q = 1 - p  # exact rational, not a rounded double
    if p == 0:
        return 1.0 if m == 0 else 0.0
    if q == 0:
        return 1.0 if m == n else 0.0
    with _CTX:
        lg = (gmpy2.lgamma(n + 1)[0] - gmpy2.lgamma(m + 1)[0]
              - gmpy2.lgamma(n - m + 1)[0])
        lp = gmpy2.log(gmpy2.mpq(p.numerator, p.denominator))
        lq = gmpy2.log(gmpy2.mpq(q.numerator, q.denominator))
        return float(gmpy2.exp(lg + m * lp + (n - m) * lq))


def binomial_pmf_exact(trials: int, p: Fraction, m: int) -> Fraction:
    """Exact rational pmf, the slow reference route."""
    p = Fraction(p)
    return math.comb(trials, m) * p**m * (1 - p) ** (trials - m)


def binomial_bounds(model: BinomialModel) -> tuple[float, float]:
    """(point bound, Lipschitz slope): pmf <= sqrt(pi/(8 Var)) everywhere and
    |pmf(m') - pmf(m)| <= (pi/(4 Var)) |m' - m|."""
    var = model.variance
    if var <= 0:
        raise DegenerateModelError("binomial model has zero variance")
    return math.sqrt(math.pi / (8.0 * var)), math.pi / (4.0 * var)


def _cdf_steps(dist: EdgeCountDistribution) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not dist.counts:
        raise ValueError("empty distribution")
    zs, cs = dist.arrays()
    hi = np.cumsum(cs, dtype=np.float64) / dist.total
    lo = hi - cs / dist.total
    return zs, lo, hi


def kolmogorov_distance(dist: EdgeCountDistribution, model: NormalModel) -> float:
    """sup_z |F_hat(z) - Phi(z)| with both one-sided values at every jump."""
    zs, lo, hi = _cdf_steps(dist)
    phi = normal_cdf(model, zs)
    return float(np.maximum(np.abs(hi - phi), np.abs(lo - phi)).max())


def interval_error(dist: EdgeCountDistribution, model: NormalModel,
                   z0: float, z1: float) -> float:
    """|P_hat(e in [z0, z1]) - P(Z in [z0, z1])|, closed interval, inf allowed."""
    if not z0 <= z1:
        raise ValueError(f"need z0 <= z1, got ({z0}, {z1})")
    zs, cs = dist.arrays()
    mass = int(cs[(zs >= z0) & (zs <= z1)].sum()) / dist.total
    model_mass = normal_cdf(model, z1) - normal_cdf(model, z0)
    return abs(mass - model_mass)


def llt_error(dist: EdgeCountDistribution, model: NormalModel,
              window: float = 2.0) -> float:
    """max over integers z with |z - mu| <= window*sigma of n|P_hat(z) - pdf(z)|.

    Tails are excluded on purpose: point probabilities are only resolvable by
    MC near the peak, so the far region is covered by interval_upper_check
    instead.  Requires an exact distribution or at least 1e6 samples; warns
    when the per-point MC standard error tops 10% of the peak density.
    """
    if window <= 0:
        raise ValueError(f"window must be > 0, got {window}")
    if dist.kind == "empirical" and dist.total < 10**6:
        raise ValueError(
            f"llt_error needs an exact distribution or >= 1e6 samples, "
            f"got {dist.total}")
    sigma = _require_spread(model)
    peak = normal_pdf(model, model.mu)
    if dist.kind == "empirical":
        se = math.sqrt(peak * max(1.0 - peak, 0.0) / dist.total)
        if se > 0.1 * peak:
            warnings.warn(
                f"per-point MC standard error {se:.2e} exceeds 10% of the "
                f"peak density {peak:.2e}; llt_error is noise-dominated",
                stacklevel=2)
    z_lo = math.ceil(model.mu - window * sigma)
    z_hi = math.floor(model.mu + window * sigma)
    if z_hi < z_lo:
        raise ValueError("window contains no integers")
    zs = np.arange(z_lo, z_hi + 1)
    dens = normal_pdf(model, zs)
    emp = np.array([dist.counts.get(int(z), 0) for z in zs],
                   dtype=np.float64) / dist.total
    return float(dist.n * np.abs(emp - dens).max())


def interval_upper_check(dist: EdgeCountDistribution, r: int,
                         C: float = 4.0) -> tuple[int, float]:
    """Worst start z and sup_z P_hat([z, z+r]) * n / (C r); <= 1 means the
    order-r/n interval bound holds.  Intervals are closed (r+1 integers)."""
    if r < 1:
        raise ValueError(f"need r >= 1, got {r}")
    zs, cs = dist.arrays()
    z_min, z_max = int(zs[0]), int(zs[-1])
    dense = np.zeros(z_max - z_min + 1, dtype=np.int64)
    dense[zs - z_min] = cs
    csum = np.concatenate([[0], np.cumsum(dense)])
    L = dense.size
    starts = np.arange(L)
    ends = np.minimum(starts + r + 1, L)
    masses = csum[ends] - csum[starts]
    best = int(np.argmax(masses))
    ratio = (int(masses[best]) / dist.total) * dist.n / (C * r)
    return z_min + best, float(ratio)


def metric_record(metric: str, value: float, dist: EdgeCountDistribution,
                  window: float | None = None) -> dict:
    """Flat report row shared by the distance statistics."""
    return {"metric": metric, "value": float(value), "n": dist.n, "k": dist.k,
            "M": dist.M, "samples": dist.total, "window": window,
            "seed": dist.seed}
