"""Interval-smoothing experiments: valid triples, schedules, window defects.

The smoothing argument trades a point probability for an interval average in
stages.  A stage is a triple (a, r, t): current interval length a, target
length r, and t fresh vertices used to bridge them.  A triple is valid when

    (i)   a <= r,
    (ii)  1/2 <= c <= 1   where  a = c * t^(3/2) * n^(2*beta - 1/2),
    (iii) r <= n^(-beta) * sqrt(n * t).

The schedule starts at a_0 = 1 and iterates

    t_j     = ceil( (a_j^2 * n^(1 - 4*beta))^(1/3) ),
    a_{j+1} = floor( (a_j * n^(2 - 5*beta))^(1/3) ),

stopping at the first a_j >= n^(1 - 5*beta/2 - eps); that a_j also sits below
n^(1 - 5*beta/2).  All threshold and rounding decisions are made by exact
big-integer power comparisons (exponents are rationals), so no float slip can
move an integer boundary.  Float beta/eps inputs are snapped to the nearest
rational with denominator <= 10^4; pass Fraction for exact control.

The defect statistics compare point probabilities against sliding half-open
interval averages, with exact integer numerators when the input distribution
is exact.  window_vs_binomial checks the increment e(S' + T) - e(S') of a
fresh t-set against the matching binomial law, either over a deterministic
disjoint family of t-blocks or over uniformly drawn T.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import gmpy2
import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .graphs import Graph
from .models import BinomialModel, binomial_pmf, binomial_trials, normal_model
from .rng import stream
from .subsets import EdgeCountDistribution

__all__ = [
    "ValidTriple",
    "ScheduleStep",
    "SmoothingSchedule",
    "ScheduleError",
    "make_valid_triple",
    "schedule",
    "window_vs_binomial",
    "smoothing_defect",
    "difference_defect",
    "write_schedule_csv",
]

_PRECISION = 200


class ScheduleError(RuntimeError):
    """The schedule recurrence failed to reach its target window."""


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**4)
    return Fraction(x)


def _ipow(base: int, e: Fraction, scale: int) -> int:
    """base ** (e * scale); e * scale must be integral."""
    ee = e * scale
    if ee.denominator != 1:
        raise AssertionError(f"non-integer exponent {ee}")
    return base ** int(ee)


def _le_pow(lhs: list[tuple[int, Fraction]], rhs: list[tuple[int, Fraction]]) -> bool:
    """Exact test of prod(base^exp) <= prod(base^exp); exponents rational >= 0."""
    scale = 1
    for _, e in lhs + rhs:
        scale = scale * e.denominator // math.gcd(scale, e.denominator)
    left = math.prod(_ipow(b, e, scale) for b, e in lhs)
    right = math.prod(_ipow(b, e, scale) for b, e in rhs)
    return left <= right


def _mpfr_pow(base: float, e: Fraction):
    with gmpy2.context(precision=_PRECISION):
        return gmpy2.exp(gmpy2.mpfr(e.numerator) / e.denominator * gmpy2.log(base))


@dataclass(frozen=True)
class ValidTriple:
    """One smoothing stage with its validity conditions already certified."""

    n: int
    beta: Fraction
    a: int
    r: int
    t: int
    c: float


def _bridge_t(n: int, a: int, beta: Fraction) -> int:
    """ceil((a^2 * n^(1-4*beta))^(1/3)) with exact boundary handling."""
    e1 = 1 - 4 * beta
    with gmpy2.context(precision=_PRECISION):
        est = gmpy2.exp((2 * gmpy2.log(a) + gmpy2.mpfr(e1.numerator)
                         / e1.denominator * gmpy2.log(n)) / 3)
        t = int(gmpy2.ceil(est))

    def big_enough(tt: int) -> bool:
        # tt^3 >= a^2 * n^e1
        return _le_pow([(a, Fraction(2)), (n, e1)], [(tt, Fraction(3))])

    while not big_enough(t):
        t += 1
    while t > 1 and big_enough(t - 1):
        t -= 1
    return t


def _next_a(n: int, a: int, beta: Fraction) -> int:
    """floor((a * n^(2-5*beta))^(1/3)) with exact boundary handling."""
    e2 = 2 - 5 * beta
    with gmpy2.context(precision=_PRECISION):
        est = gmpy2.exp((gmpy2.log(a) + gmpy2.mpfr(e2.numerator)
                         / e2.denominator * gmpy2.log(n)) / 3)
        s = int(gmpy2.floor(est))

    def fits(ss: int) -> bool:
        # ss^3 <= a * n^e2
        return _le_pow([(ss, Fraction(3))], [(a, Fraction(1)), (n, e2)])

    while not fits(s):
        s -= 1
    while fits(s + 1):
        s += 1
    return s


def _c_value(n: int, a: int, t: int, beta: Fraction) -> float:
    # c = a * n^(1/2 - 2*beta) / t^(3/2)
    e = Fraction(1, 2) - 2 * beta
    with gmpy2.context(precision=_PRECISION):
        return float(a * _mpfr_pow(n, e) / _mpfr_pow(t, Fraction(3, 2)))


def _check_triple(n: int, a: int, r: int, t: int, beta: Fraction) -> list[str]:
    """Return the list of violated validity conditions (empty = valid)."""
    bad = []
    if not a <= r:
        bad.append(f"(i) a <= r fails: a={a}, r={r}")
    e1 = 1 - 4 * beta
    # (ii) 1/2 <= c <= 1  <=>  a^2 n^e1 <= t^3 <= 4 a^2 n^e1
    if not _le_pow([(a, Fraction(2)), (n, e1)], [(t, Fraction(3))]):
        bad.append(f"(ii) c <= 1 fails: a={a}, t={t}")
    if not _le_pow([(t, Fraction(3))], [(2 * a, Fraction(2)), (n, e1)]):
        bad.append(f"(ii) c >= 1/2 fails: a={a}, t={t}")
    # (iii) r <= n^(-beta) sqrt(n t)  <=>  r^2 <= n^(1-2*beta) * t
    if not _le_pow([(r, Fraction(2))], [(n, 1 - 2 * beta), (t, Fraction(1))]):
        bad.append(f"(iii) r <= n^(-beta)*sqrt(n*t) fails: r={r}, t={t}")
    return bad


def make_valid_triple(a: int, r: int, n: int, beta) -> ValidTriple:
    """Certify the stage (a, r) with the canonical bridge size t.

    Requires r^3 * n^(5*beta - 2) <= a <= r; refusals name the violated
    inequality instead of returning a half-checked object.
    """
    beta = _as_fraction(beta)
    if not 0 < beta < Fraction(1, 10):
        raise ValueError(f"need 0 < beta < 1/10, got {beta}")
    if a < 1 or r < 1:
        raise ValueError("a and r must be positive integers")
    if a > r:
        raise ValueError(f"precondition a <= r fails: a={a}, r={r}")
    # r^3 <= a * n^(2 - 5*beta)
    if not _le_pow([(r, Fraction(3))], [(a, Fraction(1)), (n, 2 - 5 * beta)]):
        raise ValueError(
            f"precondition r^3*n^(5*beta-2) <= a fails: a={a}, r={r}, n={n}")
    t = _bridge_t(n, a, beta)
    bad = _check_triple(n, a, r, t, beta)
    if bad:
        raise ValueError("invalid triple: " + "; ".join(bad))
    return ValidTriple(n=n, beta=beta, a=a, r=r, t=t,
                       c=_c_value(n, a, t, beta))


@dataclass(frozen=True)
class ScheduleStep:
    j: int
    a: int
    t: int
    c: float
    valid: bool


@dataclass(frozen=True)
class SmoothingSchedule:
    n: int
    beta: Fraction
    eps: Fraction
    steps: tuple[ScheduleStep, ...]
    j0: int

    @property
    def a(self) -> int:
        """Terminal interval length a_{j0}."""
        return self.steps[-1].a

    @property
    def consumed_t(self) -> int:
        """Vertices spent bridging: sum of t_j over the steps taken (j < j0)."""
        return sum(s.t for s in self.steps[:-1])


def schedule(n: int, beta, eps, k: int | None = None,
             max_iter: int = 64) -> SmoothingSchedule:
    """Run the a_j / t_j recurrence until a_j lands in the target window.

    Every traversed stage (a_j, a_{j+1}, t_j) is certified valid; the terminal
    row carries its own t and c but no successor, so its valid flag only
    asserts the c-window.  When k is given the total bridge budget
    sum_{j<j0} t_j must stay within k/2.
    """
    beta = _as_fraction(beta)
    eps = _as_fraction(eps)
    if not 0 < beta < Fraction(1, 10):
        raise ValueError(f"need 0 < beta < 1/10, got beta={beta}")
    if not 0 < eps < (1 - 10 * beta) / 4:
        raise ValueError(f"need 0 < eps < (1-10*beta)/4, got eps={eps}")
    e_stop = 1 - Fraction(5, 2) * beta - eps
    e_cap = 1 - Fraction(5, 2) * beta
    a = 1
    steps: list[ScheduleStep] = []
    for j in range(max_iter + 1):
        t = _bridge_t(n, a, beta)
        # stop at the first a_j >= n^(1 - 5*beta/2 - eps)
        if _le_pow([(n, e_stop)], [(a, Fraction(1))]):
            if not _le_pow([(a, Fraction(1))], [(n, e_cap)]):
                raise ScheduleError(
                    f"terminal a_j={a} overshoots n^(1-5*beta/2) at n={n}")
            ok = _le_pow([(a, Fraction(2)), (n, 1 - 4 * beta)], [(t, Fraction(3))]) \
                and _le_pow([(t, Fraction(3))], [(2 * a, Fraction(2)), (n, 1 - 4 * beta)])
            steps.append(ScheduleStep(j=j, a=a, t=t, c=_c_value(n, a, t, beta),
                                      valid=ok))
            sched = SmoothingSchedule(n=n, beta=beta, eps=eps,
                                      steps=tuple(steps), j0=j)
            if k is not None and 2 * sched.consumed_t > k:
                raise ScheduleError(
                    f"bridge budget {sched.consumed_t} exceeds k/2 = {k/2}")
            return sched
        nxt = _next_a(n, a, beta)
        bad = _check_triple(n, a, nxt, t, beta)
        steps.append(ScheduleStep(j=j, a=a, t=t, c=_c_value(n, a, t, beta),
                                  valid=not bad))
        if bad:
            raise ScheduleError(
                f"schedule step j={j} invalid at n={n}: " + "; ".join(bad))
        if nxt < a:
            raise ScheduleError(f"recurrence not monotone at j={j}: {a} -> {nxt}")
        a = nxt
    raise ScheduleError(
        f"no terminal a_j within {max_iter} iterations at n={n} "
        f"(n too small for beta={beta}, eps={eps})")


def write_schedule_csv(sched: SmoothingSchedule, path: str | Path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "a_j", "t_j", "c_j", "valid"])
        for s in sched.steps:
            w.writerow([s.j, s.a, s.t, repr(s.c), int(s.valid)])


def _batch_increments(G: Graph, dsp_comp: np.ndarray, comp: np.ndarray,
                      sel: np.ndarray) -> np.ndarray:
    """e(S' + T) - e(S') for each row of sel (indices into comp)."""
    u8 = G.dense_u8()
    T = comp[sel]
    cross = dsp_comp[sel].sum(axis=1, dtype=np.int64)
    blk = u8[T[:, :, None], T[:, None, :]]
    internal = blk.sum(axis=(1, 2), dtype=np.int64) >> 1
    return cross + internal


def window_vs_binomial(G: Graph, k: int, t: int, A: tuple[int, int], mode: str,
                       samples: int, seed: int, p=None) -> float:
    """|proportion of window increments in A - P(Y in A)| for Y binomial.

    S' is one uniform (k-t)-set drawn from the seed.  In "disjoint-family"
    mode the complement of S' is sorted and chopped into m = floor((n-k+t)/t)
    consecutive t-blocks, and the proportion is exact over those blocks (the
    samples argument is ignored).  In "uniform-T" mode the proportion is
    estimated from `samples` uniform t-subsets of the complement.  A is a
    closed integer interval (lo, hi); p defaults to the edge density M/N.
    """
    n = G.n
    if not (1 <= t and 2 * t <= k):
        raise ValueError(f"need 1 <= t <= k/2, got t={t}, k={k}")
    if not 2 <= k <= n - 2:
        raise ValueError(f"need 2 <= k <= n-2, got k={k}, n={n}")
    trials = binomial_trials(k, t)
    lo, hi = int(A[0]), int(A[1])
    if lo > hi:
        raise ValueError(f"A is empty: ({lo}, {hi})")
    if lo < 0 or hi > trials:
        raise ValueError(f"A=({lo},{hi}) not inside [0, {trials}]")
    if p is None:
        p = Fraction(G.M, G.N)
    model = BinomialModel(trials=trials, p_frac=Fraction(p))

    rng = stream(seed)
    perm = rng.permutation(n)
    sprime = np.sort(perm[: k - t])
    comp = np.sort(perm[k - t:])
    u8 = G.dense_u8()
    dsp = u8[:, sprime].sum(axis=1, dtype=np.int64)
    dsp_comp = dsp[comp]
    nc = comp.size  # n - k + t

    if mode == "disjoint-family":
        m = nc // t
        sel = np.arange(m * t).reshape(m, t)
        inc = _batch_increments(G, dsp_comp, comp, sel)
        hits = int(((inc >= lo) & (inc <= hi)).sum())
        prop = hits / m
    elif mode == "uniform-T":
        if samples < 1:
            raise ValueError("uniform-T mode needs samples >= 1")
        B = max(64, min(2048, (1 << 22) // (t * t + nc)))
        hits = 0
        done = 0
        while done < samples:
            b = min(B, samples - done)
            sel = rng.random((b, nc)).argpartition(t - 1, axis=1)[:, :t]
            inc = _batch_increments(G, dsp_comp, comp, sel)
            hits += int(((inc >= lo) & (inc <= hi)).sum())
            done += b
        prop = hits / samples
    else:
        raise ValueError(f"mode must be disjoint-family|uniform-T, got {mode!r}")

    model_mass = math.fsum(binomial_pmf(model, m_) for m_ in range(lo, hi + 1))
    return abs(prop - model_mass)


def _window_layout(dist: EdgeCountDistribution, a: int, window: float):
    """Dense counts spanning both the support and the scan window.

    Returns (dense, lo, w_lo, w_hi): dense[i] is the count at z = lo + i, and
    [w_lo, w_hi] is the integer scan window |z - mu| <= window * sigma.  The
    array always covers [z, z+a) for every window start z.
    """
    model = normal_model(dist.n, dist.k, dist.M)
    sigma = model.sigma
    if sigma <= 0:
        raise ValueError("degenerate model, no window")
    w_lo = math.ceil(model.mu - window * sigma)
    w_hi = math.floor(model.mu + window * sigma)
    if w_hi < w_lo:
        raise ValueError("window contains no integers")
    zs, cs = dist.arrays()
    lo = min(int(zs[0]), w_lo)
    hi = max(int(zs[-1]), w_hi + a)
    dense = np.zeros(hi - lo + 1, dtype=np.int64)
    dense[zs - lo] = cs
    return dense, lo, w_lo, w_hi


def _interval_sums(dense: np.ndarray, a: int) -> np.ndarray:
    """W[i] = count mass of the half-open window [i, i+a), edge-truncated."""
    cs = np.concatenate([[0], np.cumsum(dense)])
    L = dense.size
    starts = np.arange(L)
    ends = np.minimum(starts + a, L)
    return cs[ends] - cs[starts]


def smoothing_defect(dist: EdgeCountDistribution, a: int,
                     window: float = 2.0) -> float:
    """max over z in the window of |P(e(S)=z) - (1/a) P(e(S) in [z, z+a))|.

    The numerator |a*count_z - interval_count| is integer arithmetic, so the
    result is exact whenever the distribution is; a=1 gives identically 0.
    """
    if a < 1:
        raise ValueError(f"need a >= 1, got {a}")
    dense, lo, w_lo, w_hi = _window_layout(dist, a, window)
    W = _interval_sums(dense, a)
    sl = slice(w_lo - lo, w_hi - lo + 1)
    worst = int(np.abs(a * dense[sl] - W[sl]).max())
    return worst / (a * dist.total)


def difference_defect(dist: EdgeCountDistribution, a: int, r: int,
                      window: float = 2.0) -> tuple[float, float]:
    """(defect, occupancy): shift stability of interval masses, plus the
    global interval occupancy bound.

    defect = max over z1, z2 in the window with |z1 - z2| <= r of
    |P([z1, z1+a)) - P([z2, z2+a))|; occupancy = sup over all z of
    P([z, z+a)) * n / a, scanned over the whole support.
    """
    if a < 1:
        raise ValueError(f"need a >= 1, got {a}")
    if a > r:
        raise ValueError(f"need a <= r, got a={a}, r={r}")
    dense, lo, w_lo, w_hi = _window_layout(dist, a, window)
    W = _interval_sums(dense, a)
    seg = W[w_lo - lo: w_hi - lo + 1]
    size = 2 * r + 1
    lo_f = minimum_filter1d(seg, size=size, mode="constant",
                            cval=np.iinfo(np.int64).max)
    hi_f = maximum_filter1d(seg, size=size, mode="constant",
                            cval=np.iinfo(np.int64).min)
    defect = int(np.maximum(seg - lo_f, hi_f - seg).max()) / dist.total
    occupancy = int(W.max()) * dist.n / (a * dist.total)
    return defect, occupancy
