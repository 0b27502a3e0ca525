"""Command-line front door for the edge-count limit experiments.

Subcommands: gen, stats, sample, exact, clt, llt, stein, smooth, sweep.
Every command resolves its configuration (flags plus environment), runs, and
emits either data files (-o) or a JSON run document on stdout.  Progress and
warnings go to stderr so data streams stay clean.

Exit codes: 0 success, 2 configuration error, 3 budget refusal (an exact
enumeration would exceed its subset budget), 4 numeric failure (singular
covariance, degenerate model, schedule breakdown).

Environment: EDGELIMITS_OUTDIR prefixes relative output paths;
EDGELIMITS_WORKERS supplies the worker count when --workers is absent.

Randomness: everything flows from --seed.  Commands using several random
stages derive per-stage seeds as seed + j * 0x9E3779B97F4A7C15 (mod 2^64,
golden-ratio steps, injective), and each stage feeds its counter-based
generator streams; nothing reads entropy from the machine.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import graphs, models, records, smoothing, stein, subsets
from .rng import stream

_GOLD = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def _derive(seed: int, j: int) -> int:
    return (seed + j * _GOLD) & _MASK


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _out_path(raw: str) -> Path:
    p = Path(raw)
    outdir = os.environ.get("EDGELIMITS_OUTDIR")
    if outdir and not p.is_absolute():
        p = Path(outdir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _workers(ns) -> int:
    if ns.workers is not None:
        return ns.workers
    env = os.environ.get("EDGELIMITS_WORKERS")
    return int(env) if env else 1


def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def _interval(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"interval must be lo:hi, got {text!r}") from exc


def _resolve_graph(ns) -> tuple[graphs.Graph, dict]:
    """Load --graph, or generate from --n with --M or --p and the seed."""
    if ns.graph is not None:
        if ns.n is not None or ns.M is not None or ns.p is not None:
            raise ValueError("give either --graph or --n/--M/--p, not both")
        G = graphs.read_graph(ns.graph)
        return G, {"graph": str(ns.graph), "n": G.n, "M": G.M}
    if ns.n is None:
        raise ValueError("need --graph, or --n with --M or --p")
    gseed = _derive(ns.seed, 1)
    if (ns.M is None) == (ns.p is None):
        raise ValueError("give exactly one of --M or --p with --n")
    if ns.M is not None:
        G = graphs.gen_gnm(ns.n, ns.M, seed=gseed)
        src = {"n": ns.n, "M": ns.M, "graph_seed": gseed}
    else:
        G = graphs.gen_gnp(ns.n, ns.p, seed=gseed)
        src = {"n": ns.n, "p": ns.p, "M": G.M, "graph_seed": gseed}
    return G, src


def _emit(ns, command: str, config: dict, recs: list[dict]) -> None:
    if ns.out:
        path = _out_path(ns.out)
        records.write_run(path, command, config, recs)
        _progress(f"wrote {path}")
    else:
        sys.stdout.write(records.dump_run(command, config, recs))


def _config(ns, extra: dict | None = None) -> dict:
    skip = {"func", "graph"}
    cfg = {}
    for key, val in sorted(vars(ns).items()):
        if key in skip or val is None:
            continue
        if isinstance(val, Fraction):
            val = str(val)
        elif isinstance(val, tuple):
            val = list(val)
        cfg[key] = val
    if getattr(ns, "graph", None) is not None:
        cfg["graph"] = str(ns.graph)
    if extra:
        cfg.update(extra)
    return cfg


# ---------------------------------------------------------------- commands


def cmd_gen(ns) -> int:
    class _Shim:
        graph = None
        n, M, p, seed = ns.n, ns.M, ns.p, ns.seed
    G, src = _resolve_graph(_Shim)
    path = _out_path(ns.out)
    graphs.write_graph(G, path)
    _progress(f"wrote {path} (n={G.n}, M={G.M})")
    print(path)
    return 0


def cmd_stats(ns) -> int:
    G, src = _resolve_graph(ns)
    graphs.band_warning(G, ns.k)
    st = G.stats()
    rec = {"n": st.n, "N": st.N, "M": st.M, "Vn": st.Vn, "P": st.P,
           "V": st.V_float, "dbar": st.dbar_float,
           "regular": st.is_regular, "third_moment": graphs.third_moment_stat(G)}
    _emit(ns, "stats", _config(ns, src), [rec])
    return 0


def _write_dist(ns, dist) -> None:
    path = _out_path(ns.out)
    subsets.write_distribution(dist, path)
    _progress(f"wrote {path} (+ sidecar), total={dist.total}")


def cmd_sample(ns) -> int:
    G, src = _resolve_graph(ns)
    graphs.band_warning(G, ns.k)
    dist = subsets.sample_edge_counts(G, ns.k, ns.samples, seed=ns.seed,
                                      workers=_workers(ns))
    _write_dist(ns, dist)
    return 0


def cmd_exact(ns) -> int:
    G, src = _resolve_graph(ns)
    dist = subsets.exact_distribution(G, ns.k, budget=ns.budget)
    _write_dist(ns, dist)
    return 0


def _load_or_sample(ns, G) -> subsets.EdgeCountDistribution:
    if ns.dist is not None:
        return subsets.read_distribution(ns.dist)
    if ns.exact:
        return subsets.exact_distribution(G, ns.k, budget=ns.budget)
    _progress(f"sampling {ns.samples} subsets (n={G.n}, k={ns.k})")
    return subsets.sample_edge_counts(G, ns.k, ns.samples, seed=ns.seed,
                                      workers=_workers(ns))


def cmd_clt(ns) -> int:
    G, src = _resolve_graph(ns)
    graphs.band_warning(G, ns.k)
    dist = _load_or_sample(ns, G)
    model = models.normal_model(G.n, ns.k, G.M)
    recs = []
    try:
        recs.append(models.metric_record(
            "ks", models.kolmogorov_distance(dist, model), dist))
        for half_width in (0.5, 1.0, 2.0):
            z0 = model.mu - half_width * model.sigma
            z1 = model.mu + half_width * model.sigma
            err = models.interval_error(dist, model, z0, z1)
            recs.append(models.metric_record(
                f"interval_error_{half_width}sigma", err, dist, window=half_width))
    except models.DegenerateModelError as exc:
        # boundary M: the reference model is a point mass; report, don't fail
        _progress(f"degenerate model, distances unavailable: {exc}")
        recs = [models.metric_record("ks", float("nan"), dist)]
    if ns.hist:
        subsets.write_distribution(dist, _out_path(ns.hist))
        _progress(f"wrote histogram {ns.hist}")
    _emit(ns, "clt", _config(ns, src), recs)
    return 0


def cmd_llt(ns) -> int:
    G, src = _resolve_graph(ns)
    graphs.band_warning(G, ns.k)
    dist = _load_or_sample(ns, G)
    model = models.normal_model(G.n, ns.k, G.M)
    recs = [models.metric_record(
        "llt_error", models.llt_error(dist, model, window=ns.window), dist,
        window=ns.window)]
    sched = smoothing.schedule(G.n, ns.beta, ns.eps)
    a = min(sched.a, ns.k * (ns.k - 1) // 2)
    recs.append(models.metric_record(
        f"smoothing_defect_a{a}", smoothing.smoothing_defect(dist, a, ns.window),
        dist, window=ns.window))
    r = max(a, math.ceil(G.n ** 0.8))
    defect, occupancy = smoothing.difference_defect(dist, a, r, ns.window)
    recs.append(models.metric_record(
        f"difference_defect_a{a}_r{r}", defect, dist, window=ns.window))
    recs.append(models.metric_record(
        f"interval_occupancy_a{a}", occupancy, dist, window=ns.window))
    if ns.hist:
        subsets.write_distribution(dist, _out_path(ns.hist))
        _progress(f"wrote histogram {ns.hist}")
    _emit(ns, "llt", _config(ns, src), recs)
    return 0


def cmd_stein(ns) -> int:
    G, src = _resolve_graph(ns)
    graphs.band_warning(G, ns.k)
    st = G.stats()
    recs: list[dict] = []

    rng = stream(_derive(ns.seed, 2))
    worst = Fraction(0)
    for _ in range(ns.drift_trials):
        S = rng.permutation(G.n)[: ns.k]
        worst = max(worst, stein.drift_check(G, S))
    if worst != 0:
        raise FloatingPointError(f"drift identity violated: {worst}")
    recs.append({"metric": "drift_max_abs_error", "value": float(worst),
                 "n": G.n, "k": ns.k, "M": G.M, "samples": ns.drift_trials,
                 "window": None, "seed": ns.seed})

    if math.comb(G.n, ns.k) <= ns.budget:
        joint = subsets.exact_joint_distribution(G, ns.k, budget=ns.budget)
        sg = stein.sigma_matrix(st, ns.k)
        dev = _sigma_enum_deviation(G, ns.k, joint, sg)
        recs.append({"metric": "sigma_enum_rel_error", "value": dev,
                     "n": G.n, "k": ns.k, "M": G.M,
                     "samples": sum(joint.values()), "window": None,
                     "seed": ns.seed})

    if 0 < G.M < G.N:
        recs.append({"metric": "sigma11_vs_lambda_dev",
                     "value": stein.sigma11_vs_lambda(st, ns.k),
                     "n": G.n, "k": ns.k, "M": G.M, "samples": 0,
                     "window": None, "seed": ns.seed})

    if st.is_regular:
        _progress("regular graph: Sigma singular, skipping A/B estimation")
    else:
        diag = stein.estimate_AB(G, ns.k, samples=ns.samples, seed=ns.seed,
                                 workers=_workers(ns))
        recs.append(diag.record())
    _emit(ns, "stein", _config(ns, src), recs)
    return 0


def _sigma_enum_deviation(G, k, joint, sg) -> float:
    """Max relative gap between Sigma and the enumerated covariance."""
    tot = sum(joint.values())
    acc = [[Fraction(0)] * 2 for _ in range(2)]
    for (e, eb), c in joint.items():
        w = stein.WVector.from_counts(G.n, k, G.M, e, eb)
        v = (w.W, w.Wbar)
        for i in range(2):
            for j in range(2):
                acc[i][j] += c * v[i] * v[j]
    worst = 0.0
    for i in range(2):
        for j in range(2):
            cov = acc[i][j] / tot
            ref = sg[i, j]
            if ref == 0:
                worst = max(worst, float(abs(cov)))
            else:
                worst = max(worst, float(abs(cov - ref) / abs(ref)))
    return worst


def cmd_smooth(ns) -> int:
    recs: list[dict] = []
    config_extra: dict = {}
    if ns.graph is not None or ns.n_graph is not None:
        class _Shim:
            graph = ns.graph
            n, M, p, seed = ns.n_graph, ns.M, ns.p, ns.seed
        G, src = _resolve_graph(_Shim)
        config_extra.update(src)
        if ns.k is None or ns.t is None or ns.A is None:
            raise ValueError("window experiment needs --k, --t and --A")
        dev = smoothing.window_vs_binomial(
            G, ns.k, ns.t, ns.A, ns.mode, ns.samples, seed=ns.seed, p=ns.p_model)
        recs.append({"metric": f"window_vs_binomial_{ns.mode}", "value": dev,
                     "n": G.n, "k": ns.k, "M": G.M, "samples": ns.samples,
                     "window": None, "seed": ns.seed})
        n_for_schedule = G.n
    else:
        if ns.n is None:
            raise ValueError("need --n (schedule size) or a graph source")
        n_for_schedule = ns.n
    sched = smoothing.schedule(n_for_schedule, ns.beta, ns.eps, k=ns.k)
    for s in sched.steps:
        recs.append({"j": s.j, "a_j": s.a, "t_j": s.t, "c_j": s.c,
                     "valid": s.valid})
    if ns.csv:
        smoothing.write_schedule_csv(sched, _out_path(ns.csv))
        _progress(f"wrote schedule CSV {ns.csv}")
    _emit(ns, "smooth", _config(ns, config_extra), recs)
    return 0


def cmd_sweep(ns) -> int:
    grid = ns.grid
    if len(set(grid)) < 3:
        raise ValueError(f"sweep needs >= 3 distinct n values, got {grid}")
    points: list[dict] = []
    idx = 0
    for n in grid:
        N = n * (n - 1) // 2
        M = round(ns.m_frac * N)
        k = round(ns.k_frac * n)
        for rep in range(ns.reps):
            idx += 1
            gseed = _derive(ns.seed, 2 * idx)
            sseed = _derive(ns.seed, 2 * idx + 1)
            G = graphs.gen_gnm(n, M, seed=gseed)
            dist = subsets.sample_edge_counts(G, k, ns.samples, seed=sseed,
                                              workers=_workers(ns))
            model = models.normal_model(n, k, M)
            if ns.metric == "ks":
                val = models.kolmogorov_distance(dist, model)
            else:  # meanabs
                zs, cs = dist.arrays()
                val = float((np.abs(zs - model.mu) * cs).sum() / dist.total)
            points.append({"n": n, "k": k, "M": M, "seed": sseed,
                           "metric": ns.metric, "value": val,
                           "samples": ns.samples})
            _progress(f"sweep {ns.metric} n={n} rep={rep}: {val:.6g}")
    logn = np.log([p["n"] for p in points])
    logv = np.log([p["value"] for p in points])
    A = np.column_stack([logn, np.ones_like(logn)])
    coef, res, *_ = np.linalg.lstsq(A, logv, rcond=None)
    fitted = A @ coef
    dof = max(len(points) - 2, 1)
    s2 = float(((logv - fitted) ** 2).sum()) / dof
    var_slope = s2 / float(((logn - logn.mean()) ** 2).sum())
    fit = {"metric": ns.metric, "slope": float(coef[0]),
           "slope_se": math.sqrt(var_slope), "intercept": float(coef[1]),
           "points": len(points)}
    if ns.csv:
        records.records_to_csv(
            points, _out_path(ns.csv),
            ["n", "k", "M", "seed", "metric", "value", "samples"])
        _progress(f"wrote sweep CSV {ns.csv}")
    _emit(ns, "sweep", _config(ns), points + [fit])
    return 0


# ----------------------------------------------------------------- parser


def _add_graph_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="read a graph file instead of generating")
    p.add_argument("--n", type=int, help="vertex count (generate mode)")
    p.add_argument("--M", type=int, help="edge count (generate mode)")
    p.add_argument("--p", type=float, help="edge probability (generate mode)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="edgelimits",
        description="Simulation lab for central and local limit behaviour of "
                    "induced edge counts of random k-subsets.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(func=fn)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=None)
        return p

    p = add("gen", cmd_gen, help="generate a random graph file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--M", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("-o", "--out", required=True)

    p = add("stats", cmd_stats, help="degree statistics of a graph")
    _add_graph_source(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("-o", "--out")

    p = add("sample", cmd_sample, help="sample e(S) over uniform k-subsets")
    _add_graph_source(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("-o", "--out", required=True)

    p = add("exact", cmd_exact, help="exact e(S) distribution by enumeration")
    _add_graph_source(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--budget", type=int, default=10**8)
    p.add_argument("-o", "--out", required=True)

    for name, fn in (("clt", cmd_clt), ("llt", cmd_llt)):
        p = add(name, fn, help=f"{name} distance experiment")
        _add_graph_source(p)
        p.add_argument("--k", type=int, required=True)
        p.add_argument("--samples", type=int, default=10**6)
        p.add_argument("--exact", action="store_true",
                       help="enumerate instead of sampling")
        p.add_argument("--budget", type=int, default=10**8)
        p.add_argument("--dist", help="reuse a stored distribution CSV")
        p.add_argument("--hist", help="write the histogram CSV here")
        p.add_argument("-o", "--out")
        if name == "llt":
            p.add_argument("--window", type=float, default=2.0)
            p.add_argument("--beta", type=_frac, default=Fraction(1, 14))
            p.add_argument("--eps", type=_frac, default=Fraction(1, 20))

    p = add("stein", cmd_stein, help="exchangeable-pair diagnostics")
    _add_graph_source(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--drift-trials", type=int, default=20)
    p.add_argument("--budget", type=int, default=10**6)
    p.add_argument("-o", "--out")

    p = add("smooth", cmd_smooth, help="smoothing schedules and window checks")
    p.add_argument("--n", type=int, help="schedule size when no graph is given")
    p.add_argument("--beta", type=_frac, default=Fraction(1, 14))
    p.add_argument("--eps", type=_frac, default=Fraction(1, 20))
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--graph")
    p.add_argument("--n-graph", type=int, dest="n_graph")
    p.add_argument("--M", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--t", type=int)
    p.add_argument("--A", type=_interval, help="closed interval lo:hi")
    p.add_argument("--mode", choices=["disjoint-family", "uniform-T"],
                   default="uniform-T")
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--p-model", type=_frac, default=None, dest="p_model",
                   help="binomial p override (default: edge density M/N)")
    p.add_argument("--csv", help="write the schedule CSV here")
    p.add_argument("-o", "--out")

    p = add("sweep", cmd_sweep, help="metric scaling over an n grid")
    p.add_argument("--grid", type=int, nargs="+", required=True)
    p.add_argument("--metric", choices=["ks", "meanabs"], default="ks")
    p.add_argument("--k-frac", type=float, default=0.5, dest="k_frac")
    p.add_argument("--m-frac", type=float, default=0.5, dest="m_frac")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--csv", help="write per-point CSV here")
    p.add_argument("-o", "--out")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        return ns.func(ns)
    except subsets.BudgetError as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return 3
    except (stein.SingularCovarianceError, models.DegenerateModelError,
            smoothing.ScheduleError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
