"""End-to-end checks through real subprocesses: exit codes, determinism,
output formats, environment overrides.  Heavy numerics live elsewhere; every
invocation here is sized to finish in well under a second."""
import json
import os
import subprocess
import sys

import pytest

from edgelimits import records


def run_cli(args, env_extra=None, expect=0):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    r = subprocess.run([sys.executable, "-m", "edgelimits.cli"] + [str(a) for a in args],
                       capture_output=True, text=True, env=env)
    assert r.returncode == expect, (
        f"exit {r.returncode} != {expect}\nargs: {args}\nstderr: {r.stderr}")
    return r


def load_stdout(r):
    doc = json.loads(r.stdout)
    assert doc["format_version"] == records.FORMAT_VERSION
    for rec in doc["records"]:
        records.validate_record(rec)
    return doc


# --------------------------------------------------------------- gen/stats


def test_gen_writes_graph_file(tmp_path):
    p = tmp_path / "g.graph"
    run_cli(["gen", "--n", 4, "--M", 6, "-o", p])
    lines = p.read_text().splitlines()
    assert lines[0] == "4 6"
    assert len(lines) == 7


def test_gen_bad_density_is_config_error():
    run_cli(["gen", "--n", 4, "--p", 1.5, "-o", "/dev/null"], expect=2)
    run_cli(["gen", "--n", 4, "--M", 99, "-o", "/dev/null"], expect=2)


def test_stats_record(tmp_path):
    p = tmp_path / "g.graph"
    run_cli(["gen", "--n", 4, "--M", 6, "-o", p])
    doc = load_stdout(run_cli(["stats", "--graph", p]))
    rec = doc["records"][0]
    assert records.validate_record(rec) == "graph_stats"
    assert rec["regular"] is True and rec["Vn"] == 0


def test_graph_source_is_exclusive(tmp_path):
    p = tmp_path / "g.graph"
    run_cli(["gen", "--n", 6, "--M", 5, "-o", p])
    run_cli(["stats", "--graph", p, "--n", 6], expect=2)
    run_cli(["stats", "--n", 6], expect=2)  # n without M or p
    run_cli(["stats", "--n", 6, "--M", 5, "--p", 0.5], expect=2)


# ------------------------------------------------------------ sample/exact


def test_sample_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["sample", "--n", 30, "--M", 200, "--k", 10, "--samples", 2000,
            "--seed", 5]
    run_cli(base + ["-o", a])
    run_cli(base + ["-o", b])
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads((tmp_path / "a.meta.json").read_text())
    assert meta["kind"] == "empirical" and meta["total"] == 2000


def test_exact_budget_refusal(tmp_path):
    run_cli(["exact", "--n", 40, "--M", 300, "--k", 20, "--budget", 1000,
             "-o", tmp_path / "d.csv"], expect=3)


def test_exact_small(tmp_path):
    p = tmp_path / "d.csv"
    run_cli(["exact", "--n", 4, "--M", 4, "--seed", 1, "--k", 2, "-o", p])
    body = p.read_text().splitlines()
    assert body[0] == "z,count"
    total = sum(int(r.split(",")[1]) for r in body[1:])
    assert total == 6


# ------------------------------------------------------------------ metrics


def test_clt_rerun_byte_identical(tmp_path):
    out = tmp_path / "run.json"
    base = ["clt", "--n", 30, "--M", 200, "--k", 12, "--samples", 2000,
            "--seed", 3, "-o", out]
    run_cli(base)
    first = out.read_bytes()
    run_cli(base)
    assert out.read_bytes() == first
    doc = json.loads(first)
    names = [r["metric"] for r in doc["records"]]
    assert "ks" in names
    assert doc["config"]["samples"] == 2000
    assert doc["config"]["out"] == str(out)


def test_clt_degenerate_reports_nan(tmp_path):
    p = tmp_path / "k4.graph"
    run_cli(["gen", "--n", 4, "--M", 6, "-o", p])
    doc = load_stdout(run_cli(["clt", "--graph", p, "--k", 2, "--exact"]))
    ks = [r for r in doc["records"] if r["metric"] == "ks"][0]
    assert ks["value"] != ks["value"]  # NaN marker, run still exits 0


def test_llt_exact_records(tmp_path):
    doc = load_stdout(run_cli(
        ["llt", "--n", 24, "--M", 138, "--k", 12, "--exact", "--seed", 1]))
    names = [r["metric"] for r in doc["records"]]
    assert any(x.startswith("llt_error") for x in names)
    assert any(x.startswith("smoothing_defect") for x in names)
    assert any(x.startswith("difference_defect") for x in names)


def test_llt_degenerate_is_numeric_failure(tmp_path):
    p = tmp_path / "empty.graph"
    run_cli(["gen", "--n", 24, "--M", 0, "-o", p])
    run_cli(["llt", "--graph", p, "--k", 12, "--exact"], expect=4)


def test_stein_records():
    doc = load_stdout(run_cli(
        ["stein", "--n", 12, "--M", 40, "--k", 6, "--samples", 120,
         "--seed", 9]))
    drift = [r for r in doc["records"]
             if r.get("metric") == "drift_max_abs_error"][0]
    assert drift["value"] == 0.0
    enum = [r for r in doc["records"]
            if r.get("metric") == "sigma_enum_rel_error"][0]
    assert enum["value"] == 0.0
    stein = [r for r in doc["records"] if "A_hat" in r][0]
    assert stein["conditioning"] == "subset"
    assert stein["T_hat"] > 0


def test_stein_regular_graph_skips_estimator(tmp_path):
    p = tmp_path / "k4.graph"
    run_cli(["gen", "--n", 4, "--M", 6, "-o", p])
    r = run_cli(["stein", "--graph", p, "--k", 2, "--samples", 100])
    doc = load_stdout(r)
    assert not any("A_hat" in rec for rec in doc["records"])
    assert "singular" in r.stderr.lower()


# ------------------------------------------------------------ smooth/sweep


def test_smooth_schedule_csv(tmp_path):
    p = tmp_path / "sched.csv"
    doc = load_stdout(run_cli(
        ["smooth", "--n", 10000, "--beta", "1/14", "--eps", "1/20",
         "--csv", p]))
    steps = [r for r in doc["records"] if "a_j" in r]
    assert steps and all(r["valid"] for r in steps)
    assert p.read_text().splitlines()[0] == "j,a_j,t_j,c_j,valid"


def test_smooth_window_requires_all_flags():
    run_cli(["smooth", "--n-graph", 100, "--M", 2000, "--k", 94], expect=2)


def test_smooth_schedule_k_conflict_is_numeric():
    run_cli(["smooth", "--n", 100, "--k", 50], expect=4)


def test_sweep_needs_three_sizes():
    run_cli(["sweep", "--grid", 100, 200, "--metric", "ks"], expect=2)


def test_sweep_fit_record(tmp_path):
    csv_path = tmp_path / "sweep.csv"
    doc = load_stdout(run_cli(
        ["sweep", "--grid", 60, 90, 120, "--metric", "meanabs", "--reps", 1,
         "--samples", 500, "--seed", 2, "--csv", csv_path]))
    fit = [r for r in doc["records"] if "slope" in r][0]
    assert records.validate_record(fit) == "sweep_fit"
    assert fit["points"] == 3
    header = csv_path.read_text().splitlines()[0]
    assert header == "n,k,M,seed,metric,value,samples"


# -------------------------------------------------------------- environment


def test_outdir_env(tmp_path):
    sub = tmp_path / "nested" / "deeper"
    run_cli(["gen", "--n", 6, "--M", 5, "-o", "g.graph"],
            env_extra={"EDGELIMITS_OUTDIR": str(sub)})
    assert (sub / "g.graph").exists()


def test_outdir_env_ignored_for_absolute(tmp_path):
    target = tmp_path / "abs.graph"
    run_cli(["gen", "--n", 6, "--M", 5, "-o", target],
            env_extra={"EDGELIMITS_OUTDIR": str(tmp_path / "elsewhere")})
    assert target.exists()


def test_workers_env_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["sample", "--n", 30, "--M", 200, "--k", 10, "--samples", 999,
            "--seed", 5]
    env = {"EDGELIMITS_WORKERS": "3"}
    run_cli(base + ["-o", a], env_extra=env)
    run_cli(base + ["-o", b], env_extra=env)
    assert a.read_bytes() == b.read_bytes()


def test_missing_graph_file_is_config_error():
    run_cli(["stats", "--graph", "/nonexistent/g.graph"], expect=2)
