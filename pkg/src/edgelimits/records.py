"""Flat result records, their schemas, and deterministic serialization.

Every experiment emits a run file: one JSON object holding a format version,
the command name, the fully resolved configuration, and a list of flat
records.  Records come in a few fixed shapes; the reader enforces exact key
sets, so a record with unknown fields is rejected rather than silently
carried along.  Serialization is deterministic (sorted keys, no timestamps),
which is what makes same-seed reruns byte-identical.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

FORMAT_VERSION = "1"

__all__ = [
    "FORMAT_VERSION",
    "RecordError",
    "SCHEMAS",
    "validate_record",
    "write_run",
    "dump_run",
    "read_run",
    "records_to_csv",
]


class RecordError(ValueError):
    """A record does not match any documented flat schema."""


SCHEMAS: dict[str, frozenset[str]] = {
    "metric": frozenset(
        {"metric", "value", "n", "k", "M", "samples", "window", "seed"}),
    "stein": frozenset(
        {"n", "k", "M", "lambda", "Sigma11", "A_hat", "A_se", "B_hat", "B_se",
         "T_hat", "seed", "conditioning"}),
    "graph_stats": frozenset(
        {"n", "N", "M", "Vn", "P", "V", "dbar", "regular", "third_moment"}),
    "schedule_step": frozenset({"j", "a_j", "t_j", "c_j", "valid"}),
    "sweep_point": frozenset(
        {"n", "k", "M", "seed", "metric", "value", "samples"}),
    "sweep_fit": frozenset(
        {"metric", "slope", "slope_se", "intercept", "points"}),
}


def validate_record(rec: dict) -> str:
    """Return the schema name the record matches, or raise RecordError."""
    keys = frozenset(rec)
    for name, schema in SCHEMAS.items():
        if keys == schema:
            return name
    # build a useful message against the closest schema
    best = max(SCHEMAS, key=lambda s: len(keys & SCHEMAS[s]))
    extra = sorted(keys - SCHEMAS[best])
    missing = sorted(SCHEMAS[best] - keys)
    raise RecordError(
        f"record matches no schema (closest {best!r}: "
        f"unknown fields {extra}, missing fields {missing})")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_run(path: str | Path, command: str, config: dict,
              records: list[dict]) -> None:
    """Write a validated run file; raises RecordError before touching disk."""
    for rec in records:
        validate_record(rec)
    doc = {"format_version": FORMAT_VERSION, "command": command,
           "config": config, "records": records}
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_dump(doc))


def dump_run(command: str, config: dict, records: list[dict]) -> str:
    """The run file body as a string (used when printing to stdout)."""
    for rec in records:
        validate_record(rec)
    doc = {"format_version": FORMAT_VERSION, "command": command,
           "config": config, "records": records}
    return _dump(doc)


def read_run(path: str | Path) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if set(doc) != {"format_version", "command", "config", "records"}:
        raise RecordError(f"run file has unexpected top-level keys {sorted(doc)}")
    if doc["format_version"] != FORMAT_VERSION:
        raise RecordError(f"unsupported format_version {doc['format_version']!r}")
    for rec in doc["records"]:
        validate_record(rec)
    return doc


def records_to_csv(records: list[dict], path: str | Path,
                   columns: list[str]) -> None:
    """Plot-ready CSV with a fixed column order; floats keep full precision."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            row = []
            for c in columns:
                v = rec[c]
                row.append(repr(v) if isinstance(v, float) else v)
            w.writerow(row)
