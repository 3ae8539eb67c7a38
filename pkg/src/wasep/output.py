"""Artifact output: run directories, manifests, summaries, CSV tables.

Layout per run: out/<config-hash>/{manifest.json, summary.json,
tables/*.csv, fields/*.csv}.  summary.json carries only reproducible
numbers (no clocks), so identical configs reproduce it byte for byte;
wall-clock metadata lives in manifest.json.
"""
from __future__ import annotations

import csv
import json
import os
import platform
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_hash

__all__ = [
    "out_root",
    "run_dir",
    "write_json",
    "write_manifest",
    "write_table",
    "write_field_csv",
    "dump_trajectory",
]

ENV_OUT = "WASEP_OUT_DIR"


def out_root() -> Path:
    return Path(os.environ.get(ENV_OUT, "out"))


def run_dir(cfg: ExperimentConfig, create: bool = True) -> Path:
    d = out_root() / config_hash(cfg)
    if create:
        (d / "tables").mkdir(parents=True, exist_ok=True)
        (d / "fields").mkdir(parents=True, exist_ok=True)
    return d


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, payload: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonify(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_manifest(directory, cfg: ExperimentConfig, extra: dict | None = None) -> None:
    payload = {
        "config": cfg.as_dict(),
        "config_hash": config_hash(cfg),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "rng": "PCG64 via SeedSequence((master_seed, replica_index))",
    }
    if extra:
        payload.update(_jsonify(extra))
    write_json(Path(directory) / "manifest.json", payload)


def write_table(path, header: list, rows) -> None:
    """RFC-4180 CSV (CRLF line endings, UTF-8, '.' decimal separator)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(c) for c in row])


def _format_cell(c):
    if isinstance(c, (float, np.floating)):
        return repr(float(c))
    if isinstance(c, (np.integer,)):
        return int(c)
    return c


def write_field_csv(path, field) -> None:
    """Export a density field as (t, u, value) rows."""
    rows = []
    stride = max(1, len(field.times) // 256)
    for k in range(0, len(field.times), stride):
        t = field.times[k]
        for j in range(field.grid_m):
            rows.append((t, j / field.grid_m, field.values[k, j]))
    write_table(path, ["t", "u", "value"], rows)


def dump_trajectory(path, record, plan) -> None:
    """Per-replica time series: t, eta0, Gamma, Z columns, X columns."""
    header = ["t", "eta0"]
    gamma = record.gamma if record.gamma is not None else None
    if gamma is not None:
        header.append("Gamma")
    eps_keys = sorted(record.z_values)
    header += [f"Z_eps={e:g}" for e in eps_keys]
    fn_keys = sorted(record.field_values)
    header += [f"X_{name}" for name in fn_keys]
    rows = []
    for k, t in enumerate(record.times):
        row = [t, int(record.eta_origin[k])]
        if gamma is not None:
            row.append(gamma[k])
        row += [record.z_values[e][k] for e in eps_keys]
        row += [record.field_values[name][k] for name in fn_keys]
        rows.append(row)
    write_table(path, header, rows)
