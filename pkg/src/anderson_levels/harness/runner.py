"""Run an experiment and write its outputs.

``summary.json`` and ``samples.csv`` depend only on the config (seed
included), never on the worker count or the clock. Wall time, worker
count and kernel backend go to ``run.json`` next to them.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from pathlib import Path

import numpy as np

from .. import kernels
from ..parallel import resolve_workers
from .config import ExperimentConfig
from .experiments import RUNNERS, ExperimentResult

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1


def to_jsonable(obj):
    """Plain JSON types; NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        # repr is the shortest string that round-trips
        return repr(x) if math.isfinite(x) else ""
    return str(v)


def summary_dict(cfg: ExperimentConfig, result: ExperimentResult) -> dict:
    return to_jsonable(
        {
            "config": cfg.echo(),
            "filled_defaults": cfg.filled_defaults,
            "estimates": result.estimates,
            "standard_errors": result.standard_errors,
            "statistics": result.statistics,
            "flags": result.flags,
            "checks": result.checks,
            "passed": all(result.checks.values()),
            "samples_columns": result.columns,
        }
    )


def write_summary(path: Path, summary: dict) -> None:
    text = json.dumps(summary, indent=2, allow_nan=False) + "\n"
    path.write_text(text, encoding="utf-8")


def write_samples(path: Path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(columns)
        for row in rows:
            w.writerow([_csv_cell(v) for v in row])


def run_experiment(cfg: ExperimentConfig, workers=None, out_dir=None) -> tuple:
    """Run ``cfg`` and write outputs; returns ``(exit_status, summary)``.

    Exit status is 0 when every check passed and 1 otherwise.
    """
    workers = resolve_workers(workers if workers is not None else cfg.workers)
    cfg.workers = workers
    out = Path(out_dir or cfg.output_dir or os.path.join("results", cfg.experiment))
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - t0
    summary = summary_dict(cfg, result)
    write_summary(out / "summary.json", summary)
    write_samples(out / "samples.csv", result.columns, result.rows)
    run_info = {"wall_time_s": wall, "workers": workers, "backend": kernels.BACKEND, "experiment": cfg.experiment}
    (out / "run.json").write_text(json.dumps(run_info, indent=2) + "\n", encoding="utf-8")
    return (EXIT_OK if summary["passed"] else EXIT_CHECKS_FAILED), summary
