"""Monte Carlo runs, parameter sweeps and CSV output."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import RunConfig
from .metrics import percentile_summary
from .pipeline import record_columns, simulate_run
from .scenario import ConfigError

SWEEPABLE = ("rho_p", "rho_f", "rho_t", "gamma_s", "n_s")


def _one(args):
    cfg, run, dump_dir = args
    return simulate_run(cfg, run, dump_dir)


def run(cfg: RunConfig, workers: Optional[int] = None, dump_dir: Optional[Path] = None) -> list[dict]:
    """All Monte Carlo repetitions of ``cfg``; records ordered by (run, t)."""
    n_mc = cfg.experiment.monte_carlo
    workers = cfg.experiment.workers if workers is None else workers
    jobs = [(cfg, r, dump_dir) for r in range(n_mc)]
    if workers > 1 and n_mc > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_one, jobs))
    else:
        chunks = [_one(j) for j in jobs]
    return [rec for chunk in chunks for rec in chunk]


def summarize(cfg: RunConfig, records: Sequence[dict]) -> dict:
    """Burn-in-trimmed OSPA percentiles per tracker plus mean rate and overhead."""
    burn = cfg.experiment.burn_in
    out: dict = {"c_dl": float(np.mean([r["c_dl"] for r in records])),
                 "r_b": float(np.mean([r["r_b"] for r in records])),
                 "shared_points": float(np.mean([r["shared_points"] for r in records]))}
    runs = sorted({r["run"] for r in records})
    for k in cfg.trackers:
        per_run = [[r[f"{k}_ospa"] for r in records if r["run"] == i] for i in runs]
        s = percentile_summary(np.array(per_run, dtype=float), burn_in=burn)
        out[f"{k}_ospa_mean"] = s["mean"]
        out[f"{k}_ospa_p10"] = s["p10"]
        out[f"{k}_ospa_p90"] = s["p90"]
        for f in ("pd", "pfa", "pmd"):
            vals = np.array([r[f"{k}_{f}"] for r in records if r["t"] >= burn], dtype=float)
            vals = vals[~np.isnan(vals)]
            out[f"{k}_{f}_mean"] = float(vals.mean()) if vals.size else float("nan")
    return out


def summary_columns(trackers) -> list[str]:
    cols = ["param", "value", "c_dl", "r_b", "shared_points"]
    for k in trackers:
        cols += [f"{k}_ospa_mean", f"{k}_ospa_p10", f"{k}_ospa_p90", f"{k}_pd_mean", f"{k}_pfa_mean",
                 f"{k}_pmd_mean"]
    return cols


def sweep(cfg: RunConfig, param: str, values: Iterable, workers: Optional[int] = None,
          dump_dir: Optional[Path] = None) -> tuple[list[dict], list[dict]]:
    """Run ``cfg`` once per value of ``param``; returns (records, summary rows)."""
    if param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {param!r}; choose one of {', '.join(SWEEPABLE)}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    records, summary = [], []
    for v in values:
        c = cfg.with_value(param, v).validated()
        recs = run(c, workers, dump_dir)
        for r in recs:
            records.append({"param": param, "value": v, **r})
        summary.append({"param": param, "value": v, **summarize(c, recs)})
    return records, summary


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return "%.9g" % v
    return str(v)


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(path: Path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    Path(path).write_text(to_csv(rows, columns), encoding="utf-8")


def record_columns_for(cfg: RunConfig, swept: bool = True) -> list[str]:
    base = record_columns(cfg.trackers)
    return (["param", "value"] + base) if swept else base
