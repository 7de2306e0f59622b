# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Lambda sweeps: independent seeded runs per (lambda, repeat).

Members run in worker processes up to a job limit.  A failed member is
recorded with its error and the sweep carries on; the summary table
aggregates the members that finished."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from pivot.config import Config
from pivot.errors import ConfigurationError, PivotError
from pivot.pipeline import run_training
from pivot.progress import null_progress

log = logging.getLogger(__name__)

MEMBER_COLUMNS = ("lam", "repeat", "seed", "nominal", "status", "best_ams",
                  "max_ks", "loss_f", "loss_r", "error")
SUMMARY_COLUMNS = ("lam", "nominal", "runs", "failures", "best_ams_mean",
                   "best_ams_std", "max_ks_mean", "max_ks_std")


@dataclass(frozen=True)
class SweepMember(object):
    lam: float
    repeat: int
    seed: int
    nominal: bool = False

    @property
    def name(self):
        tag = "lam%g_rep%d" % (self.lam, self.repeat)
        return tag + "_nominal" if self.nominal else tag


def sweep_members(lambdas, repeats, base_seed=0, include_nominal=False):
    """Every (lambda, repeat) pair; repeat k uses seed base_seed + k for
    every lambda.  The nominal baseline is lambda 0 trained at z = 0 only."""
    lambdas = [float(lam) for lam in lambdas]
    if not lambdas:
        raise ConfigurationError("empty lambda list")
    if int(repeats) < 1:
        raise ConfigurationError("repeats must be >= 1")
    members = [SweepMember(lam, k, base_seed + k)
               for lam in lambdas for k in range(int(repeats))]
    if include_nominal:
        members += [SweepMember(0.0, k, base_seed + k, nominal=True)
                    for k in range(int(repeats))]
    return members


def run_member(dataset_path, cfg_values, member, out_dir, test_dataset=None):
    """Train one member; training, evaluation and file failures come back
    as a "failed" row instead of raising."""
    cfg = Config.from_dict(cfg_values)
    cfg.update({"lam": member.lam, "seed": member.seed})
    if member.nominal:
        cfg["nominal_z"] = 0.0
    row = dict((c, None) for c in MEMBER_COLUMNS)
    row.update({"lam": member.lam, "repeat": member.repeat,
                "seed": member.seed, "nominal": member.nominal})
    try:
        headline = run_training(dataset_path, cfg,
                                os.path.join(out_dir, member.name),
                                plain=member.nominal, command="sweep",
                                test_dataset=test_dataset)
    except (PivotError, OSError) as e:
        row.update({"status": "failed", "error": str(e)})
        return row
    row["status"] = "ok"
    for key in ("best_ams", "max_ks", "loss_f", "loss_r"):
        row[key] = headline.get(key)
    return row


def _mean_std(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    if len(values) == 1:
        return float(values[0]), 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1))


def summarize(rows):
    """One summary row per (lambda, nominal), in first-seen order."""
    groups = {}
    for row in rows:
        groups.setdefault((row["lam"], row["nominal"]), []).append(row)
    out = []
    for (lam, nominal), members in groups.items():
        ok = [m for m in members if m["status"] == "ok"]
        ams_mean, ams_std = _mean_std([m["best_ams"] for m in ok])
        ks_mean, ks_std = _mean_std([m["max_ks"] for m in ok])
        out.append({"lam": lam, "nominal": nominal, "runs": len(ok),
                    "failures": len(members) - len(ok),
                    "best_ams_mean": ams_mean, "best_ams_std": ams_std,
                    "max_ks_mean": ks_mean, "max_ks_std": ks_std})
    return out


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def write_table(rows, columns, path):
    with open(str(path), "w", newline="") as handle:
        out = csv.writer(handle, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            out.writerow([_cell(row[c]) for c in columns])


def run_sweep(dataset_path, cfg, lambdas, repeats, out_dir, jobs=1,
              include_nominal=False, test_dataset=None, progress=None):
    """Run every member, write sweep.csv and sweep_summary.csv to out_dir.

    Returns (member rows, summary rows)."""
    out_dir = str(out_dir)
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    members = sweep_members(lambdas, repeats, cfg["seed"], include_nominal)
    values = cfg.as_dict()
    progress = progress or null_progress()
    progress.frequency = 1
    progress.start()
    rows = []
    if int(jobs) <= 1:
        for i, member in enumerate(members, 1):
            rows.append(run_member(dataset_path, values, member, out_dir,
                                   test_dataset))
            _log_member(rows[-1])
            progress.tick(i, len(members))
    else:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            futures = [pool.submit(run_member, dataset_path, values, member,
                                   out_dir, test_dataset)
                       for member in members]
            for i, future in enumerate(as_completed(futures), 1):
                rows.append(future.result())
                _log_member(rows[-1])
                progress.tick(i, len(members))
    progress.end()
    order = dict(((m.lam, m.repeat, m.nominal), i)
                 for i, m in enumerate(members))
    rows.sort(key=lambda row: order[(row["lam"], row["repeat"], row["nominal"])])
    summary = summarize(rows)
    write_table(rows, MEMBER_COLUMNS, os.path.join(out_dir, "sweep.csv"))
    write_table(summary, SUMMARY_COLUMNS,
                os.path.join(out_dir, "sweep_summary.csv"))
    return rows, summary


def _log_member(row):
    if row["status"] == "ok":
        log.info("sweep member lam=%g repeat=%d done", row["lam"], row["repeat"])
    else:
        log.warning("sweep member lam=%g repeat=%d failed: %s", row["lam"],
                    row["repeat"], row["error"])


def read_summary(path):
    """Summary rows back from sweep_summary.csv."""
    out = []
    with open(str(path), "r", newline="") as handle:
        for row in csv.DictReader(handle):
            parsed = {"lam": float(row["lam"]),
                      "nominal": row["nominal"] == "True",
                      "runs": int(row["runs"]),
                      "failures": int(row["failures"])}
            for key in SUMMARY_COLUMNS[4:]:
                parsed[key] = float(row[key]) if row[key] else None
            out.append(parsed)
    return out
