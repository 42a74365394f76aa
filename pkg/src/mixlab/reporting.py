"""Result persistence and plot-data extraction.

A completed run directory holds records.csv (replicate rows for the
largest grid point, plus records_n{n}.csv for any other grid points),
summary.json, and manifest.json.  The report step turns summary.json into
plain-text column files that plot directly.

records.csv layout: row 1 is the schema string, row 2 the column names,
then one comma-separated line per replicate.  Floats carry 17 significant
digits so a re-read reproduces the arrays bit for bit.
"""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .harness import RECORD_COLUMNS, RecordSet

RECORDS_SCHEMA = "mixlab-records-v1"

_INT_COLUMNS = {"replicate", "seed_stream", "S_n", "excursion"}


class IncompleteRunError(RuntimeError):
    """The run directory is missing pieces the report needs."""


def write_records(records: RecordSet, path) -> None:
    cols = records.columns()
    with open(path, "w") as fh:
        fh.write(f"# {RECORDS_SCHEMA}\n")
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for i in range(len(records)):
            parts = []
            for name in RECORD_COLUMNS:
                v = cols[name][i]
                parts.append(str(int(v)) if name in _INT_COLUMNS else f"{float(v):.17g}")
            fh.write(",".join(parts) + "\n")


def read_records(path) -> RecordSet:
    with open(path) as fh:
        schema = fh.readline().strip()
        if schema != f"# {RECORDS_SCHEMA}":
            raise IncompleteRunError(f"unexpected schema line {schema!r} in {path}")
        header = fh.readline().strip().split(",")
        if tuple(header) != RECORD_COLUMNS:
            raise IncompleteRunError(f"unexpected columns {header} in {path}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(RECORD_COLUMNS))
    return RecordSet(
        replicate=data[:, 0].astype(np.int64),
        seed_stream=data[:, 1].astype(np.int64),
        s_n=data[:, 2].astype(np.int64),
        excursion=data[:, 3] != 0,
        p=data[:, 4],
        excess_pm=data[:, 5],
        excess_pim=data[:, 6],
        excess_erm=data[:, 7],
        regret=data[:, 8],
        regret_bound=data[:, 9],
    )


def write_summary(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def read_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def make_manifest(summary: dict, config_hash: str, seed: int) -> dict:
    """Reproducibility manifest with the run's internal consistency checks."""
    per_n = summary.get("per_n", [])
    checks = {
        "regret_bound": all(b["regret"]["violations"] == 0 for b in per_n),
        "erm_excess_nonnegative": all(b["rules"]["erm"]["min"] >= -1e-12 for b in per_n),
        "excursion_dp_consistent": all(b["excursion"]["dp_in_wilson3"] for b in per_n),
    }
    return {
        "tool": "mixlab",
        "version": __version__,
        "config_hash": config_hash,
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "checks": checks,
    }


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_run(out_dir, records_by_n: dict[int, RecordSet], summary: dict,
              manifest: dict) -> list[Path]:
    """Persist a completed run; records.csv holds the largest grid point."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    n_max = max(records_by_n)
    for n, records in sorted(records_by_n.items()):
        path = out / ("records.csv" if n == n_max else f"records_n{n}.csv")
        write_records(records, path)
        paths.append(path)
    write_summary(summary, out / "summary.json")
    paths.append(out / "summary.json")
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    paths.append(out / "manifest.json")
    return paths


def _f(x) -> str:
    if x is None:
        return "nan"
    return f"{float(x):.17g}"


def _dat(path: Path, header: str, rows) -> Path:
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for row in rows:
            fh.write(" ".join(row) + "\n")
    return path


def write_report(out_dir) -> list[Path]:
    """Emit plot-data files from a completed run directory.

    tail_vs_n.dat        n, excursion freq, Wilson 3-sigma lo/hi, exact DP value
    tail_excess_pm_vs_n.dat  n, freq of pm excess over the first tail
                             threshold, Wilson lo/hi, n^-c0 reference
    gap_vs_n.dat         n, per-rule mean excess and standard errors, and
                         the expectation ceiling log|G| / (lam (n+1))
    hist_excess_{rule}_n{n}.dat  conditional excess histograms where the
                         excursion event was hit

    Raises IncompleteRunError when the directory lacks a summary or its
    records are empty.
    """
    out = Path(out_dir)
    summary_path = out / "summary.json"
    records_path = out / "records.csv"
    if not summary_path.is_file():
        raise IncompleteRunError(f"{summary_path} does not exist")
    if not records_path.is_file():
        raise IncompleteRunError(f"{records_path} does not exist")
    with open(records_path) as fh:
        has_data = sum(1 for _ in zip(fh, range(3))) >= 3
    if not has_data:
        raise IncompleteRunError(f"{records_path} has no data rows")
    summary = read_summary(summary_path)
    per_n = summary.get("per_n", [])
    if not per_n:
        raise IncompleteRunError(f"{summary_path} has an empty grid")

    paths = []
    rows = [[str(b["n"]), _f(b["excursion"]["freq"]), _f(b["excursion"]["wilson3"][0]),
             _f(b["excursion"]["wilson3"][1]), _f(b["excursion"]["dp_exact"])]
            for b in per_n]
    paths.append(_dat(out / "tail_vs_n.dat", "n freq wilson_lo wilson_hi dp_exact", rows))

    fracs = summary.get("config", {}).get("tail_fractions") or [0.5]
    key = f"{fracs[0]:g}"
    rows = []
    for b in per_n:
        t = b["rules"]["pm"]["tails"].get(key)
        if t is None:
            continue
        rows.append([str(b["n"]), _f(t["freq"]), _f(t["wilson3"][0]),
                     _f(t["wilson3"][1]), _f(b.get("tail_reference"))])
    paths.append(_dat(out / "tail_excess_pm_vs_n.dat",
                      "n freq wilson_lo wilson_hi reference", rows))

    rows = [[str(b["n"]), _f(b["rules"]["pm"]["mean"]), _f(b["rules"]["pm"]["sem"]),
             _f(b["rules"]["pim"]["mean"]), _f(b["rules"]["pim"]["sem"]),
             _f(b["rules"]["erm"]["mean"]), _f(b["rules"]["erm"]["sem"]),
             _f(b["gap_bound"])] for b in per_n]
    paths.append(_dat(out / "gap_vs_n.dat",
                      "n mean_pm sem_pm mean_pim sem_pim mean_erm sem_erm gap_bound", rows))

    for b in per_n:
        cond = b.get("conditional")
        if not cond:
            continue
        for rule in ("pm", "pim"):
            hist = cond[f"histogram_{rule}"]
            edges, counts = hist["edges"], hist["counts"]
            rows = [[_f(edges[i]), _f(edges[i + 1]), str(counts[i])]
                    for i in range(len(counts))]
            paths.append(_dat(out / f"hist_excess_{rule}_n{b['n']}.dat",
                              "bin_lo bin_hi count", rows))
    return paths
