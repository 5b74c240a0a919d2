"""Comma-separated metrics and summary files.

Numbers are written with 9 significant digits so files are stable across
platforms; every file has one header line and ends with a newline.
"""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .simulator import METRIC_COLUMNS


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v != v:
            return "nan"
        out = f"{v:.9g}"
        return "0" if out == "-0" else out
    return str(value)


def _write(path, header, rows):
    path = Path(path)
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_metrics(rows, path):
    """Write per-iteration metric rows in the fixed column order."""
    for row in rows:
        if len(row) != len(METRIC_COLUMNS):
            raise ValueError(f"metrics row has {len(row)} values, expected {len(METRIC_COLUMNS)}")
    _write(path, METRIC_COLUMNS, rows)


def read_metrics(path) -> list[tuple[float, ...]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != METRIC_COLUMNS:
            raise ValueError(f"{path}: unexpected metrics header {header}")
        return [tuple(float(v) for v in row) for row in reader]


@dataclass(frozen=True)
class SummaryRow:
    humans: int
    robots: int
    regime: str
    replications: int
    failures: int
    rate_min: float
    rate_q1: float
    rate_median: float
    rate_q3: float
    rate_max: float
    rate_mean: float
    density_err_median: float


SUMMARY_COLUMNS = tuple(f.name for f in fields(SummaryRow))


def write_summary(rows, path):
    _write(path, SUMMARY_COLUMNS, [astuple(r) for r in rows])


def read_summary(path) -> list[SummaryRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != SUMMARY_COLUMNS:
            raise ValueError(f"{path}: unexpected summary header {header}")
        out = []
        for row in reader:
            h, n, regime, reps, fails, *stats = row
            out.append(SummaryRow(int(h), int(n), regime, int(reps), int(fails), *(float(s) for s in stats)))
        return out
