"""Seeded batch sweeps over (humans, robots, regime) cells.

Output layout under the experiment's output directory::

    summary.csv             one SummaryRow per cell
    runs.csv                one line per replication with its seed and status
    metrics/<run>.csv       per-iteration metrics of successful runs
    snapshots/<run>/*.png   optional frames

Results are collected, sorted by (cell, replication) and only then written,
so every byte is independent of the worker count.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ExperimentSpec, SimConfig
from .records import SummaryRow, fmt, read_metrics, write_metrics, write_summary
from .simulator import SimulationDiverged, run

QUANTILE_METHOD = "midpoint"
RUN_COLUMNS = ("humans", "robots", "regime", "replication", "seed", "status", "evac_rate", "density_err")

_U64 = (1 << 64) - 1


def run_seed(base_seed: int, cell: tuple[int, int, str], replication: int) -> int:
    """``base_seed`` XOR a 64-bit blake2b hash of the cell and replication."""
    key = f"{cell[0]}|{cell[1]}|{cell[2]}|{replication}".encode()
    h = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    return (int(base_seed) & _U64) ^ h


def run_name(cell: tuple[int, int, str], replication: int) -> str:
    return f"N{cell[0]}-n{cell[1]}-{cell[2]}-r{replication:04d}"


@dataclass(frozen=True)
class RunTask:
    cell: tuple[int, int, str]
    replication: int
    config: SimConfig
    metrics_path: str
    snapshot_dir: str | None
    snapshot_every: int


@dataclass(frozen=True)
class RunResult:
    cell: tuple[int, int, str]
    replication: int
    seed: int
    ok: bool
    evac_rate: float
    density_err: float
    message: str = ""


def execute(task: RunTask) -> RunResult:
    """Run one replication and write its metrics; divergence becomes a failed result."""
    on_step = None
    if task.snapshot_dir and task.snapshot_every > 0:
        from .snapshot import snapshot_callback

        on_step = snapshot_callback(task.config, task.snapshot_dir, task.snapshot_every)
    try:
        metrics = run(task.config, on_step=on_step, keep_robot_trace=False)
    except SimulationDiverged as exc:
        return RunResult(task.cell, task.replication, task.config.seed, False, float("nan"), float("nan"), str(exc))
    write_metrics(metrics.rows, task.metrics_path)
    # summaries use the values as stored so ``summarize`` reproduces them exactly
    final = {k: float(fmt(v)) for k, v in metrics.final.items()}
    return RunResult(task.cell, task.replication, task.config.seed, True, final["evac_rate"], final["density_err"])


def plan(spec: ExperimentSpec, out_dir) -> list[RunTask]:
    out = Path(out_dir)
    tasks = []
    for cell in spec.cells():
        humans, robots, regime = cell
        for r in range(spec.replications):
            seed = run_seed(spec.seed, cell, r)
            cfg = replace(spec.base, humans=humans, robots=robots, regime=regime, seed=seed)
            name = run_name(cell, r)
            snap = str(out / "snapshots" / name) if spec.snapshots > 0 else None
            tasks.append(RunTask(cell, r, cfg, str(out / "metrics" / f"{name}.csv"), snap, spec.snapshots))
    return tasks


def quartiles(values) -> tuple[float, float, float, float, float]:
    v = np.asarray(values, dtype=float)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0], method=QUANTILE_METHOD)
    return tuple(float(x) for x in q)


def summarize_results(spec_cells, results: list[RunResult]) -> list[SummaryRow]:
    """One row per cell over its successful replications."""
    rows = []
    for cell in spec_cells:
        mine = [r for r in results if r.cell == cell]
        good = [r for r in mine if r.ok]
        fails = len(mine) - len(good)
        if good:
            rates = [r.evac_rate for r in good]
            stats = quartiles(rates)
            mean = float(np.mean(rates))
            err = float(np.median([r.density_err for r in good]))
        else:
            stats, mean, err = (float("nan"),) * 5, float("nan"), float("nan")
        rows.append(SummaryRow(cell[0], cell[1], cell[2], len(mine), fails, *stats, mean, err))
    return rows


def write_runs(results: list[RunResult], path):
    lines = [",".join(RUN_COLUMNS)]
    for r in results:
        status = "ok" if r.ok else "failed"
        vals = (*r.cell, r.replication, r.seed, status, r.evac_rate, r.density_err)
        lines.append(",".join(fmt(v) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_runs(path) -> list[RunResult]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or tuple(text[0].split(",")) != RUN_COLUMNS:
        raise ValueError(f"{path}: unexpected runs header")
    out = []
    for line in text[1:]:
        h, n, regime, rep, seed, status, rate, err = line.split(",")
        out.append(RunResult((int(h), int(n), regime), int(rep), int(seed), status == "ok", float(rate), float(err)))
    return out


def run_batch(spec: ExperimentSpec, parallelism: int = 1, out_dir=None) -> list[SummaryRow]:
    """Run every (cell, replication) and write summary, run index and metrics.

    Parameters
    ----------
    spec : ExperimentSpec
    parallelism : int
        Worker processes; ``1`` runs in-process.
    out_dir : path, optional
        Defaults to ``spec.output``.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    out = Path(out_dir if out_dir is not None else spec.output)
    (out / "metrics").mkdir(parents=True, exist_ok=True)
    tasks = plan(spec, out)
    if parallelism == 1 or len(tasks) == 1:
        results = [execute(t) for t in tasks]
    else:
        workers = min(parallelism, len(tasks))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute, tasks))
    results.sort(key=lambda r: (r.cell, r.replication))
    write_runs(results, out / "runs.csv")
    rows = summarize_results(sorted(set(spec.cells())), results)
    write_summary(rows, out / "summary.csv")
    return rows


def summarize_dir(out_dir) -> list[SummaryRow]:
    """Rebuild ``summary.csv`` from ``runs.csv`` and the stored metrics files."""
    out = Path(out_dir)
    runs = read_runs(out / "runs.csv")
    results = []
    for r in runs:
        if r.ok:
            rows = read_metrics(out / "metrics" / f"{run_name(r.cell, r.replication)}.csv")
            last = rows[-1]
            r = replace(r, evac_rate=last[6], density_err=last[1])
        results.append(r)
    cells = sorted({r.cell for r in results})
    rows = summarize_results(cells, results)
    write_summary(rows, out / "summary.csv")
    return rows


def default_parallelism() -> int:
    return max(1, os.cpu_count() or 1)
