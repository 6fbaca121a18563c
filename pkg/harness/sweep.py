import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from scipy.stats import iqr

from .runner import Simulation
from .scenario import Scenario


logger = logging.getLogger(__name__)

DEFAULT_NODE_COUNTS = (16, 32, 50, 64, 80, 100, 128)
DEFAULT_SEEDS = tuple(range(1, 11))

CELL_KEYS = ("protocol", "node_count", "p_err", "seed")
METRICS = ("avg_delay_ms", "throughput_kbps", "goodput_kbps", "overhead_kbps", "overhead_fraction",
           "pdr", "energy_used_joules", "energy_per_node_joules", "dead_nodes")
CELL_COLUMNS = CELL_KEYS + METRICS + ("generated", "delivered", "dropped", "error")
FLOAT_FORMAT = "%.6f"


@dataclass(frozen=True)
class SweepSpec:
    """Cross product of protocols, node counts, error rates and seeds over one scenario template.

    Attributes:
        template (Scenario): Every other setting of each cell.
        node_counts (tuple): Network sizes.
        protocols (tuple): Protocol names.
        seeds (tuple): Run seeds.
        p_errs (tuple): Channel error rates; the template's own value when empty.
    """

    template: Scenario = Scenario()
    node_counts: tuple = DEFAULT_NODE_COUNTS
    protocols: tuple = ("anthocnet", "dsr")
    seeds: tuple = DEFAULT_SEEDS
    p_errs: tuple = ()

    def cells(self) -> list:
        """Every ``(protocol, node_count, p_err, seed)`` cell in sorted order."""
        p_errs = self.p_errs or (self.template.p_err,)
        return sorted((protocol, n, float(p), seed) for protocol in self.protocols
                      for n in self.node_counts for p in p_errs for seed in self.seeds)

    def scenario_for(self, protocol: str, node_count: int, p_err: float, seed: int) -> Scenario:
        changes = dict(protocol=protocol, node_count=node_count, p_err=p_err, seed=seed)
        if self.template.placement and len(self.template.placement) != node_count:
            changes["placement"] = ()
        return self.template.with_changes(**changes)


def run_cell(spec: SweepSpec, cell: tuple) -> dict:
    """Run one sweep cell; a failure is recorded in the ``error`` column instead of raised."""
    row = dict(zip(CELL_KEYS, cell))
    try:
        report = Simulation(spec.scenario_for(*cell)).run()
        row.update(report.as_row())
        row["error"] = ""
    except Exception as exc:
        logger.warning(f"Sweep cell {cell} failed: {exc}")
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def aggregate_cells(cells: pd.DataFrame) -> pd.DataFrame:
    """Median and interquartile range of every metric per (protocol, node_count, p_err).

    Failed cells and absent values (no delivery, hence no delay) are ignored.
    """
    cells = cells.reindex(columns=list(CELL_COLUMNS))
    rows = []
    for (protocol, node_count, p_err), group in cells.groupby(["protocol", "node_count", "p_err"], sort=True):
        failed = group["error"].fillna("").astype(str).str.len() > 0
        ok = group[~failed]
        row = {"protocol": protocol, "node_count": node_count, "p_err": p_err,
               "runs": int(len(group)), "failed": int(failed.sum())}
        for metric in METRICS:
            values = pd.to_numeric(ok[metric], errors="coerce").dropna().to_numpy(dtype=float)
            row[f"{metric}_median"] = float(np.median(values)) if values.size else np.nan
            row[f"{metric}_iqr"] = float(iqr(values)) if values.size else np.nan
        rows.append(row)
    columns = ["protocol", "node_count", "p_err", "runs", "failed"]
    columns += [f"{m}_{stat}" for m in METRICS for stat in ("median", "iqr")]
    return pd.DataFrame(rows, columns=columns)


def run_sweep(spec: SweepSpec, jobs: int = 1, out_dir: Optional[Path] = None) -> tuple:
    """Run every cell of ``spec`` and aggregate the results.

    Cells run on a pool of ``jobs`` worker processes, each with its own engine;
    rows are sorted by cell before writing so the CSV bytes do not depend on
    ``jobs``.

    Args:
        spec (SweepSpec): Cells to run.
        jobs (int): Worker processes; 1 runs in-process.
        out_dir (Path, optional): Where ``cells.csv`` and ``aggregate.csv`` are written.

    Returns:
        tuple: ``(cells DataFrame, aggregate DataFrame)``.

    Raises:
        ValueError: If ``jobs`` is below 1 or the sweep has no cells.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    cells = spec.cells()
    if not cells:
        raise ValueError("the sweep has no cells")
    spec.template.validate()
    logger.info(f"Sweeping {len(cells)} cells with {jobs} worker(s)")
    if jobs == 1:
        rows = [run_cell(spec, cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, [spec] * len(cells), cells))

    frame = pd.DataFrame(rows).reindex(columns=list(CELL_COLUMNS))
    for column in METRICS + ("generated", "delivered", "dropped"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    frame["error"] = frame["error"].fillna("")
    frame = frame.sort_values(list(CELL_KEYS), kind="mergesort").reset_index(drop=True)
    aggregate = aggregate_cells(frame)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out_dir / "cells.csv", index=False, float_format=FLOAT_FORMAT)
        aggregate.to_csv(out_dir / "aggregate.csv", index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Wrote {out_dir / 'cells.csv'} and {out_dir / 'aggregate.csv'}")
    return frame, aggregate
