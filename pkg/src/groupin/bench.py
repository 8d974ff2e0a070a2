"""Detection-time and query-time benchmark over synthetic crowds."""

from __future__ import annotations

import csv
import logging
import statistics
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import simulator as sim
from .pipeline import RunConfig, detect_interval
from .store import GroupStore

log = logging.getLogger(__name__)

DEFAULT_POPULATIONS = (2, 20, 80, 200)
DEFAULT_INTERVALS = (120.0, 600.0, 3600.0)
BENCH_COLUMNS = ("interval_seconds", "population", "groups", "detect_mean_s", "detect_std_s",
                 "query_mean_s", "query_std_s", "repeats")
STORE_RECORDS = 24  # records in the per-cell store that queries run against


@dataclass(frozen=True)
class BenchCell:
    interval_seconds: float
    population: int
    groups: int
    detect_mean: float
    detect_std: float
    query_mean: float
    query_std: float
    repeats: int


@dataclass
class BenchResult:
    cells: list[BenchCell]

    def __post_init__(self) -> None:
        self.cells.sort(key=lambda c: (c.interval_seconds, c.population))

    def exponent(self, interval_seconds: float) -> float:
        """Slope of log(detection time) against log(population)."""
        pts = [(c.population, c.detect_mean) for c in self.cells
               if c.interval_seconds == interval_seconds and c.population > 0 and c.detect_mean > 0]
        if len(pts) < 2:
            return float("nan")
        x, y = np.log([p for p, _ in pts]), np.log([t for _, t in pts])
        return float(np.polyfit(x, y, 1)[0])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(BENCH_COLUMNS)
            for c in self.cells:
                w.writerow((f"{c.interval_seconds:g}", c.population, c.groups, f"{c.detect_mean:.6f}",
                            f"{c.detect_std:.6f}", f"{c.query_mean:.6f}", f"{c.query_std:.6f}", c.repeats))


def _timed(fn) -> tuple[float, object]:
    t0 = time.perf_counter()
    out = fn()
    return time.perf_counter() - t0, out


def bench_cell(population: int, interval_seconds: float, cfg: RunConfig, repeats: int = 3,
               seed: int = 0) -> BenchCell:
    cfg = replace(cfg, interval_seconds=interval_seconds, origin=0.0)
    grid = cfg.grid()
    packets = sim.simulate_packets(sim.crowd(population, seed, duration=interval_seconds))
    detect_interval(packets, cfg, grid, 0)  # warm-up, discarded
    det = []
    record = None
    for _ in range(repeats):
        dt, record = _timed(lambda: detect_interval(packets, cfg, grid, 0))
        det.append(dt)
    qry = []
    with tempfile.TemporaryDirectory() as tmp:
        store = GroupStore(tmp)
        for k in range(STORE_RECORDS):
            start, end = grid.interval_bounds(k)
            store.append(replace(record, interval_index=k, interval_start=start, interval_end=end))
        mid = grid.interval_bounds(STORE_RECORDS // 2)
        store.query(*mid)
        for _ in range(repeats):
            qry.append(_timed(lambda: store.query(*mid))[0])
    groups = len(set(record.labeling.values()))
    return BenchCell(interval_seconds, population, groups, statistics.fmean(det), statistics.pstdev(det),
                     statistics.fmean(qry), statistics.pstdev(qry), repeats)


def bench(populations: Sequence[int] = DEFAULT_POPULATIONS,
          interval_lengths: Sequence[float] = DEFAULT_INTERVALS,
          cfg: RunConfig = RunConfig(sample_seconds=30.0), repeats: int = 3, seed: int = 0) -> BenchResult:
    """Time detection for every (interval length, population) cell, sequentially."""
    cells = []
    for t in interval_lengths:
        for n in populations:
            cell = bench_cell(n, t, cfg, repeats, seed)
            log.info("T=%gs n=%d detect %.4fs", t, n, cell.detect_mean)
            cells.append(cell)
    return BenchResult(cells)
