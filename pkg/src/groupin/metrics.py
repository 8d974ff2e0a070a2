"""Accuracy of a predicted grouping against ground truth."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

from .cluster import groups_of
from .core import DeviceId

REPORT_COLUMNS = ("interval_index", "pairwise", "jaccard", "tp", "tn", "population")


class DomainMismatch(ValueError):
    pass


def _check_domain(pred: Mapping, truth: Mapping) -> None:
    if set(pred) != set(truth):
        missing = sorted(set(pred) ^ set(truth))[:5]
        raise DomainMismatch(f"prediction and truth cover different devices, e.g. {missing}")


def pair_counts(pred: Mapping[DeviceId, int], truth: Mapping[DeviceId, int]) -> tuple[int, int, int]:
    """Return (tp, tn, total pairs)."""
    _check_domain(pred, truth)
    tp = tn = total = 0
    for a, b in combinations(sorted(pred), 2):
        same_pred = pred[a] == pred[b]
        same_truth = truth[a] == truth[b]
        if same_pred and same_truth:
            tp += 1
        elif not same_pred and not same_truth:
            tn += 1
        total += 1
    return tp, tn, total


def pairwise_score(pred: Mapping[DeviceId, int], truth: Mapping[DeviceId, int]) -> float:
    tp, tn, total = pair_counts(pred, truth)
    if total == 0:
        return 1.0
    return (tp + tn) / total


def jaccard_score(pred: Mapping[DeviceId, int], truth: Mapping[DeviceId, int]) -> float:
    """Share of devices whose predicted group was matched to their true group.

    Groups are matched greedily by largest intersection; ties prefer the
    larger predicted group, then the lexicographically smaller members.
    """
    _check_domain(pred, truth)
    if not pred:
        return 1.0
    p_groups = [set(g) for g in groups_of(pred)]
    t_groups = [set(g) for g in groups_of(truth)]
    p_left = list(range(len(p_groups)))
    t_left = list(range(len(t_groups)))
    correct = 0
    while p_left and t_left:
        best = None
        for i in p_left:
            for j in t_left:
                inter = len(p_groups[i] & t_groups[j])
                key = (-inter, -len(p_groups[i]), min(p_groups[i]), min(t_groups[j]))
                if best is None or key < best[0]:
                    best = (key, i, j)
        key, i, j = best
        if key[0] == 0:
            break
        correct += -key[0]
        p_left.remove(i)
        t_left.remove(j)
    return correct / len(pred)


@dataclass(frozen=True)
class IntervalAccuracy:
    interval_index: int
    pairwise: float
    jaccard: float
    tp: int
    tn: int
    population: int


@dataclass
class AccuracyReport:
    rows: list[IntervalAccuracy] = field(default_factory=list)

    def add(self, interval_index: int, pred: Mapping, truth: Mapping) -> IntervalAccuracy:
        tp, tn, _ = pair_counts(pred, truth)
        row = IntervalAccuracy(interval_index, pairwise_score(pred, truth), jaccard_score(pred, truth),
                               tp, tn, len(pred))
        self.rows.append(row)
        return row

    def _series(self, attr: str) -> list[float]:
        return [getattr(r, attr) for r in self.rows]

    def mean(self, attr: str) -> float:
        vals = self._series(attr)
        return statistics.fmean(vals) if vals else float("nan")

    def std(self, attr: str) -> float:
        vals = self._series(attr)
        return statistics.pstdev(vals) if vals else float("nan")

    def summary(self) -> dict:
        return {k: (self.mean(k), self.std(k)) for k in ("pairwise", "jaccard")}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_COLUMNS)
            for r in self.rows:
                w.writerow([r.interval_index, f"{r.pairwise:.6f}", f"{r.jaccard:.6f}", r.tp, r.tn, r.population])


def score_records(records: Sequence, truth: Mapping[int, Mapping[DeviceId, int]]) -> AccuracyReport:
    """Score stored records against per-interval truth labels.

    Truth is restricted to the devices present in each record; records with
    fewer than two present devices are skipped.
    """
    report = AccuracyReport()
    for rec in records:
        if len(rec.present) < 2:
            continue
        labels = truth.get(rec.interval_index, {})
        unknown = [d for d in rec.present if d not in labels]
        if unknown:
            raise DomainMismatch(f"interval {rec.interval_index}: no truth for {unknown[:5]}")
        t = {d: labels[d] for d in rec.present}
        report.add(rec.interval_index, dict(rec.labeling), t)
    return report
