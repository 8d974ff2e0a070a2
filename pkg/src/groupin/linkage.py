"""Long-term linkage between devices and per-interval group statistics."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping

from .core import DeviceId
from .store import GroupRecord

Pair = tuple[DeviceId, DeviceId]


@dataclass(frozen=True)
class LinkageEdge:
    co_group: int
    co_present: int

    def __post_init__(self) -> None:
        if not 0 <= self.co_group <= self.co_present or self.co_present < 1:
            raise ValueError(f"invalid counts co_group={self.co_group} co_present={self.co_present}")

    @property
    def linkage(self) -> float:
        return self.co_group / self.co_present


@dataclass
class LinkageGraph:
    """Pair counts folded over a record stream.

    Counts cover every co-present pair; ``min_co_present`` only filters the
    edges exposed through :meth:`edges` and the exports.
    """

    min_co_present: int = 3
    vertices: set = field(default_factory=set)
    counts: dict[Pair, list[int]] = field(default_factory=dict)  # pair -> [co_group, co_present]

    def add(self, record: GroupRecord) -> None:
        self.vertices.update(record.present)
        lab = record.labeling
        for a, b in combinations(record.present, 2):
            c = self.counts.setdefault((a, b), [0, 0])
            c[1] += 1
            if lab[a] == lab[b]:
                c[0] += 1

    def edges(self) -> dict[Pair, LinkageEdge]:
        return {p: LinkageEdge(g, n) for p, (g, n) in sorted(self.counts.items())
                if n >= self.min_co_present}

    def linkage(self, a: DeviceId, b: DeviceId) -> float | None:
        e = self.edges().get((a, b) if a < b else (b, a))
        return None if e is None else e.linkage

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("device_a", "device_b", "linkage", "co_group", "co_present"))
            for (a, b), e in self.edges().items():
                w.writerow((a, b, f"{e.linkage:.6f}", e.co_group, e.co_present))

    def to_dot(self) -> str:
        lines = ["graph linkage {"]
        for v in sorted(self.vertices):
            lines.append(f'  "{v}";')
        for (a, b), e in self.edges().items():
            if e.co_group:
                lines.append(f'  "{a}" -- "{b}" [weight={e.linkage:.4f}, label="{e.linkage:.2f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def write_dot(self, path: str | Path) -> None:
        Path(path).write_text(self.to_dot(), encoding="utf-8")


def linkage_build(records: Iterable[GroupRecord], min_co_present: int = 3) -> LinkageGraph:
    if min_co_present < 1:
        raise ValueError("min_co_present must be >= 1")
    g = LinkageGraph(min_co_present)
    for r in records:
        g.add(r)
    return g


@dataclass(frozen=True)
class IntervalStats:
    interval_index: int
    people: int
    groups: int

    @property
    def ratio(self) -> float:
        """People per group; zero for an empty interval."""
        return self.people / self.groups if self.groups else 0.0


@dataclass
class GroupStats:
    series: list[IntervalStats] = field(default_factory=list)
    histogram: Counter = field(default_factory=Counter)  # group size -> number of groups

    def add(self, record: GroupRecord) -> IntervalStats:
        sizes = Counter(record.labeling.values()).values()
        row = IntervalStats(record.interval_index, len(record.present), len(sizes))
        self.histogram.update(sizes)
        self.series.append(row)
        return row

    @property
    def total_groups(self) -> int:
        return sum(r.groups for r in self.series)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("interval_index", "people", "groups", "ratio"))
            for r in self.series:
                w.writerow((r.interval_index, r.people, r.groups, f"{r.ratio:.6f}"))

    def write_histogram_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("group_size", "count"))
            for size in sorted(self.histogram):
                w.writerow((size, self.histogram[size]))


def stats_build(records: Iterable[GroupRecord]) -> GroupStats:
    s = GroupStats()
    for r in records:
        s.add(r)
    return s


def records_from_truth(truth: Mapping[int, Mapping[DeviceId, int]], scheme: str = "centralized-wfm",
                       interval_seconds: float = 120.0) -> list[GroupRecord]:
    """Wrap ground-truth labelings as records, e.g. to compute reference statistics."""
    out = []
    for k in sorted(truth):
        labels = truth[k]
        dense = {lab: i for i, lab in enumerate(sorted(set(labels.values())))}
        out.append(GroupRecord(k, k * interval_seconds, (k + 1) * interval_seconds, scheme,
                               {d: dense[v] for d, v in labels.items()}, tuple(labels)))
    return out
