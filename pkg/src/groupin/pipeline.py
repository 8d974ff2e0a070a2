"""Per-interval group detection, batch and streaming."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .centralized import (MatchScoreVector, MddParams, PairScore, mdd_scores, mdd_to_similarity,
                          scanner_count, wfm_scores)
from .cluster import ClusterParams, build_graph, cluster
from .core import DeviceId, TimeGrid, WirelessPacket, WirelessTrace, build_fingerprints
from .decentralized import UprParams, spr_messages, upr_unify
from .preprocess import NormalizationConfig, StreamingSampler, normalize, to_traces
from .store import SCHEMES, GroupRecord

log = logging.getLogger(__name__)

# UPR and mapped MDD similarities crowd just below 1, so those schemes need
# much higher pruning floors than the rank-based WFM scores.
DEFAULT_MIN_EDGE_WEIGHT = {
    "centralized-wfm": 0.45,
    "centralized-mdd": 0.9955,
    "decentralized": 0.958,
}


@dataclass(frozen=True)
class RunConfig:
    sample_seconds: float = 5.0
    interval_seconds: float = 120.0
    origin: Optional[float] = None  # None: aligned to the first packet
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    scheme: str = "centralized-wfm"
    upsilon: MatchScoreVector = field(default_factory=MatchScoreVector)
    mdd: MddParams = field(default_factory=MddParams)
    mdd_dmax: Optional[float] = None  # None: zeta
    upr: UprParams = field(default_factory=UprParams)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    lateness: Optional[float] = None  # None: two sampling slots

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        TimeGrid(self.sample_seconds, self.interval_seconds, self.origin or 0.0)

    def grid(self, first_time: Optional[float] = None) -> TimeGrid:
        if self.origin is not None:
            return TimeGrid(self.sample_seconds, self.interval_seconds, self.origin)
        return TimeGrid.aligned(first_time or 0.0, self.sample_seconds, self.interval_seconds)

    @property
    def min_edge_weight(self) -> float:
        if self.cluster.min_edge_weight is not None:
            return self.cluster.min_edge_weight
        return DEFAULT_MIN_EDGE_WEIGHT[self.scheme]

    def to_dict(self) -> dict:
        return {
            "sample_seconds": self.sample_seconds,
            "interval_seconds": self.interval_seconds,
            "origin": self.origin,
            "normalization": self.normalization.to_dict(),
            "scheme": self.scheme,
            "upsilon": list(self.upsilon.upsilon),
            "zeta": self.mdd.zeta,
            "mdd_dmax": self.mdd_dmax,
            "omega": self.upr.omega,
            "cluster": {**self.cluster.to_dict(), "min_edge_weight": self.min_edge_weight},
            "lateness": self.lateness,
        }

    @property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def pair_scores(traces: Sequence[WirelessTrace], cfg: RunConfig, interval_index: int = 0) -> list[PairScore]:
    """Similarity scores (larger = closer) for one interval's traces."""
    if cfg.scheme == "decentralized":
        msgs = spr_messages(traces, interval_index)
        return upr_unify(msgs, cfg.upr) if msgs else []
    fps = build_fingerprints(traces)
    n = scanner_count(fps)
    if cfg.scheme == "centralized-wfm":
        return wfm_scores(fps, n, cfg.upsilon)
    d_max = cfg.mdd.zeta if cfg.mdd_dmax is None else cfg.mdd_dmax
    return [PairScore(s.a, s.b, mdd_to_similarity(s.value, d_max), s.support)
            for s in mdd_scores(fps, n, cfg.mdd)]


def detect_traces(traces: Sequence[WirelessTrace], interval_index: int, grid: TimeGrid,
                  cfg: RunConfig) -> GroupRecord:
    start, end = grid.interval_bounds(interval_index)
    present = sorted({t.device for t in traces})
    if present:
        scores = pair_scores(traces, cfg, interval_index)
        g = build_graph(scores, present, cfg.min_edge_weight)
        labeling = cluster(g, cfg.cluster)
    else:
        labeling = {}
    return GroupRecord(interval_index, start, end, cfg.scheme, labeling, tuple(present), cfg.digest)


def detect_interval(packets: Iterable[WirelessPacket], cfg: RunConfig = RunConfig(),
                    grid: Optional[TimeGrid] = None, interval_index: Optional[int] = None) -> GroupRecord:
    """Detect groups among packets that all fall in one interval."""
    packets = list(packets)
    if grid is None:
        grid = cfg.grid(min((p.time for p in packets), default=0.0))
    # interval indices are monotone in time, so the extremes settle it
    times = [p.time for p in packets]
    intervals = {grid.interval_of_slot(grid.global_slot(t)) for t in (min(times), max(times))} if times else set()
    if len(intervals) > 1:
        raise ValueError(f"packets span several intervals: {sorted(intervals)}")
    if interval_index is None:
        interval_index = intervals.pop() if intervals else 0
    elif intervals and intervals != {interval_index}:
        raise ValueError("packets do not belong to the requested interval")
    traces = to_traces(packets, grid, cfg.normalization)
    return detect_traces(traces, interval_index, grid, cfg)


def detect_all(packets: Sequence[WirelessPacket], cfg: RunConfig = RunConfig(),
               grid: Optional[TimeGrid] = None) -> list[GroupRecord]:
    """Batch detection over every interval between the first and last packet."""
    packets = sorted(packets, key=lambda p: p.time)
    if not packets:
        return []
    if grid is None:
        grid = cfg.grid(packets[0].time)
    traces = to_traces(packets, grid, cfg.normalization)
    by_interval: dict[int, list[WirelessTrace]] = {}
    for t in traces:
        by_interval.setdefault(grid.interval_of_slot(t.slot), []).append(t)
    first = grid.interval_of_slot(grid.global_slot(packets[0].time))
    last = grid.interval_of_slot(grid.global_slot(packets[-1].time))
    return [detect_traces(by_interval.get(k, []), k, grid, cfg) for k in range(first, last + 1)]


def run_stream(source: Iterable[WirelessPacket], cfg: RunConfig = RunConfig(),
               stats: Optional[dict] = None) -> Iterator[GroupRecord]:
    """Yield one record per interval as soon as all of its slots are sealed.

    Idle intervals produce empty records so indices stay contiguous. If the
    source raises, records for already-sealed intervals have been yielded
    and the error propagates.
    """
    stats = {} if stats is None else stats
    stats.setdefault("late", 0)
    sampler: Optional[StreamingSampler] = None
    grid: Optional[TimeGrid] = None
    pending: dict[int, list[WirelessTrace]] = {}
    next_interval = 0

    def take(readings) -> None:
        for r in readings:
            pending.setdefault(grid.interval_of_slot(r.slot), []).append(normalize(r, cfg.normalization))

    def ready(upto_slot: int) -> Iterator[GroupRecord]:
        nonlocal next_interval
        k = grid.slots_per_interval
        while (next_interval + 1) * k <= upto_slot:
            yield detect_traces(pending.pop(next_interval, []), next_interval, grid, cfg)
            next_interval += 1

    for p in source:
        if sampler is None:
            grid = cfg.grid(p.time)
            sampler = StreamingSampler(grid, cfg.normalization, cfg.lateness)
            next_interval = grid.interval_of_slot(grid.global_slot(p.time))
            sampler.sealed_slot = next_interval * grid.slots_per_interval
        take(sampler.push(p))
        stats["late"] = sampler.late
        yield from ready(sampler.sealed_slot)
    if sampler is None:
        return
    take(sampler.flush())
    last = max(pending, default=next_interval - 1)
    yield from ready((last + 1) * grid.slots_per_interval)
