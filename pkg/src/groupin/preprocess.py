"""Median/mean sampling of raw packets and RSSI normalization."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Optional

from .core import DeviceId, ScannerId, TimeGrid, WirelessPacket, WirelessTrace

AGG_MODES = ("median", "mean")


@dataclass(frozen=True)
class SampledReading:
    scanner: ScannerId
    device: DeviceId
    slot: int
    mr: float
    mrr: Optional[float]
    count: int

    def to_dict(self) -> dict:
        return {"scanner_id": self.scanner, "device_id": self.device, "slot": self.slot,
                "mr": self.mr, "mrr": self.mrr, "count": self.count}

    @classmethod
    def from_dict(cls, d) -> "SampledReading":
        mrr = d.get("mrr")
        return cls(ScannerId(d["scanner_id"]), DeviceId(d["device_id"]), int(d["slot"]),
                   float(d["mr"]), None if mrr is None else float(mrr), int(d["count"]))


@dataclass(frozen=True)
class NormalizationConfig:
    mode: str = "median"
    rssi_min: float = -100.0
    rssi_max: float = -40.0
    global_ref_rssi: float = -59.0

    def __post_init__(self) -> None:
        if self.mode not in AGG_MODES:
            raise ValueError(f"mode must be one of {AGG_MODES}, got {self.mode!r}")
        if not self.rssi_min < self.rssi_max:
            raise ValueError("rssi_min must be < rssi_max")
        if not math.isfinite(self.global_ref_rssi):
            raise ValueError("global_ref_rssi must be finite")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "rssi_min": self.rssi_min, "rssi_max": self.rssi_max,
                "global_ref_rssi": self.global_ref_rssi}


def lower_median(values: list[float]) -> float:
    """Median that returns the lower-middle element for even counts."""
    s = sorted(values)
    return s[(len(s) - 1) // 2]


def _aggregate(values: list[float], mode: str) -> float:
    if mode == "mean":
        return statistics.fmean(values)
    return lower_median(values)


def _reading(key, rssis, refs, mode) -> SampledReading:
    scanner, device, slot = key
    mrr = _aggregate(refs, mode) if refs else None
    return SampledReading(scanner, device, slot, _aggregate(rssis, mode), mrr, len(rssis))


def sample(packets: Iterable[WirelessPacket], grid: TimeGrid,
           cfg: NormalizationConfig = NormalizationConfig()) -> list[SampledReading]:
    """One reading per (scanner, device, slot) that saw at least one packet.

    Readings come back sorted by (slot, scanner, device).
    """
    buckets: dict[tuple, tuple[list, list]] = {}
    origin, width = grid.origin, grid.sample_seconds
    for p in packets:
        t = p.time
        if t < origin:
            grid.global_slot(t)  # raises
        key = (p.scanner, p.device, math.floor((t - origin) / width))  # same rule as global_slot
        entry = buckets.get(key)
        if entry is None:
            entry = buckets[key] = ([], [])
        entry[0].append(p.rssi)
        if p.ref_rssi is not None:
            entry[1].append(p.ref_rssi)
    keys = sorted(buckets, key=lambda k: (k[2], k[0], k[1]))
    return [_reading(k, *buckets[k], cfg.mode) for k in keys]


def normalize(r: SampledReading, cfg: NormalizationConfig = NormalizationConfig()) -> WirelessTrace:
    value = r.mr
    if r.mrr is not None:
        value += cfg.global_ref_rssi - r.mrr
    scaled = (value - cfg.rssi_min) / (cfg.rssi_max - cfg.rssi_min)
    return WirelessTrace(r.scanner, r.device, r.slot, min(1.0, max(0.0, scaled)))


def to_traces(packets: Iterable[WirelessPacket], grid: TimeGrid,
              cfg: NormalizationConfig = NormalizationConfig()) -> list[WirelessTrace]:
    return [normalize(r, cfg) for r in sample(packets, grid, cfg)]


class StreamingSampler:
    """Incremental :func:`sample` driven by an event-time watermark.

    A slot is sealed once the watermark (largest timestamp seen) reaches
    the slot end plus ``lateness`` seconds. Packets for sealed slots are
    dropped and counted in ``late``.
    """

    def __init__(self, grid: TimeGrid, cfg: NormalizationConfig = NormalizationConfig(),
                 lateness: Optional[float] = None):
        self.grid = grid
        self.cfg = cfg
        self.lateness = 2 * grid.sample_seconds if lateness is None else float(lateness)
        if self.lateness < 0:
            raise ValueError("lateness must be >= 0")
        self.watermark = -math.inf
        self.sealed_slot = 0  # every slot below this number is sealed
        self.late = 0
        self._open: dict[int, dict[tuple, tuple[list, list]]] = {}

    def push(self, p: WirelessPacket) -> list[SampledReading]:
        if p.time < self.grid.origin:
            self.late += 1
            return []
        slot = self.grid.global_slot(p.time)
        if slot < self.sealed_slot:
            self.late += 1
        else:
            rssis, refs = self._open.setdefault(slot, {}).setdefault((p.scanner, p.device), ([], []))
            rssis.append(p.rssi)
            if p.ref_rssi is not None:
                refs.append(p.ref_rssi)
        if p.time > self.watermark:
            self.watermark = p.time
        return self._seal_until(self._sealable())

    def _sealable(self) -> int:
        # first slot whose end + lateness is still ahead of the watermark
        x = (self.watermark - self.lateness - self.grid.origin) / self.grid.sample_seconds
        return max(self.sealed_slot, int(math.floor(x)))

    def _seal_until(self, upto: int) -> list[SampledReading]:
        out: list[SampledReading] = []
        for slot in sorted(s for s in self._open if s < upto):
            bucket = self._open.pop(slot)
            for (scanner, device) in sorted(bucket):
                out.append(_reading((scanner, device, slot), *bucket[(scanner, device)], self.cfg.mode))
        self.sealed_slot = max(self.sealed_slot, upto)
        return out

    def flush(self) -> list[SampledReading]:
        """Seal everything still open (end of stream)."""
        upto = max(self._open, default=self.sealed_slot - 1) + 1
        return self._seal_until(upto)
