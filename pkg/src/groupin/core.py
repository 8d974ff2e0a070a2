"""Shared domain types: packets, traces, fingerprints and the time grid."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NewType, Optional, Sequence

log = logging.getLogger(__name__)

DeviceId = NewType("DeviceId", str)
ScannerId = NewType("ScannerId", str)

PACKET_FIELDS = ("time", "rssi", "ref_rssi", "device_id", "scanner_id")


class InputError(ValueError):
    """Raised for rejected input data (bad timestamps, unreadable files)."""


def _check_id(value: str, what: str) -> None:
    if not isinstance(value, str) or not value:
        raise InputError(f"{what} must be a non-empty string, got {value!r}")


@dataclass(frozen=True)
class WirelessPacket:
    time: float
    rssi: float
    device: DeviceId
    scanner: ScannerId
    ref_rssi: Optional[float] = None

    def __post_init__(self) -> None:
        _check_id(self.device, "device id")
        _check_id(self.scanner, "scanner id")
        if not math.isfinite(self.time) or self.time < 0:
            raise InputError(f"packet time must be finite and non-negative, got {self.time}")
        if not math.isfinite(self.rssi):
            raise InputError(f"rssi must be finite, got {self.rssi}")
        if self.ref_rssi is not None and not math.isfinite(self.ref_rssi):
            raise InputError(f"ref_rssi must be finite, got {self.ref_rssi}")

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "rssi": self.rssi,
            "ref_rssi": self.ref_rssi,
            "device_id": self.device,
            "scanner_id": self.scanner,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "WirelessPacket":
        ref = d.get("ref_rssi")
        return cls(
            time=float(d["time"]),
            rssi=float(d["rssi"]),
            ref_rssi=None if ref is None or ref == "" else float(ref),
            device=DeviceId(str(d["device_id"])),
            scanner=ScannerId(str(d["scanner_id"])),
        )


@dataclass(frozen=True)
class TimeGrid:
    """Sampling slots of ``sample_seconds`` grouped into detection intervals.

    Slot boundaries are half-open. Slot numbers are global (counted from
    ``origin``); :meth:`assign_slot` returns the interval-local position.
    """

    sample_seconds: float = 5.0
    interval_seconds: float = 120.0
    origin: float = 0.0

    def __post_init__(self) -> None:
        if not self.sample_seconds > 0:
            raise ValueError("sample_seconds must be > 0")
        if self.interval_seconds < self.sample_seconds:
            raise ValueError("interval_seconds must be >= sample_seconds")
        ratio = self.interval_seconds / self.sample_seconds
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("interval_seconds must be an integer multiple of sample_seconds")
        if not math.isfinite(self.origin):
            raise ValueError("origin must be finite")

    @classmethod
    def aligned(cls, first_time: float, sample_seconds: float = 5.0,
                interval_seconds: float = 120.0) -> "TimeGrid":
        """Grid whose origin is the interval-aligned floor of ``first_time``."""
        origin = math.floor(first_time / interval_seconds) * interval_seconds
        return cls(sample_seconds, interval_seconds, float(origin))

    @property
    def slots_per_interval(self) -> int:
        return int(round(self.interval_seconds / self.sample_seconds))

    def global_slot(self, t: float) -> int:
        if t < self.origin:
            raise InputError(f"timestamp {t} precedes grid origin {self.origin}")
        return int(math.floor((t - self.origin) / self.sample_seconds))

    def interval_of_slot(self, slot: int) -> int:
        return slot // self.slots_per_interval

    def slot_start(self, slot: int) -> float:
        return self.origin + slot * self.sample_seconds

    def interval_bounds(self, interval_index: int) -> tuple[float, float]:
        start = self.origin + interval_index * self.interval_seconds
        return start, start + self.interval_seconds

    def interval_slots(self, interval_index: int) -> range:
        k = self.slots_per_interval
        return range(interval_index * k, (interval_index + 1) * k)

    def to_dict(self) -> dict:
        return {"sample_seconds": self.sample_seconds,
                "interval_seconds": self.interval_seconds,
                "origin": self.origin}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TimeGrid":
        return cls(float(d["sample_seconds"]), float(d["interval_seconds"]), float(d["origin"]))


def assign_slot(t: float, grid: TimeGrid) -> tuple[int, int]:
    """Map a timestamp to ``(interval_index, slot_index_within_interval)``."""
    g = grid.global_slot(t)
    k = grid.slots_per_interval
    return g // k, g % k


@dataclass(frozen=True)
class WirelessTrace:
    scanner: ScannerId
    device: DeviceId
    slot: int
    nrssi: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.nrssi <= 1.0:
            raise ValueError(f"nrssi must lie in [0, 1], got {self.nrssi}")

    def to_dict(self) -> dict:
        return {"scanner_id": self.scanner, "device_id": self.device,
                "slot": self.slot, "nrssi": self.nrssi}

    @classmethod
    def from_dict(cls, d: Mapping) -> "WirelessTrace":
        return cls(ScannerId(d["scanner_id"]), DeviceId(d["device_id"]),
                   int(d["slot"]), float(d["nrssi"]))


def order_slot_traces(traces: Iterable[WirelessTrace]) -> list[WirelessTrace]:
    """Order one device's traces for a slot by descending nrssi.

    Ties go to the lexicographically smaller scanner id.
    """
    return sorted(traces, key=lambda tr: (-tr.nrssi, tr.scanner))


@dataclass(frozen=True)
class WirelessFingerprint:
    device: DeviceId
    slots: Mapping[int, tuple[WirelessTrace, ...]] = field(default_factory=dict)

    def at(self, slot: int) -> tuple[WirelessTrace, ...]:
        return self.slots.get(slot, ())

    def to_dict(self) -> dict:
        return {"device_id": self.device,
                "slots": {str(s): [tr.to_dict() for tr in lst] for s, lst in sorted(self.slots.items())}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "WirelessFingerprint":
        slots = {int(s): tuple(WirelessTrace.from_dict(t) for t in lst) for s, lst in d["slots"].items()}
        return cls(DeviceId(d["device_id"]), slots)


def build_fingerprints(traces: Iterable[WirelessTrace]) -> dict[DeviceId, WirelessFingerprint]:
    by_device: dict[DeviceId, dict[int, list[WirelessTrace]]] = {}
    for tr in traces:
        by_device.setdefault(tr.device, {}).setdefault(tr.slot, []).append(tr)
    out = {}
    for dev in sorted(by_device):
        slots = {s: tuple(order_slot_traces(lst)) for s, lst in sorted(by_device[dev].items())}
        out[dev] = WirelessFingerprint(dev, slots)
    return out


# -- packet files -----------------------------------------------------------

def _parse_csv_row(row: Sequence[str]) -> dict:
    if len(row) != len(PACKET_FIELDS):
        raise ValueError(f"expected {len(PACKET_FIELDS)} columns, got {len(row)}")
    return dict(zip(PACKET_FIELDS, row))


def iter_packets(lines: Iterable[str], fmt: str = "jsonl",
                 stats: Optional[dict] = None) -> Iterator[WirelessPacket]:
    """Parse packet lines, skipping malformed ones.

    ``stats["malformed"]`` is incremented for every skipped line.
    """
    if stats is not None:
        stats.setdefault("malformed", 0)
    if fmt == "csv":
        rows: Iterable = csv.reader(lines)
    else:
        rows = lines
    for lineno, raw in enumerate(rows, 1):
        try:
            if fmt == "csv":
                if lineno == 1 and list(raw) == list(PACKET_FIELDS):
                    continue
                if not raw:
                    continue
                d = _parse_csv_row(raw)
            else:
                if not raw.strip():
                    continue
                d = json.loads(raw)
            yield WirelessPacket.from_dict(d)
        except (ValueError, KeyError, TypeError) as exc:
            if stats is not None:
                stats["malformed"] += 1
            log.warning("skipping malformed packet at line %d: %s", lineno, exc)


def read_packets(path: str | Path, stats: Optional[dict] = None) -> list[WirelessPacket]:
    path = Path(path)
    fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    try:
        with open(path, newline="" if fmt == "csv" else None, encoding="utf-8") as fh:
            return list(iter_packets(fh, fmt, stats))
    except OSError as exc:
        raise InputError(f"cannot read packets from {path}: {exc}") from exc


def packet_to_json(p: WirelessPacket) -> str:
    return json.dumps(p.to_dict(), separators=(",", ":"))


def write_packets(path: str | Path, packets: Iterable[WirelessPacket]) -> int:
    path = Path(path)
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if path.suffix.lower() == ".csv":
            w = csv.writer(fh)
            w.writerow(PACKET_FIELDS)
            for p in packets:
                w.writerow([repr(p.time), repr(p.rssi), "" if p.ref_rssi is None else repr(p.ref_rssi),
                            p.device, p.scanner])
                n += 1
        else:
            buf = io.StringIO()
            for p in packets:
                buf.write(packet_to_json(p))
                buf.write("\n")
                n += 1
            fh.write(buf.getvalue())
    return n
