"""Append-only group store: one JSON line per interval record plus a
sidecar offset index for time-range queries."""

from __future__ import annotations

import bisect
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

from .core import DeviceId

SCHEMES = ("centralized-wfm", "centralized-mdd", "decentralized")
RECORDS_FILE = "records.jsonl"
INDEX_FILE = "index.jsonl"


class StoreError(ValueError):
    pass


@dataclass(frozen=True)
class GroupRecord:
    interval_index: int
    interval_start: float
    interval_end: float
    scheme: str
    labeling: Mapping[DeviceId, int] = field(default_factory=dict)
    present: tuple[DeviceId, ...] = ()
    params_digest: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "present", tuple(sorted(self.present)))
        object.__setattr__(self, "labeling", dict(sorted(self.labeling.items())))
        if set(self.labeling) != set(self.present):
            raise ValueError("labeling must cover exactly the present devices")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.interval_end < self.interval_start:
            raise ValueError("interval_end precedes interval_start")

    @property
    def groups(self) -> list[list[DeviceId]]:
        by: dict[int, list] = {}
        for d, lab in self.labeling.items():
            by.setdefault(lab, []).append(d)
        return sorted((sorted(v) for v in by.values()), key=lambda g: g[0])

    def to_dict(self) -> dict:
        return {
            "interval_index": self.interval_index,
            "interval_start": self.interval_start,
            "interval_end": self.interval_end,
            "scheme": self.scheme,
            "present": list(self.present),
            "labeling": dict(self.labeling),
            "params_digest": self.params_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroupRecord":
        return cls(
            interval_index=int(d["interval_index"]),
            interval_start=float(d["interval_start"]),
            interval_end=float(d["interval_end"]),
            scheme=d["scheme"],
            labeling={DeviceId(k): int(v) for k, v in d["labeling"].items()},
            present=tuple(DeviceId(x) for x in d["present"]),
            params_digest=d.get("params_digest", ""),
        )


class GroupStore:
    """File-backed, append-only record store.

    Appends go through one lock; the index line is written only after the
    record line is flushed, so readers never see a partial record.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.records_path = self.root / RECORDS_FILE
        self.index_path = self.root / INDEX_FILE
        self._lock = threading.Lock()
        self._index: list[tuple[int, float, float, int]] = []  # (interval, start, end, offset)
        if self.index_path.exists():
            with open(self.index_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        e = json.loads(line)
                        self._index.append((e["interval_index"], e["start"], e["end"], e["offset"]))
        elif self.records_path.exists() and self.records_path.stat().st_size:
            self._rebuild_index()

    def _rebuild_index(self) -> None:
        offset = 0
        with open(self.records_path, "rb") as fh, open(self.index_path, "w", encoding="utf-8") as ix:
            for raw in fh:
                rec = GroupRecord.from_dict(json.loads(raw))
                entry = (rec.interval_index, rec.interval_start, rec.interval_end, offset)
                self._index.append(entry)
                ix.write(self._index_line(entry))
                offset += len(raw)

    @staticmethod
    def _index_line(e: tuple) -> str:
        return json.dumps({"interval_index": e[0], "start": e[1], "end": e[2], "offset": e[3]},
                          separators=(",", ":")) + "\n"

    def __len__(self) -> int:
        return len(self._index)

    @property
    def last_interval(self) -> int | None:
        return self._index[-1][0] if self._index else None

    def append(self, record: GroupRecord) -> None:
        with self._lock:
            last = self.last_interval
            if last is not None and record.interval_index <= last:
                raise StoreError(f"non-monotone append: interval {record.interval_index} after {last}")
            data = (record.to_json() + "\n").encode("utf-8")
            with open(self.records_path, "ab") as fh:
                offset = fh.tell()
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            entry = (record.interval_index, record.interval_start, record.interval_end, offset)
            with open(self.index_path, "a", encoding="utf-8") as ix:
                ix.write(self._index_line(entry))
            self._index.append(entry)

    def _read_at(self, fh, offset: int) -> GroupRecord:
        fh.seek(offset)
        return GroupRecord.from_dict(json.loads(fh.readline()))

    def query(self, t_from: float = float("-inf"), t_to: float = float("inf")) -> list[GroupRecord]:
        """Records whose interval [start, end) intersects [t_from, t_to)."""
        index = list(self._index)
        if t_to <= t_from or not index:
            return []
        ends = [e[2] for e in index]
        lo = bisect.bisect_right(ends, t_from)
        out = []
        with open(self.records_path, "rb") as fh:
            for entry in index[lo:]:
                if entry[1] >= t_to:
                    break
                out.append(self._read_at(fh, entry[3]))
        return out

    def __iter__(self) -> Iterator[GroupRecord]:
        return iter(self.query())
