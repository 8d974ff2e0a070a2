"""Scanner-local single perception results (SPR) and their server-side
unification (UPR), plus the scanner message wire format."""

from __future__ import annotations

import json
import logging
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import BinaryIO, Iterable, Iterator, Optional, TextIO

from .centralized import PairScore
from .core import DeviceId, ScannerId, WirelessTrace

log = logging.getLogger(__name__)

DEFAULT_OMEGA = 10.0 ** 1 - 10.0 ** 0
_LEN = struct.Struct(">I")


class MessageError(ValueError):
    pass


@dataclass(frozen=True)
class SprEntry:
    a: DeviceId
    b: DeviceId
    spr: float
    support: int

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise MessageError(f"entry pair must be canonical, got {self.a!r}, {self.b!r}")
        if not self.spr >= 0:
            raise MessageError("spr must be >= 0")
        if self.support < 1:
            raise MessageError("support must be >= 1")


@dataclass(frozen=True)
class SprMessage:
    scanner: ScannerId
    interval_index: int
    entries: tuple[SprEntry, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        pairs = [(e.a, e.b) for e in self.entries]
        if len(set(pairs)) != len(pairs):
            raise MessageError("duplicate pair in SPR message")
        if not self.scanner:
            raise MessageError("scanner id must be non-empty")

    def to_dict(self) -> dict:
        return {
            "scanner_id": self.scanner,
            "interval_index": self.interval_index,
            "entries": [{"a": e.a, "b": e.b, "spr": e.spr, "support": e.support} for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d) -> "SprMessage":
        try:
            entries = tuple(SprEntry(DeviceId(e["a"]), DeviceId(e["b"]), float(e["spr"]), int(e["support"]))
                            for e in d["entries"])
            return cls(ScannerId(d["scanner_id"]), int(d["interval_index"]), entries)
        except (KeyError, TypeError) as exc:
            raise MessageError(f"malformed SPR message: {exc}") from exc


@dataclass(frozen=True)
class UprParams:
    omega: float = DEFAULT_OMEGA

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise ValueError("omega must be > 0")


def spr_local(traces: Iterable[WirelessTrace], scanner: ScannerId, interval_index: int) -> SprMessage:
    """Mean linear-domain RSSI gap per device pair, over slots where this
    scanner saw both devices."""
    by_slot: dict[int, dict[DeviceId, float]] = defaultdict(dict)
    for t in traces:
        if t.scanner != scanner:
            raise ValueError(f"trace from scanner {t.scanner!r} passed to {scanner!r}")
        by_slot[t.slot][t.device] = t.nrssi
    sums: dict[tuple, float] = defaultdict(float)
    counts: dict[tuple, int] = defaultdict(int)
    for slot in sorted(by_slot):
        seen = by_slot[slot]
        for a, b in combinations(sorted(seen), 2):
            sums[(a, b)] += abs(10.0 ** seen[a] - 10.0 ** seen[b])
            counts[(a, b)] += 1
    entries = tuple(SprEntry(a, b, sums[(a, b)] / counts[(a, b)], counts[(a, b)]) for a, b in sorted(sums))
    return SprMessage(scanner, interval_index, entries)


def spr_messages(traces: Iterable[WirelessTrace], interval_index: int) -> list[SprMessage]:
    """Split an interval's traces by scanner and run :func:`spr_local` on each."""
    per_scanner: dict[ScannerId, list[WirelessTrace]] = defaultdict(list)
    for t in traces:
        per_scanner[t.scanner].append(t)
    return [spr_local(per_scanner[s], s, interval_index) for s in sorted(per_scanner)]


def upr_unify(messages: Iterable[SprMessage], p: UprParams = UprParams()) -> list[PairScore]:
    messages = list(messages)
    if not messages:
        raise ValueError("need at least one SPR message")
    intervals = {m.interval_index for m in messages}
    if len(intervals) > 1:
        raise ValueError(f"messages span several intervals: {sorted(intervals)}")
    sums: dict[tuple, float] = defaultdict(float)
    scanners: dict[tuple, set] = defaultdict(set)
    support: dict[tuple, int] = defaultdict(int)
    # sorted fold keeps the float sum independent of arrival order
    for m in sorted(messages, key=lambda m: m.scanner):
        for e in m.entries:
            key = (e.a, e.b)
            if m.scanner in scanners[key]:
                raise ValueError(f"scanner {m.scanner!r} reported pair {key} twice")
            sums[key] += min(p.omega, max(0.0, e.spr))
            scanners[key].add(m.scanner)
            support[key] += e.support
    out = []
    for key in sorted(sums):
        value = 1.0 - sums[key] / (len(scanners[key]) * p.omega)
        out.append(PairScore(key[0], key[1], min(1.0, max(0.0, value)), support[key]))
    return out


@dataclass
class UnifyCollector:
    """Aggregation point: buffers messages per interval until sealed."""

    params: UprParams = field(default_factory=UprParams)
    rejected: int = 0
    _pending: dict[int, list[SprMessage]] = field(default_factory=dict)
    _sealed_below: int = 0

    def offer(self, msg: SprMessage) -> bool:
        if msg.interval_index < self._sealed_below:
            self.rejected += 1
            log.warning("rejecting late SPR message from %s for sealed interval %d",
                        msg.scanner, msg.interval_index)
            return False
        self._pending.setdefault(msg.interval_index, []).append(msg)
        return True

    def seal(self, interval_index: int) -> list[PairScore]:
        """Unify and close ``interval_index`` (and everything before it)."""
        msgs = self._pending.pop(interval_index, [])
        for k in [k for k in self._pending if k < interval_index]:
            del self._pending[k]
        self._sealed_below = max(self._sealed_below, interval_index + 1)
        return upr_unify(msgs, self.params) if msgs else []


# -- wire format ----------------------------------------------------------------

def encode_message(msg: SprMessage) -> bytes:
    return json.dumps(msg.to_dict(), separators=(",", ":")).encode("utf-8")


def decode_message(data: bytes) -> SprMessage:
    try:
        return SprMessage.from_dict(json.loads(data.decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MessageError(f"undecodable SPR message: {exc}") from exc


def write_frame(stream: BinaryIO, msg: SprMessage) -> None:
    body = encode_message(msg)
    stream.write(_LEN.pack(len(body)))
    stream.write(body)


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return buf


def read_frames(stream: BinaryIO) -> Iterator[SprMessage]:
    """Decode length-prefixed messages until EOF."""
    while True:
        head = _read_exact(stream, _LEN.size)
        if not head:
            return
        if len(head) < _LEN.size:
            raise MessageError("truncated frame header")
        (size,) = _LEN.unpack(head)
        body = _read_exact(stream, size)
        if len(body) < size:
            raise MessageError("truncated frame body")
        yield decode_message(body)


def write_jsonl(stream: TextIO, messages: Iterable[SprMessage]) -> None:
    for m in messages:
        stream.write(encode_message(m).decode("utf-8"))
        stream.write("\n")


def read_jsonl(stream: TextIO) -> Iterator[SprMessage]:
    for line in stream:
        if line.strip():
            yield decode_message(line.encode("utf-8"))


def unify_stream(stream: BinaryIO, p: UprParams = UprParams(),
                 interval_index: Optional[int] = None) -> list[PairScore]:
    msgs = [m for m in read_frames(stream) if interval_index is None or m.interval_index == interval_index]
    return upr_unify(msgs, p)
