"""Back-end fingerprint comparison: multi-dimensional RSSI distance (MDD)
and wireless fingerprint match (WFM), per slot and per interval."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence

from .core import DeviceId, WirelessFingerprint, WirelessTrace

DEFAULT_ZETA = 7.0
DEFAULT_UPSILON = (5.0, 2.0, 1.0)


@dataclass(frozen=True)
class MddParams:
    zeta: float = DEFAULT_ZETA

    def __post_init__(self) -> None:
        if not 1.0 < self.zeta <= 10.0:
            raise ValueError(f"zeta must satisfy 1 < zeta <= 10, got {self.zeta}")


@dataclass(frozen=True)
class MatchScoreVector:
    upsilon: tuple[float, ...] = DEFAULT_UPSILON

    def __post_init__(self) -> None:
        v = tuple(float(x) for x in self.upsilon)
        object.__setattr__(self, "upsilon", v)
        if not v:
            raise ValueError("match score vector must not be empty")
        if v[0] <= 0:
            raise ValueError("first match score must be > 0")
        if any(x < 0 for x in v):
            raise ValueError("match scores must be non-negative")
        if any(x < y for x, y in zip(v, v[1:])):
            raise ValueError("match scores must be non-increasing")

    def for_scanners(self, n: int) -> tuple[float, ...]:
        """Vector of length ``n``: truncated, or padded with the smallest weight."""
        v = self.upsilon
        if n <= len(v):
            return v[:n]
        return v + (v[-1],) * (n - len(v))


@dataclass(frozen=True)
class PairScore:
    a: DeviceId
    b: DeviceId
    value: float
    support: int

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"pair must be canonical (a < b), got {self.a!r}, {self.b!r}")
        if self.support < 1:
            raise ValueError("support must be >= 1")

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "value": self.value, "support": self.support}


def canonical(a: DeviceId, b: DeviceId) -> tuple[DeviceId, DeviceId]:
    return (a, b) if a < b else (b, a)


# -- slot level ---------------------------------------------------------------

def mdd_slot(wf_a: Sequence[WirelessTrace], wf_b: Sequence[WirelessTrace], n: int,
             p: MddParams = MddParams()) -> Optional[float]:
    """Pairwise distance Phi for one slot, or None when neither device was seen.

    ``n`` bounds the number of scanner dimensions. The two-branch return
    (psi/xi when the distance saturates, else sqrt(mu)/(psi*xi)) is kept
    as specified even though the branches are on different scales.
    """
    ra = {t.scanner: t.nrssi for t in wf_a}
    rb = {t.scanner: t.nrssi for t in wf_b}
    dims = sorted(ra.keys() | rb.keys())  # fixed order keeps the float sum symmetric
    xi = len(dims)
    if xi == 0:
        return None
    if xi > n:
        raise ValueError(f"slot has {xi} scanner dimensions but n={n}")
    psi = math.sqrt(xi * p.zeta * p.zeta)
    mu = 0.0
    for s in dims:
        if s in ra and s in rb:
            mu += abs(10.0 ** ra[s] - 10.0 ** rb[s])
        elif s in ra:
            mu += 10.0 ** ra[s]
        else:
            mu += 10.0 ** rb[s]
    root = math.sqrt(mu)
    if root >= psi:
        return psi / xi
    return root / (psi * xi)


def wfm_slot(wf_a: Sequence[WirelessTrace], wf_b: Sequence[WirelessTrace], n: int,
             v: MatchScoreVector = MatchScoreVector()) -> Optional[float]:
    """Rank-order match score delta in [0, 1]; None unless both lists are non-empty."""
    if not wf_a or not wf_b:
        return None
    return _wfm_ids([t.scanner for t in wf_a], [t.scanner for t in wf_b], v.for_scanners(n))


def _wfm_ids(ids_a: Sequence, ids_b: Sequence, weights: Sequence[float]) -> float:
    eta = sum(weights)
    mu = 0.0
    for i in range(min(len(ids_a), len(ids_b), len(weights))):
        if ids_a[i] == ids_b[i]:
            mu += weights[i]
    return mu / eta


# -- interval level -----------------------------------------------------------

def mdd_interval(fp_a: WirelessFingerprint, fp_b: WirelessFingerprint, n: int,
                 p: MddParams = MddParams(), slots: Optional[Iterable[int]] = None) -> Optional[PairScore]:
    """Mean slot distance over slots where at least one device was observed."""
    a, b = canonical(fp_a.device, fp_b.device)
    if a == b:
        raise ValueError("cannot score a device against itself")
    if slots is None:
        slots = fp_a.slots.keys() | fp_b.slots.keys()
    total = 0.0
    support = 0
    for s in sorted(slots):
        phi = mdd_slot(fp_a.at(s), fp_b.at(s), n, p)
        if phi is None:
            continue
        total += phi
        support += 1
    if support == 0:
        return None
    return PairScore(a, b, total / support, support)


def wfm_interval(fp_a: WirelessFingerprint, fp_b: WirelessFingerprint, n: int,
                 v: MatchScoreVector = MatchScoreVector()) -> Optional[PairScore]:
    """Mean match score over slots where both devices were observed."""
    a, b = canonical(fp_a.device, fp_b.device)
    if a == b:
        raise ValueError("cannot score a device against itself")
    weights = v.for_scanners(n)
    common = sorted(s for s in fp_a.slots.keys() & fp_b.slots.keys() if fp_a.slots[s] and fp_b.slots[s])
    if not common:
        return None
    total = 0.0
    for s in common:
        total += _wfm_ids([t.scanner for t in fp_a.slots[s]], [t.scanner for t in fp_b.slots[s]], weights)
    return PairScore(a, b, total / len(common), len(common))


def mdd_to_similarity(d: float, d_max: float = DEFAULT_ZETA) -> float:
    if d < 0:
        raise ValueError("distance must be >= 0")
    if not d_max > 0:
        raise ValueError("d_max must be > 0")
    return 1.0 - min(1.0, max(0.0, d / d_max))


def scanner_count(fingerprints: Mapping[DeviceId, WirelessFingerprint]) -> int:
    """Number of distinct scanners reporting during the interval."""
    seen = set()
    for fp in fingerprints.values():
        for lst in fp.slots.values():
            seen.update(t.scanner for t in lst)
    return len(seen)


def wfm_scores(fingerprints: Mapping[DeviceId, WirelessFingerprint], n: Optional[int] = None,
               v: MatchScoreVector = MatchScoreVector()) -> list[PairScore]:
    """WFM over every canonical device pair, in sorted pair order."""
    if n is None:
        n = scanner_count(fingerprints)
    weights = v.for_scanners(n)
    # scanner rank tuples per device and slot, built once
    ranks = {d: {s: tuple(t.scanner for t in lst) for s, lst in fp.slots.items() if lst}
             for d, fp in fingerprints.items()}
    out = []
    for a, b in combinations(sorted(fingerprints), 2):
        ra, rb = ranks[a], ranks[b]
        if len(rb) < len(ra):
            small, big = rb, ra
        else:
            small, big = ra, rb
        total = 0.0
        count = 0
        for s, ids in small.items():
            other = big.get(s)
            if other is None:
                continue
            total += _wfm_ids(ids, other, weights)
            count += 1
        if count:
            out.append(PairScore(a, b, total / count, count))
    return out


def mdd_scores(fingerprints: Mapping[DeviceId, WirelessFingerprint], n: Optional[int] = None,
               p: MddParams = MddParams()) -> list[PairScore]:
    """MDD distances (not similarities) over every canonical device pair."""
    if n is None:
        n = scanner_count(fingerprints)
    out = []
    for a, b in combinations(sorted(fingerprints), 2):
        score = mdd_interval(fingerprints[a], fingerprints[b], n, p)
        if score is not None:
            out.append(score)
    return out
