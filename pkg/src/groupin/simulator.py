"""Labeled synthetic packet streams: scanners, moving or static groups,
log-distance path loss with Gaussian shadowing, and lossy detection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import DeviceId, ScannerId, TimeGrid, WirelessPacket

Point = tuple[float, float]

PRESETS = ("office-static", "straight-walk", "random-walk", "two-group-distance", "deployment-case")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Static:
    point: Point


@dataclass(frozen=True)
class StraightWalk:
    """Back-and-forth walk between two points, reversing instantly at the ends."""

    start: Point
    end: Point
    speed: float = 2.0


@dataclass(frozen=True)
class RandomWaypoint:
    speed_range: tuple[float, float] = (0.5, 2.0)
    pause: float = 0.0


Mobility = Union[Static, StraightWalk, RandomWaypoint]


@dataclass(frozen=True)
class Group:
    members: tuple[DeviceId, ...]
    mobility: Mobility
    spread: float = 0.3  # members sit on a circle of this radius around the group anchor


@dataclass(frozen=True)
class Scenario:
    arena: tuple[float, float]
    scanners: tuple[tuple[ScannerId, Point], ...]
    groups: tuple[Group, ...]
    duration: float = 600.0
    seed: int = 0
    start_time: float = 0.0

    def __post_init__(self) -> None:
        w, h = self.arena
        if w <= 0 or h <= 0:
            raise ScenarioError("arena dimensions must be positive")
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if self.start_time < 0:
            raise ScenarioError("start_time must be non-negative")
        if not self.scanners:
            raise ScenarioError("need at least one scanner")
        ids = [s for s, _ in self.scanners]
        if len(set(ids)) != len(ids):
            raise ScenarioError("scanner ids must be unique")
        for sid, pos in self.scanners:
            if not self.inside(pos):
                raise ScenarioError(f"scanner {sid} at {pos} lies outside the arena")
        seen: set = set()
        for g in self.groups:
            if seen & set(g.members):
                raise ScenarioError("group member sets must be disjoint")
            seen |= set(g.members)
            m = g.mobility
            pts = [m.point] if isinstance(m, Static) else [m.start, m.end] if isinstance(m, StraightWalk) else []
            for p in pts:
                if not self.inside(p):
                    raise ScenarioError(f"group {g.members} positioned outside the arena at {p}")
            if isinstance(m, StraightWalk) and m.speed <= 0:
                raise ScenarioError("walking speed must be positive")
            if isinstance(m, RandomWaypoint):
                lo, hi = m.speed_range
                if not 0 < lo <= hi:
                    raise ScenarioError("random waypoint speed range must satisfy 0 < lo <= hi")

    def inside(self, p: Point) -> bool:
        return 0.0 <= p[0] <= self.arena[0] and 0.0 <= p[1] <= self.arena[1]

    @property
    def devices(self) -> list[DeviceId]:
        return sorted(d for g in self.groups for d in g.members)


@dataclass(frozen=True)
class RadioModel:
    ref_rssi_at_1m: float = -59.0
    path_loss_exponent: float = 2.0
    shadowing_sigma: float = 4.0
    detection_prob: float = 0.3
    advertising_interval: float = 0.5
    max_range: float = 30.0

    def __post_init__(self) -> None:
        if not self.path_loss_exponent > 0:
            raise ScenarioError("path loss exponent must be > 0")
        if not 0.0 <= self.detection_prob <= 1.0:
            raise ScenarioError("detection_prob must be in [0, 1]")
        if not 0.1 <= self.advertising_interval <= 1.0:
            raise ScenarioError("advertising_interval must be in [0.1, 1] s")
        if self.shadowing_sigma < 0:
            raise ScenarioError("shadowing_sigma must be >= 0")
        if self.max_range <= 0:
            raise ScenarioError("max_range must be > 0")

    def mean_rssi(self, distance):
        """Noise-free log-distance RSSI; distances under 0.1 m are clamped."""
        d = np.maximum(np.asarray(distance, dtype=float), 0.1)
        return self.ref_rssi_at_1m - 10.0 * self.path_loss_exponent * np.log10(d)


# -- trajectories -----------------------------------------------------------------

def _straight_positions(m: StraightWalk, t: np.ndarray) -> np.ndarray:
    a = np.asarray(m.start, float)
    b = np.asarray(m.end, float)
    length = float(np.linalg.norm(b - a))
    if length == 0:
        return np.tile(a, (len(t), 1))
    s = (t * m.speed) % (2 * length)
    s = np.where(s > length, 2 * length - s, s)
    return a + np.outer(s / length, b - a)


def _waypoint_legs(m: RandomWaypoint, arena, duration: float,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoint times and positions of a random-waypoint path covering ``duration``."""
    w, h = arena
    cur = np.array([rng.uniform(0, w), rng.uniform(0, h)])
    times = [0.0]
    points = [cur]
    clock = 0.0
    while clock <= duration:
        nxt = np.array([rng.uniform(0, w), rng.uniform(0, h)])
        clock += float(np.linalg.norm(nxt - cur)) / rng.uniform(*m.speed_range)
        times.append(clock)
        points.append(nxt)
        if m.pause > 0:
            clock += m.pause
            times.append(clock)
            points.append(nxt)
        cur = nxt
    return np.asarray(times), np.asarray(points)


def group_trajectory(sc: Scenario, index: int) -> Callable[[np.ndarray], np.ndarray]:
    """Anchor position of group ``index`` as a function of time since start."""
    m = sc.groups[index].mobility
    if isinstance(m, Static):
        p = np.asarray(m.point, float)
        return lambda t: np.tile(p, (len(t), 1))
    if isinstance(m, StraightWalk):
        return lambda t: _straight_positions(m, t)
    rng = np.random.default_rng(np.random.SeedSequence([sc.seed, 1, index]))
    times, pts = _waypoint_legs(m, sc.arena, sc.duration, rng)
    return lambda t: np.column_stack([np.interp(t, times, pts[:, 0]), np.interp(t, times, pts[:, 1])])


def _member_offsets(n: int, spread: float) -> np.ndarray:
    if n == 1 or spread == 0:
        return np.zeros((n, 2))
    ang = 2 * np.pi * np.arange(n) / n
    return spread * np.column_stack([np.cos(ang), np.sin(ang)])


def _emit(device: DeviceId, times: np.ndarray, positions: np.ndarray, scanners, rm: RadioModel,
          rng: np.random.Generator) -> list[tuple]:
    rows = []
    if len(times) == 0:
        return rows
    for sid, spos in scanners:
        dist = np.hypot(positions[:, 0] - spos[0], positions[:, 1] - spos[1])
        heard = (rng.random(len(times)) < rm.detection_prob) & (dist <= rm.max_range)
        noise = rng.normal(0.0, 1.0, len(times)) * rm.shadowing_sigma
        rssi = rm.mean_rssi(dist) + noise
        for t, r in zip(times[heard], rssi[heard]):
            rows.append((float(t), sid, device, float(r)))
    return rows


def _to_packets(rows: list[tuple], rm: RadioModel) -> list[WirelessPacket]:
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return [WirelessPacket(time=round(t, 6), rssi=round(r, 3), device=d, scanner=s,
                           ref_rssi=rm.ref_rssi_at_1m) for t, s, d, r in rows]


def _ad_times(rng: np.random.Generator, rm: RadioModel, t0: float, t1: float) -> np.ndarray:
    phase = rng.uniform(0, rm.advertising_interval)
    return np.arange(t0 + phase, t1, rm.advertising_interval)


def simulate_positions(sc: Scenario, t_rel: np.ndarray) -> dict[DeviceId, np.ndarray]:
    """Device positions at the given times (seconds since scenario start)."""
    out = {}
    for i, g in enumerate(sc.groups):
        anchor = group_trajectory(sc, i)(t_rel)
        for dev, off in zip(g.members, _member_offsets(len(g.members), g.spread)):
            out[dev] = anchor + off
    return out


def simulate(sc: Scenario, rm: RadioModel = RadioModel()) -> tuple[list[WirelessPacket], list[dict]]:
    """Packets plus ground truth rows ``{interval_index, device_id, group_label}``.

    Truth is emitted for 120 s intervals by default; use
    :func:`ground_truth` for other interval lengths.
    """
    packets = simulate_packets(sc, rm)
    return packets, ground_truth(sc)


def simulate_packets(sc: Scenario, rm: RadioModel = RadioModel()) -> list[WirelessPacket]:
    rows: list[tuple] = []
    for i, g in enumerate(sc.groups):
        path = group_trajectory(sc, i)
        for dev, off in zip(g.members, _member_offsets(len(g.members), g.spread)):
            rng = np.random.default_rng(np.random.SeedSequence([sc.seed, 2, i, g.members.index(dev)]))
            t_rel = _ad_times(rng, rm, 0.0, sc.duration)
            rows.extend(_emit(dev, t_rel + sc.start_time, path(t_rel) + off, sc.scanners, rm, rng))
    return _to_packets(rows, rm)


def ground_truth(sc: Scenario, interval_seconds: float = 120.0) -> list[dict]:
    grid = TimeGrid.aligned(sc.start_time, interval_seconds, interval_seconds)
    first = grid.interval_of_slot(grid.global_slot(sc.start_time))
    last = grid.interval_of_slot(grid.global_slot(sc.start_time + sc.duration - 1e-9))
    rows = []
    for k in range(first, last + 1):
        for label, g in enumerate(sc.groups):
            for d in sorted(g.members):
                rows.append({"interval_index": k, "device_id": d, "group_label": label})
    return rows


def write_truth(path: str | Path, rows: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps({"interval_index": r["interval_index"], "device_id": r["device_id"],
                                 "group_label": r["group_label"]}, separators=(",", ":")))
            fh.write("\n")


def read_truth(path: str | Path) -> dict[int, dict[DeviceId, int]]:
    out: dict[int, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                out.setdefault(int(r["interval_index"]), {})[DeviceId(r["device_id"])] = int(r["group_label"])
    return out


def truth_by_interval(rows: Iterable[Mapping]) -> dict[int, dict[DeviceId, int]]:
    out: dict[int, dict] = {}
    for r in rows:
        out.setdefault(int(r["interval_index"]), {})[r["device_id"]] = int(r["group_label"])
    return out


# -- presets ----------------------------------------------------------------------

ROOM = (10.0, 10.0)
ROOM_SCANNERS = ((ScannerId("s1"), (0.0, 0.0)), (ScannerId("s2"), (10.0, 0.0)), (ScannerId("s3"), (0.0, 10.0)))


def _ids(prefix: str, n: int, start: int = 1) -> tuple[DeviceId, ...]:
    return tuple(DeviceId(f"{prefix}{i:02d}") for i in range(start, start + n))


def two_group_distance(d: float, seed: int = 0, duration: float = 600.0) -> Scenario:
    """Two static 2-device groups ``d`` metres apart, centred in a 100 m2 room."""
    if not 0 < d <= 12:
        raise ScenarioError("group distance must be in (0, 12] m")
    u = d / (2 * math.sqrt(2))
    a = (5.0 - u, 5.0 + u)
    b = (5.0 + u, 5.0 - u)
    groups = (Group(_ids("p", 2, 1), Static(a)), Group(_ids("p", 2, 3), Static(b)))
    return Scenario(ROOM, ROOM_SCANNERS, groups, duration, seed)


def straight_walk(seed: int = 0, duration: float = 600.0, speed: float = 2.0) -> Scenario:
    """Two carriers with four beacons each, walking the same room diagonal
    back and forth from opposite corners."""
    a, b = (10.0, 0.0), (0.0, 10.0)
    groups = (
        Group(_ids("p", 4, 1), StraightWalk(a, b, speed), spread=0.2),
        Group(_ids("p", 4, 5), StraightWalk(b, a, speed), spread=0.2),
    )
    return Scenario(ROOM, ROOM_SCANNERS, groups, duration, seed)


def random_walk(seed: int = 0, duration: float = 600.0) -> Scenario:
    groups = (
        Group(_ids("p", 4, 1), RandomWaypoint((0.5, 2.0), 0.0), spread=0.2),
        Group(_ids("p", 4, 5), RandomWaypoint((0.5, 2.0), 0.0), spread=0.2),
    )
    return Scenario(ROOM, ROOM_SCANNERS, groups, duration, seed)


OFFICE = (24.0, 14.0)
OFFICE_SCANNERS = ((ScannerId("s1"), (3.0, 3.0)), (ScannerId("s2"), (12.0, 11.0)), (ScannerId("s3"), (13.0, 2.0)))
OFFICE_ROOMS = ((4.0, 3.5), (4.0, 10.5), (20.0, 3.5), (20.0, 10.5))


def office_static(seed: int = 0, duration: float = 600.0) -> Scenario:
    """Seven beacons placed statically in four office rooms."""
    sizes = (2, 2, 2, 1)
    groups = []
    nxt = 1
    for room, size in zip(OFFICE_ROOMS, sizes):
        groups.append(Group(_ids("p", size, nxt), Static(room), spread=0.5))
        nxt += size
    return Scenario(OFFICE, OFFICE_SCANNERS, tuple(groups), duration, seed)


def deployment_case(case: int, seed: int = 0, duration: float = 600.0) -> Scenario:
    """Two groups (one person, two people) walking parallel lanes past the scanners."""
    arena = (30.0, 20.0)
    layouts = {
        1: (((15.0, 10.0),)),
        2: ((10.0, 10.0), (20.0, 10.0)),
        3: ((15.0, 10.0), (15.5, 10.0), (15.0, 10.5)),
        4: ((5.0, 2.0), (15.0, 18.0), (25.0, 2.0)),
    }
    if case not in layouts:
        raise ScenarioError(f"deployment case must be 1..4, got {case}")
    scanners = tuple((ScannerId(f"s{i + 1}"), p) for i, p in enumerate(layouts[case]))
    groups = (
        Group(_ids("p", 1, 1), StraightWalk((2.0, 7.0), (28.0, 7.0), 1.0), spread=0.0),
        Group(_ids("p", 2, 2), StraightWalk((2.0, 13.0), (28.0, 13.0), 1.0), spread=0.3),
    )
    return Scenario(arena, scanners, groups, duration, seed)


def preset(name: str, seed: int = 0, param: Optional[float] = None, duration: float = 600.0) -> Scenario:
    """Build a named scenario. ``param`` is the distance for
    two-group-distance and the case number for deployment-case."""
    if name == "office-static":
        return office_static(seed, duration)
    if name == "straight-walk":
        return straight_walk(seed, duration)
    if name == "random-walk":
        return random_walk(seed, duration)
    if name == "two-group-distance":
        return two_group_distance(6.0 if param is None else float(param), seed, duration)
    if name == "deployment-case":
        return deployment_case(4 if param is None else int(param), seed, duration)
    raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def parse_preset(text: str) -> tuple[str, Optional[float]]:
    """Split ``two-group-distance(6)`` style names into (name, param)."""
    text = text.strip()
    if text.endswith(")") and "(" in text:
        name, arg = text[:-1].split("(", 1)
        return name.strip(), float(arg)
    return text, None


# -- crowd feed -------------------------------------------------------------------

CITY = (120.0, 80.0)


def city_scanners() -> tuple[tuple[ScannerId, Point], ...]:
    """Thirteen scanners on a staggered grid covering the city block."""
    pts = [(x, y) for y in (10.0, 40.0, 70.0) for x in (10.0, 60.0, 110.0)]
    pts += [(35.0, 25.0), (85.0, 25.0), (35.0, 55.0), (85.0, 55.0)]
    return tuple((ScannerId(f"c{i + 1:02d}"), p) for i, p in enumerate(pts))


def crowd(population: int, seed: int = 0, duration: float = 600.0, mean_extra: float = 0.6,
          mobile_share: float = 0.5) -> Scenario:
    """Street crowd whose group sizes are 1 + Poisson(``mean_extra``).

    About ``mobile_share`` of the groups wander by random waypoint; the rest
    stand still at uniform positions.
    """
    if population < 0:
        raise ScenarioError("population must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    w, h = CITY
    groups = []
    left = population
    nxt = 1
    while left > 0:
        size = min(left, 1 + int(rng.poisson(mean_extra)))
        if rng.random() < mobile_share:
            mob: Mobility = RandomWaypoint((0.5, 1.5), 10.0)
        else:
            mob = Static((float(rng.uniform(2, w - 2)), float(rng.uniform(2, h - 2))))
        groups.append(Group(_ids("d", size, nxt), mob, spread=0.4))
        nxt += size
        left -= size
    return Scenario(CITY, city_scanners(), tuple(groups), duration, seed)


# -- office schedule --------------------------------------------------------------

@dataclass(frozen=True)
class OfficeSchedule:
    """Per-interval room placement of office staff and visitors.

    ``placements[k]`` maps each device present in interval ``k`` to a room
    index into ``rooms``; absent devices are simply missing.
    """

    rooms: tuple[Point, ...]
    scanners: tuple[tuple[ScannerId, Point], ...]
    home: Mapping[DeviceId, Optional[int]]  # None for visitors without a room
    placements: tuple[Mapping[DeviceId, int], ...]
    interval_seconds: float = 120.0
    seed: int = 0

    @property
    def devices(self) -> list[DeviceId]:
        return sorted(self.home)


def office_schedule(seed: int = 0, intervals: int = 200, interval_seconds: float = 120.0,
                    visit_prob: float = 0.05, absence_prob: float = 0.1) -> OfficeSchedule:
    """Twelve employees in four rooms of three, plus two visitors, with one
    scanner mounted in each room.

    Visitor ``v01`` works with room 0 about half of the time; ``v02`` drops in
    rarely and sits in a random room. Employees are occasionally away or
    visiting another room for a whole interval.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    home: dict[DeviceId, Optional[int]] = {}
    for room in range(4):
        for j in range(3):
            home[DeviceId(f"e{3 * room + j + 1:02d}")] = room
    home[DeviceId("v01")] = None
    home[DeviceId("v02")] = None
    placements = []
    for _ in range(intervals):
        where: dict[DeviceId, int] = {}
        for dev, room in home.items():
            if room is None:
                continue
            u = rng.random()
            if u < absence_prob:
                continue
            if u < absence_prob + visit_prob:
                where[dev] = int((room + rng.integers(1, 4)) % 4)
            else:
                where[dev] = room
        if rng.random() < 0.5:
            where[DeviceId("v01")] = 0
        if rng.random() < 0.1:
            where[DeviceId("v02")] = int(rng.integers(0, 4))
        placements.append(dict(sorted(where.items())))
    scanners = tuple((ScannerId(f"r{i + 1}"), (x + 1.5, y)) for i, (x, y) in enumerate(OFFICE_ROOMS))
    return OfficeSchedule(OFFICE_ROOMS, scanners, home, tuple(placements), interval_seconds, seed)


def _desk_offsets(devices: Sequence[DeviceId], radius: float = 0.8) -> dict[DeviceId, np.ndarray]:
    ang = 2 * np.pi * np.arange(len(devices)) / max(len(devices), 1)
    return {d: radius * np.array([math.cos(a), math.sin(a)]) for d, a in zip(devices, ang)}


def schedule_packets(sched: OfficeSchedule, rm: RadioModel = RadioModel()) -> list[WirelessPacket]:
    offsets = _desk_offsets(sched.devices)
    rows: list[tuple] = []
    for k, where in enumerate(sched.placements):
        t0 = k * sched.interval_seconds
        for dev, room in where.items():
            rng = np.random.default_rng(np.random.SeedSequence([sched.seed, 5, k, sched.devices.index(dev)]))
            times = _ad_times(rng, rm, t0, t0 + sched.interval_seconds)
            pos = np.tile(np.asarray(sched.rooms[room]) + offsets[dev], (len(times), 1))
            rows.extend(_emit(dev, times, pos, sched.scanners, rm, rng))
    return _to_packets(rows, rm)


def schedule_truth(sched: OfficeSchedule) -> list[dict]:
    rows = []
    for k, where in enumerate(sched.placements):
        for d in sorted(where):
            rows.append({"interval_index": k, "device_id": d, "group_label": where[d]})
    return rows
