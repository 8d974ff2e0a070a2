"""Similarity graph construction and group clustering (HCS, maximal
cliques, DenGraph)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import networkx as nx
import numpy as np

from .centralized import PairScore
from .core import DeviceId

ALGORITHMS = ("hcs", "maxclique", "dengraph")

GroupLabeling = dict  # DeviceId -> int, labels dense from 0


class CliqueLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimilarityGraph:
    vertices: tuple[DeviceId, ...]
    edges: Mapping[tuple[DeviceId, DeviceId], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        vs = set(self.vertices)
        for (a, b), w in self.edges.items():
            if not a < b:
                raise ValueError(f"edge keys must be canonical, got {(a, b)}")
            if a not in vs or b not in vs:
                raise ValueError(f"edge {(a, b)} references an unknown vertex")
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"edge weight {w} outside [0, 1]")

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        for (a, b), w in sorted(self.edges.items()):
            g.add_edge(a, b, weight=w)
        return g


@dataclass(frozen=True)
class ClusterParams:
    algorithm: str = "hcs"
    min_edge_weight: Optional[float] = None  # None: the scheme's default
    threshold: float = 0.5
    cluster_distance: float = 0.2
    min_pts: int = 2
    max_cliques: int = 10 ** 6

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.min_edge_weight is not None and not 0.0 <= self.min_edge_weight <= 1.0:
            raise ValueError("min_edge_weight must be in [0, 1]")
        if not 0.0 < self.threshold <= 1.5:
            raise ValueError("threshold must be in (0, 1.5]")
        if not 0.0 < self.cluster_distance <= 1.0:
            raise ValueError("cluster_distance must be in (0, 1]")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "min_edge_weight": self.min_edge_weight,
                "threshold": self.threshold, "cluster_distance": self.cluster_distance,
                "min_pts": self.min_pts, "max_cliques": self.max_cliques}


def build_graph(scores: Iterable[PairScore], devices: Iterable[DeviceId],
                min_edge_weight: float = 0.0) -> SimilarityGraph:
    vertices = tuple(sorted(set(devices)))
    edges = {}
    for s in scores:
        if s.value >= min_edge_weight:
            edges[(s.a, s.b)] = min(1.0, max(0.0, s.value))
    return SimilarityGraph(vertices, edges)


def labeling_from_groups(groups: Iterable[Iterable[DeviceId]]) -> GroupLabeling:
    """Dense labels, numbered in order of each group's smallest member."""
    ordered = sorted((sorted(g) for g in groups if g), key=lambda g: g[0])
    labels = {}
    for i, members in enumerate(ordered):
        for d in members:
            if d in labels:
                raise ValueError(f"device {d!r} assigned to two groups")
            labels[d] = i
    return labels


def groups_of(labeling: Mapping[DeviceId, int]) -> list[list[DeviceId]]:
    by_label: dict[int, list] = {}
    for d, lab in labeling.items():
        by_label.setdefault(lab, []).append(d)
    return sorted((sorted(m) for m in by_label.values()), key=lambda m: m[0])


def cluster(g: SimilarityGraph, p: ClusterParams) -> GroupLabeling:
    if p.algorithm == "hcs":
        return cluster_hcs(g, p)
    if p.algorithm == "maxclique":
        return cluster_maxclique(g, p)
    return cluster_dengraph(g, p)


# -- HCS --------------------------------------------------------------------------

def stoer_wagner(w: np.ndarray) -> tuple[float, np.ndarray]:
    """Global minimum cut of a dense symmetric weight matrix.

    Returns the cut value and a boolean mask of one side. Ties are broken
    by lowest index, so the result is deterministic.
    """
    n = w.shape[0]
    if n < 2:
        raise ValueError("min cut needs at least two vertices")
    w = np.array(w, dtype=float)
    np.fill_diagonal(w, 0.0)
    members = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)
    best = math.inf
    best_side: list[int] = []
    for _ in range(n - 1):
        idx = np.flatnonzero(active)
        start = idx[0]
        in_a = np.zeros(n, dtype=bool)
        in_a[start] = True
        conn = w[start].copy()
        prev = last = start
        cut = 0.0
        for _ in range(len(idx) - 1):
            nxt = int(np.argmax(np.where(active & ~in_a, conn, -np.inf)))
            cut = conn[nxt]  # cut-of-the-phase once nxt is the last vertex
            prev, last = last, nxt
            in_a[nxt] = True
            conn += w[nxt]
        if cut < best:
            best = float(cut)
            best_side = list(members[last])
        # contract last into prev
        w[prev, :] += w[last, :]
        w[:, prev] += w[:, last]
        w[prev, prev] = 0.0
        w[last, :] = 0.0
        w[:, last] = 0.0
        active[last] = False
        members[prev].extend(members[last])
    side = np.zeros(n, dtype=bool)
    side[best_side] = True
    return best, side


def _components(nodes: list, adj: Mapping) -> list[list]:
    nodeset = set(nodes)
    seen = set()
    comps = []
    for v in nodes:
        if v in seen:
            continue
        comp = []
        stack = [v]
        seen.add(v)
        while stack:
            u = stack.pop()
            comp.append(u)
            for x in adj[u]:
                if x in nodeset and x not in seen:
                    seen.add(x)
                    stack.append(x)
        comps.append(sorted(comp))
    return comps


def is_highly_connected(cut_value: float, size: int, threshold: float) -> bool:
    return cut_value >= threshold * size / 2.0 - 1e-12


def cluster_hcs(g: SimilarityGraph, p: ClusterParams = ClusterParams()) -> GroupLabeling:
    adj: dict = {v: {} for v in g.vertices}
    for (a, b), wt in g.edges.items():
        adj[a][b] = wt
        adj[b][a] = wt
    groups = []
    stack = _components(list(g.vertices), adj)[::-1]
    while stack:
        nodes = stack.pop()
        if len(nodes) == 1:
            groups.append(nodes)
            continue
        index = {v: i for i, v in enumerate(nodes)}
        mat = np.zeros((len(nodes), len(nodes)))
        for v in nodes:
            for u, wt in adj[v].items():
                if u in index:
                    mat[index[v], index[u]] = wt
        cut, side = stoer_wagner(mat)
        if is_highly_connected(cut, len(nodes), p.threshold):
            groups.append(nodes)
            continue
        left = [v for v in nodes if side[index[v]]]
        right = [v for v in nodes if not side[index[v]]]
        parts = _components(left, adj) + _components(right, adj)
        stack.extend(sorted(parts, key=lambda c: c[0], reverse=True))
    return labeling_from_groups(groups)


# -- maximal cliques --------------------------------------------------------------

def maximal_cliques(g: SimilarityGraph, limit: int = 10 ** 6) -> list[tuple[DeviceId, ...]]:
    out = []
    for c in nx.find_cliques(g.to_networkx()):
        out.append(tuple(sorted(c)))
        if len(out) > limit:
            raise CliqueLimitError(
                f"more than {limit} maximal cliques; raise min_edge_weight to prune the graph")
    return sorted(out)


def _clique_weight(members: list, edges: Mapping) -> float:
    total = 0.0
    for i, a in enumerate(members):
        for b in members[i + 1:]:
            total += edges.get((a, b), 0.0)
    return total


def cluster_maxclique(g: SimilarityGraph, p: ClusterParams = ClusterParams()) -> GroupLabeling:
    cliques = [list(c) for c in maximal_cliques(g, p.max_cliques) if len(c) > 1]
    assigned: set = set()
    groups = []
    while cliques:
        candidates = []
        for c in cliques:
            free = [d for d in c if d not in assigned]
            if len(free) >= 2:
                candidates.append((-len(free), -_clique_weight(free, g.edges), free))
        if not candidates:
            break
        best = min(candidates)[2]
        groups.append(best)
        assigned.update(best)
        cliques = [c for c in cliques if sum(d not in assigned for d in c) >= 2]
    groups.extend([v] for v in g.vertices if v not in assigned)
    return labeling_from_groups(groups)


# -- DenGraph ----------------------------------------------------------------------

def cluster_dengraph(g: SimilarityGraph, p: ClusterParams = ClusterParams()) -> GroupLabeling:
    """Density clustering with node distance 1 - w over existing edges.

    A vertex is a core when its epsilon-neighbourhood, counting itself,
    holds at least ``min_pts`` vertices. Noise vertices become singletons.
    """
    eps = p.cluster_distance
    nbrs: dict = {v: [] for v in g.vertices}
    for (a, b), wt in sorted(g.edges.items()):
        if 1.0 - wt <= eps + 1e-12:
            nbrs[a].append(b)
            nbrs[b].append(a)
    core = {v for v in g.vertices if len(nbrs[v]) + 1 >= p.min_pts}
    label: dict = {}
    groups = []
    for v in g.vertices:
        if v not in core or v in label:
            continue
        members = []
        label[v] = len(groups)
        queue = [v]
        while queue:
            u = queue.pop(0)
            members.append(u)
            if u not in core:
                continue
            for x in sorted(nbrs[u]):
                if x not in label:
                    label[x] = len(groups)
                    queue.append(x)
        groups.append(members)
    groups.extend([v] for v in g.vertices if v not in label)
    return labeling_from_groups(groups)
