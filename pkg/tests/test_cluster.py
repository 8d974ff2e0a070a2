import itertools
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.cluster import DBSCAN

from groupin.centralized import PairScore
from groupin.cluster import (CliqueLimitError, ClusterParams, SimilarityGraph, build_graph, cluster,
                             cluster_dengraph, cluster_hcs, cluster_maxclique, groups_of, is_highly_connected,
                             labeling_from_groups, maximal_cliques, stoer_wagner)
from groupin.core import DeviceId


def graph(vertices, edges):
    return SimilarityGraph(tuple(DeviceId(v) for v in vertices),
                           {(DeviceId(a), DeviceId(b)): w for (a, b), w in edges.items()})


def parts(labeling):
    return sorted(tuple(g) for g in groups_of(labeling))


def brute_min_cut(w: np.ndarray) -> float:
    n = w.shape[0]
    best = np.inf
    for mask in range(1, 2 ** (n - 1)):
        side = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        best = min(best, w[side][:, ~side].sum())
    return best


def random_graph(rng, n_max=7, density=0.6):
    n = rng.randint(2, n_max)
    vs = [f"v{i}" for i in range(n)]
    edges = {}
    for a, b in itertools.combinations(vs, 2):
        if rng.random() < density:
            edges[(a, b)] = round(rng.uniform(0.05, 1.0), 3)
    return graph(vs, edges)


class TestBuildGraph:
    def scores(self, *rows):
        return [PairScore(DeviceId(a), DeviceId(b), w, 1) for a, b, w in rows]

    def test_prune(self):
        g = build_graph(self.scores(("a", "b", 0.9), ("a", "c", 0.1)), ["a", "b", "c"], 0.5)
        assert list(g.edges) == [("a", "b")] and g.vertices == ("a", "b", "c")

    def test_empty_scores(self):
        g = build_graph([], ["b", "a"], 0.5)
        assert g.vertices == ("a", "b") and not g.edges

    def test_zero_floor_keeps_all(self):
        assert len(build_graph(self.scores(("a", "b", 0.0), ("b", "c", 0.3)), "abc", 0.0).edges) == 2

    def test_graph_validation(self):
        with pytest.raises(ValueError):
            graph("ab", {("b", "a"): 0.5})
        with pytest.raises(ValueError):
            graph("ab", {("a", "c"): 0.5})
        with pytest.raises(ValueError):
            graph("ab", {("a", "b"): 1.5})

    @pytest.mark.parametrize("kw", [dict(algorithm="louvain"), dict(min_edge_weight=1.2),
                                    dict(threshold=0.0), dict(threshold=1.6), dict(cluster_distance=0.0)])
    def test_params_validation(self, kw):
        with pytest.raises(ValueError):
            ClusterParams(**kw)


class TestStoerWagner:
    def test_against_brute_force(self):
        rng = random.Random(5)
        for _ in range(1000):
            n = rng.randint(2, 8)
            w = np.zeros((n, n))
            for i, j in itertools.combinations(range(n), 2):
                if rng.random() < 0.7:
                    w[i, j] = w[j, i] = rng.choice([0.5, 1.0, rng.random()])
            cut, side = stoer_wagner(w)
            assert cut == pytest.approx(brute_min_cut(w), abs=1e-9)
            assert 0 < side.sum() < n
            assert w[side][:, ~side].sum() == pytest.approx(cut, abs=1e-9)

    def test_needs_two_vertices(self):
        with pytest.raises(ValueError):
            stoer_wagner(np.zeros((1, 1)))


TRIANGLES = {("a", "b"): 1.0, ("a", "c"): 1.0, ("b", "c"): 1.0,
             ("d", "e"): 1.0, ("d", "f"): 1.0, ("e", "f"): 1.0, ("c", "d"): 1.0}


class TestHcs:
    def test_two_triangles_joined_by_bridge(self):
        g = graph("abcdef", TRIANGLES)
        assert brute_min_cut(np.array([[TRIANGLES.get((x, y), TRIANGLES.get((y, x), 0.0)) for y in "abcdef"]
                                       for x in "abcdef"])) == 1.0
        assert parts(cluster_hcs(g, ClusterParams(threshold=1.0))) == [("a", "b", "c"), ("d", "e", "f")]

    def test_complete_graph_is_one_group(self):
        g = graph("abcd", {p: 1.0 for p in itertools.combinations("abcd", 2)})
        assert parts(cluster_hcs(g)) == [("a", "b", "c", "d")]

    def test_edgeless_gives_singletons(self):
        assert parts(cluster_hcs(graph("abcd", {}))) == [("a",), ("b",), ("c",), ("d",)]

    def test_accepted_groups_are_highly_connected(self):
        rng = random.Random(11)
        for _ in range(1000):
            g = random_graph(rng)
            p = ClusterParams(threshold=rng.choice([0.5, 1.0, 1.5]))
            for members in groups_of(cluster_hcs(g, p)):
                if len(members) < 2:
                    continue
                w = np.array([[g.edges.get((x, y), g.edges.get((y, x), 0.0)) for y in members] for x in members])
                assert is_highly_connected(brute_min_cut(w), len(members), p.threshold)


class TestMaxClique:
    def test_triangle_and_isolated(self):
        g = graph("abcd", {("a", "b"): 0.9, ("a", "c"): 0.9, ("b", "c"): 0.9})
        assert parts(cluster_maxclique(g)) == [("a", "b", "c"), ("d",)]

    def test_path_tie_break(self):
        g = graph("abc", {("a", "b"): 0.8, ("b", "c"): 0.8})
        assert parts(cluster_maxclique(g)) == [("a", "b"), ("c",)]

    def test_path_weight_wins_over_order(self):
        g = graph("abc", {("a", "b"): 0.6, ("b", "c"): 0.8})
        assert parts(cluster_maxclique(g)) == [("a",), ("b", "c")]

    def test_two_disjoint_edges(self):
        g = graph("abcd", {("a", "b"): 0.7, ("c", "d"): 0.7})
        assert parts(cluster_maxclique(g)) == [("a", "b"), ("c", "d")]

    def test_groups_are_cliques(self):
        rng = random.Random(3)
        for _ in range(1000):
            g = random_graph(rng, 8)
            for members in groups_of(cluster_maxclique(g)):
                for a, b in itertools.combinations(members, 2):
                    assert (a, b) in g.edges

    def test_clique_limit(self):
        g = graph("abcdef", {p: 0.9 for p in itertools.combinations("abcdef", 2) if p != ("a", "b")})
        with pytest.raises(CliqueLimitError):
            cluster_maxclique(g, ClusterParams(algorithm="maxclique", max_cliques=1))

    @given(st.lists(st.floats(0.0, 1.0), min_size=10, max_size=10), st.floats(0.0, 1.0), st.floats(0.01, 1.0))
    def test_scaling_preserves_cliques(self, ws, floor, c):
        pairs = list(itertools.combinations("abcde", 2))
        scores = [PairScore(DeviceId(a), DeviceId(b), w, 1) for (a, b), w in zip(pairs, ws)]
        scaled = [PairScore(s.a, s.b, s.value * c, 1) for s in scores]
        g1 = build_graph(scores, "abcde", floor)
        g2 = build_graph(scaled, "abcde", floor * c)
        # the product can round across the floor; skip those knife-edge draws
        if any(abs(w * c - floor * c) < 1e-12 for w in ws):
            return
        assert maximal_cliques(g1) == maximal_cliques(g2)


class TestDenGraph:
    def test_dense_clique(self):
        g = graph("abcd", {p: 0.9 for p in itertools.combinations("abcd", 2)})
        assert parts(cluster_dengraph(g)) == [("a", "b", "c", "d")]

    def test_weak_edges_give_singletons(self):
        g = graph("abcd", {p: 0.1 for p in itertools.combinations("abcd", 2)})
        assert parts(cluster_dengraph(g)) == [("a",), ("b",), ("c",), ("d",)]

    def test_empty_graph(self):
        assert cluster_dengraph(graph("", {})) == {}

    def test_against_reference_density_clustering(self):
        rng = random.Random(8)
        for _ in range(1000):
            g = random_graph(rng, 9, 0.5)
            eps = rng.choice([0.1, 0.2, 0.35])
            vs = list(g.vertices)
            d = np.full((len(vs), len(vs)), 1e6)
            np.fill_diagonal(d, 0.0)
            for (a, b), w in g.edges.items():
                # keep clear of the eps boundary so both sides agree on <=
                if abs((1 - w) - eps) < 1e-6:
                    w = w + 1e-3 if w < 1 else w
                i, j = vs.index(a), vs.index(b)
                d[i, j] = d[j, i] = 1 - w
            ref = DBSCAN(eps=eps, min_samples=2, metric="precomputed").fit(d).labels_
            ref_groups = {}
            for v, lab in zip(vs, ref):
                ref_groups.setdefault(lab if lab >= 0 else f"noise-{v}", []).append(v)
            edges = {(vs[i], vs[j]): 1 - d[i, j] for i, j in itertools.combinations(range(len(vs)), 2)
                     if d[i, j] < 1e5}
            ours = cluster_dengraph(SimilarityGraph(g.vertices, edges), ClusterParams(cluster_distance=eps))
            assert parts(ours) == sorted(tuple(sorted(m)) for m in ref_groups.values())


class TestLabelings:
    def test_dense_labels_by_smallest_member(self):
        assert labeling_from_groups([["c", "d"], ["a"], ["b", "e"]]) == {"a": 0, "b": 1, "e": 1, "c": 2, "d": 2}

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            labeling_from_groups([["a", "b"], ["b"]])

    @pytest.mark.parametrize("algo", ["hcs", "maxclique", "dengraph"])
    def test_total_partition_and_determinism(self, algo):
        rng = random.Random(21)
        p = ClusterParams(algorithm=algo)
        for _ in range(1000):
            g = random_graph(rng, 9)
            lab = cluster(g, p)
            assert set(lab) == set(g.vertices)
            assert sorted(set(lab.values())) == list(range(len(set(lab.values()))))
            assert cluster(g, p) == lab
