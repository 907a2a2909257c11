from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np
import pytest

from ownet_core.graph import Role
from ownet_core.topology import (
    PowerLawFitError,
    Section,
    TTClass,
    TopologyError,
    bow_tie,
    bow_tie_table,
    ccdf,
    cross_shareholding_census,
    degree_strength_stats,
    fit_power_law,
    scc_size_summary,
    strongly_connected_components,
    weakly_connected_components,
)

from conftest import build_graph, graph_from_dense


def _random_graph(rng, n, density):
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    return graph_from_dense(np.where(mask, 0.1, 0.0))


def _closure(graph, undirected=False):
    dense = graph.weights.toarray() > 0
    if undirected:
        dense = dense | dense.T
    reach = np.identity(graph.n, dtype=bool) | dense
    for k in range(graph.n):
        reach = reach | (reach[:, [k]] & reach[[k], :])
    return reach


def test_weak_components_examples():
    pair = build_graph([("A", "B", 0.1), ("C", "D", 0.1)])
    assert weakly_connected_components(pair).count == 2

    assert weakly_connected_components(build_graph([])).count == 0

    star = build_graph([("A", "B", 0.1), ("A", "C", 0.1), ("A", "D", 0.1)], nodes=["E"])
    parts = weakly_connected_components(star)
    assert parts.count == 2
    assert set(parts.members(0)) == {"A", "B", "C", "D"}
    assert parts.members(1) == ("E",)
    assert parts.component_ids == ("A", "E")
    assert parts.component_of("C") == "A"


def test_weak_components_match_networkx(rng):
    for _ in range(50):
        graph = _random_graph(rng, int(rng.integers(1, 15)), 0.1)
        parts = weakly_connected_components(graph)
        expected = nx.DiGraph()
        expected.add_nodes_from(graph.ids)
        expected.add_edges_from((e.src, e.dst) for e in graph.edges())
        found = {frozenset(parts.members(k)) for k in range(parts.count)}
        assert found == {frozenset(c) for c in nx.weakly_connected_components(expected)}
        assert sum(parts.sizes) == graph.n


def test_scc_examples():
    cycle = strongly_connected_components(build_graph([("A", "B", 0.5), ("B", "A", 0.5)]))
    assert cycle.count == 1
    assert cycle.member_ids(0) == ("A", "B")
    assert cycle.nontrivial() == [0]

    dag = strongly_connected_components(build_graph([("A", "B", 0.5), ("B", "C", 0.5)]))
    assert dag.count == 3
    assert dag.nontrivial() == []
    # sources come first in topological order
    assert [dag.member_ids(k) for k in range(3)] == [("A",), ("B",), ("C",)]


def test_ring_with_chords_matches_brute_force():
    ring = [(str(i), str(i % 9 + 1), 0.3) for i in range(1, 10)]
    chords = [("3", "7", 0.2), ("7", "3", 0.2)]
    graph = build_graph(ring[:-1] + chords)
    sccs = strongly_connected_components(graph)
    reach = _closure(graph)
    mutual = reach & reach.T
    for i in range(graph.n):
        assert set(np.flatnonzero(sccs.labels == sccs.labels[i])) == set(np.flatnonzero(mutual[i]))


def test_scc_matches_brute_force_on_random_graphs(rng):
    for _ in range(300):
        graph = _random_graph(rng, int(rng.integers(1, 11)), float(rng.uniform(0.05, 0.5)))
        sccs = strongly_connected_components(graph)
        reach = _closure(graph)
        mutual = reach & reach.T
        for i in range(graph.n):
            same = set(np.flatnonzero(sccs.labels == sccs.labels[i]).tolist())
            assert same == set(np.flatnonzero(mutual[i]).tolist())
        condensed = sccs.condensation.tocoo()
        assert np.all(condensed.row < condensed.col)


def test_deep_chain_does_not_recurse():
    n = 50_000
    edges = [(str(i), str(i + 1), 0.5) for i in range(1, n)] + [(str(n), "1", 0.5)]
    sccs = strongly_connected_components(build_graph(edges))
    assert sccs.count == 1
    assert sccs.size(0) == n


def test_bow_tie_hand_example():
    graph = build_graph(
        [("r", "a", 0.2), ("a", "b", 0.4), ("b", "a", 0.4), ("b", "o", 0.6)], nodes=["z"]
    )
    partition = bow_tie(graph, core=["a", "b"])
    assert partition.members(Section.IN) == ("r",)
    assert partition.members(Section.SCC) == ("a", "b")
    assert partition.members(Section.OUT) == ("o",)
    assert partition.label_of("z") is Section.OCC
    assert bow_tie(graph).core == ("a", "b")


def test_bow_tie_rejects_acyclic_core():
    graph = build_graph([("A", "B", 0.5), ("B", "C", 0.5)])
    with pytest.raises(TopologyError):
        bow_tie(graph, core=["B"])
    with pytest.raises(TopologyError):
        bow_tie(graph)


def test_bow_tie_rejects_partial_scc():
    graph = build_graph([("A", "B", 0.5), ("B", "C", 0.5), ("C", "A", 0.5)])
    with pytest.raises(TopologyError):
        bow_tie(graph, core=["A", "B"])


def test_bow_tie_labels_match_reachability(rng):
    checked = 0
    for _ in range(300):
        graph = _random_graph(rng, int(rng.integers(2, 11)), float(rng.uniform(0.1, 0.4)))
        try:
            partition = bow_tie(graph)
        except TopologyError:
            continue
        checked += 1
        reach = _closure(graph)
        core = [graph.index_of(node) for node in partition.core]
        undirected = _closure(graph, undirected=True)
        c = core[0]
        for i, label in enumerate(partition.labels):
            in_core = i in core
            to_core = bool(reach[i, c])
            from_core = bool(reach[c, i])
            if in_core:
                assert label is Section.SCC
            elif to_core:
                assert label is Section.IN and not from_core
            elif from_core:
                assert label is Section.OUT
            elif undirected[i, c]:
                assert label is Section.TT
            else:
                assert label is Section.OCC
    assert checked > 50


def test_split_tt_classes():
    graph = build_graph(
        [
            ("i", "a", 0.2),
            ("a", "b", 0.4),
            ("b", "a", 0.4),
            ("b", "o", 0.4),
            ("i", "t", 0.3),
            ("t", "o", 0.2),
            ("i", "x", 0.3),
            ("y", "o", 0.3),
            ("w", "i", 0.1),
        ]
    )
    partition = bow_tie(graph, split_tt=True)
    assert partition.tt_classes == {
        "t": TTClass.TUBE,
        "x": TTClass.TENDRIL_IN,
        "y": TTClass.TENDRIL_OUT,
    }


def test_bow_tie_table_counts_and_shares():
    graph = build_graph(
        [("r", "a", 0.2), ("a", "b", 0.4), ("b", "a", 0.4), ("b", "o", 0.6)],
        values={"r": 0.0, "a": 1.0, "b": 1.0, "o": 2.0},
        roles={"r": Role.SH, "a": Role.TNC, "b": Role.TNC, "o": Role.PC},
    )
    partition = bow_tie(graph)
    rows = {row.section: row for row in bow_tie_table(partition, graph, control=np.array([0, 0, 0, 4.0]))}
    assert (rows[Section.SCC].nodes, rows[Section.SCC].tnc) == (2, 2)
    assert rows[Section.IN].sh == 1
    assert rows[Section.SCC].value_share == pytest.approx(50.0)
    assert rows[Section.OUT].value_share == pytest.approx(50.0)
    # ids sort as a, b, o, r
    assert rows[Section.IN].control_share == pytest.approx(100.0)


def _brute_census(graph):
    dense = graph.weights.toarray() > 0
    n = graph.n
    mutual = sum(1 for a, b in itertools.combinations(range(n), 2) if dense[a, b] and dense[b, a])
    counts = {"C3": 0, "C3m1": 0, "C3m2": 0, "C3m3": 0}
    for a, b, c in itertools.combinations(range(n), 3):
        cyclic = (dense[a, b] and dense[b, c] and dense[c, a]) or (
            dense[a, c] and dense[c, b] and dense[b, a]
        )
        if not cyclic:
            continue
        pairs = [(a, b), (b, c), (a, c)]
        reciprocated = sum(1 for x, y in pairs if dense[x, y] and dense[y, x])
        counts[("C3", "C3m1", "C3m2", "C3m3")[reciprocated]] += 1
    return mutual, counts


def test_census_examples():
    assert cross_shareholding_census(build_graph([("A", "B", 0.1), ("B", "A", 0.1)])).mutual_pairs == 1
    triangle = cross_shareholding_census(
        build_graph([("A", "B", 0.1), ("B", "C", 0.1), ("C", "A", 0.1)])
    )
    assert triangle.triad_counts == {"C3": 1, "C3m1": 0, "C3m2": 0, "C3m3": 0}
    one_mutual = cross_shareholding_census(
        build_graph([("A", "B", 0.1), ("B", "A", 0.1), ("B", "C", 0.1), ("C", "A", 0.1)])
    )
    assert one_mutual.triad_counts["C3m1"] == 1
    assert one_mutual.mutual_pairs == 1


def test_census_role_pairs():
    graph = build_graph(
        [("A", "B", 0.1), ("B", "A", 0.1), ("A", "P", 0.1), ("P", "A", 0.1)],
        roles={"A": Role.TNC, "B": Role.TNC, "P": Role.PC},
    )
    census = cross_shareholding_census(graph)
    assert census.role_pairs["TNC-TNC"] == 1
    assert census.role_pairs["TNC-PC"] == 1


def test_census_matches_brute_force(rng):
    for _ in range(300):
        graph = _random_graph(rng, int(rng.integers(3, 9)), float(rng.uniform(0.2, 0.8)))
        census = cross_shareholding_census(graph)
        mutual, counts = _brute_census(graph)
        assert census.mutual_pairs == mutual
        assert census.triad_counts == counts


def test_degree_and_strength():
    graph = build_graph([("A", "B", 0.2), ("A", "C", 0.7)], nodes=["Z"])
    stats = degree_strength_stats(graph)
    a = graph.index_of("A")
    assert stats.out_degree[a] == 2
    assert stats.strength[a] == pytest.approx(0.9)
    # zero-degree nodes are kept as samples but not on the CCDF support
    assert stats.out_degree[graph.index_of("Z")] == 0
    assert stats.ccdfs["out_degree"].points() == [(2.0, 1.0)]


def test_ccdf_points_and_shape(rng):
    assert ccdf([1, 1]).points() == [(1.0, 1.0)]
    curve = ccdf(rng.pareto(1.5, size=500))
    assert curve.p[0] <= 1.0
    assert np.all(np.diff(curve.p) < 0)
    assert np.all(curve.x > 0)


def test_power_law_closed_form():
    samples = [math.e * 2.0] * 20
    fit = fit_power_law(samples, x_min=2.0)
    assert fit.alpha == pytest.approx(2.0)
    assert fit.stderr == pytest.approx(1.0 / math.sqrt(20))


def test_power_law_recovers_exponent():
    rng = np.random.default_rng(215)
    alpha = 2.15
    samples = (1.0 - rng.random(100_000)) ** (-1.0 / (alpha - 1.0))
    fit = fit_power_law(samples, x_min=1.0)
    assert abs(fit.alpha - alpha) <= 3 * fit.stderr


def test_power_law_errors():
    with pytest.raises(PowerLawFitError) as degenerate:
        fit_power_law([3.0] * 12, x_min=3.0)
    assert degenerate.value.code == PowerLawFitError.TOO_DEGENERATE
    with pytest.raises(PowerLawFitError) as few:
        fit_power_law([5.0, 6.0], x_min=1.0)
    assert few.value.code == PowerLawFitError.TOO_FEW_SAMPLES
    with pytest.raises(PowerLawFitError) as bad:
        fit_power_law([5.0] * 20, x_min=0.0)
    assert bad.value.code == PowerLawFitError.BAD_XMIN


def test_scc_size_summary():
    graph = build_graph(
        [
            ("A", "B", 0.1),
            ("B", "A", 0.1),
            ("B", "C", 0.1),
            ("C", "D", 0.1),
            ("D", "E", 0.1),
            ("E", "C", 0.1),
            ("X", "Y", 0.1),
            ("Y", "X", 0.1),
        ]
    )
    summary = scc_size_summary(
        strongly_connected_components(graph), weakly_connected_components(graph)
    )
    assert summary.nontrivial == 3
    assert (summary.largest, summary.second_largest) == (3, 2)
    assert summary.histogram == {3: 1, 2: 2}
    assert summary.in_largest_weak_component == 2
