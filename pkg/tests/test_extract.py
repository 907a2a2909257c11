from __future__ import annotations

import io

import numpy as np
import pytest

from ownet_core.extract import (
    ExtractionError,
    TncSelectionInput,
    extract_tnc_network,
    provenance_label,
    read_selection_input,
    select_tncs,
    write_roles,
)
from ownet_core.graph import GraphLoadError, Role

from conftest import build_graph, graph_from_dense, random_weights


def test_select_owner_across_countries():
    graph = build_graph(
        [("A", "X", 0.15), ("A", "Y", 0.15), ("B", "Z", 0.15), ("B", "Y", 0.05)],
        countries={"X": "DE", "Y": "FR", "Z": "DE"},
    )
    assert select_tncs(graph) == frozenset({"A"})


def test_single_country_is_not_selected():
    graph = build_graph(
        [("A", "X", 0.15), ("A", "Y", 0.15)], countries={"X": "DE", "Y": "DE"}
    )
    assert select_tncs(graph) == frozenset()


def test_min_share_is_inclusive_and_configurable():
    graph = build_graph(
        [("A", "X", 0.10), ("A", "Y", 0.10)], countries={"X": "DE", "Y": "FR"}
    )
    assert select_tncs(graph) == frozenset({"A"})
    assert select_tncs(graph, min_share=0.2) == frozenset()
    with pytest.raises(ValueError):
        select_tncs(graph, min_share=0.0)


def test_listed_ultimate_owner_replaces_seed():
    graph = build_graph(
        [("A", "X", 0.5), ("A", "Y", 0.5), ("U", "A", 0.9)],
        countries={"X": "US", "Y": "MX", "A": "US"},
    )
    listed = TncSelectionInput(listed=frozenset({"U"}), ultimate_owner={"A": "U"})
    assert select_tncs(graph, listed) == frozenset({"U"})
    unlisted = TncSelectionInput(ultimate_owner={"A": "U"})
    assert select_tncs(graph, unlisted) == frozenset({"A"})


def test_missing_country_fraction():
    graph = build_graph([("A", "X", 0.5), ("A", "Y", 0.5)], countries={"Y": "DE"})
    with pytest.raises(ExtractionError):
        select_tncs(graph)
    assert select_tncs(graph, max_missing_country=0.6) == frozenset()


def test_read_selection_input():
    table = io.StringIO("id,listed,ultimate_owner\nA,no,U\nU,yes,\nB,,\n")
    selection = read_selection_input(table)
    assert selection.listed == frozenset({"U"})
    assert dict(selection.ultimate_owner) == {"A": "U"}
    with pytest.raises(GraphLoadError):
        read_selection_input(io.StringIO("id,listed\nA,maybe\n"))


def test_one_of_each_role():
    graph = build_graph([("T", "P", 0.5), ("S", "T", 0.5)])
    result = extract_tnc_network(graph, {"T"})
    assert result.roles == {"S": Role.SH, "T": Role.TNC, "P": Role.PC}
    assert result.counts() == {"TNC": 1, "SH": 1, "PC": 1}
    assert result.subgraph.record("P").role is Role.PC


def test_shared_participation_and_precedence():
    graph = build_graph(
        [("T1", "P", 0.3), ("T2", "P", 0.3), ("T1", "X", 0.4), ("X", "T2", 0.4)]
    )
    result = extract_tnc_network(graph, ["T1", "T2"])
    assert sorted(result.subgraph.ids) == ["P", "T1", "T2", "X"]
    assert result.roles["P"] is Role.PC
    assert result.roles["X"] is Role.PC
    assert provenance_label(result.provenance["X"]) == "downstream+upstream"
    assert provenance_label(result.provenance["T2"]) == "seed+downstream"
    assert result.roles["T2"] is Role.TNC


def test_unrelated_nodes_are_dropped_and_induced_edges_kept():
    graph = build_graph(
        [("S", "T", 0.5), ("T", "P", 0.5), ("S", "P", 0.2), ("Q", "R", 0.5)]
    )
    result = extract_tnc_network(graph, ["T"])
    assert "Q" not in result.subgraph
    edges = {(edge.src, edge.dst) for edge in result.subgraph.edges()}
    assert edges == {("S", "T"), ("T", "P"), ("S", "P")}


def test_min_edge_weight_limits_upstream_walk():
    graph = build_graph([("S1", "T", 0.05), ("S2", "T", 0.5), ("T", "P", 0.01)])
    result = extract_tnc_network(graph, ["T"], min_edge_weight=0.1)
    assert set(result.roles) == {"S2", "T", "P"}


def test_extraction_errors():
    graph = build_graph([("A", "B", 0.5)])
    with pytest.raises(ExtractionError):
        extract_tnc_network(graph, [])
    with pytest.raises(ExtractionError):
        extract_tnc_network(graph, ["Z"])


def test_extraction_matches_reachability_and_is_monotone(rng):
    for _ in range(100):
        n = int(rng.integers(2, 11))
        graph = graph_from_dense(random_weights(rng, n, float(rng.uniform(0.05, 0.3))))
        dense = graph.weights.toarray() > 0
        reach = dense.copy()
        for k in range(n):
            reach = reach | (reach[:, [k]] & reach[[k], :])
        seeds = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        seed_ids = [graph.ids[i] for i in seeds]
        result = extract_tnc_network(graph, seed_ids)

        down = reach[seeds].any(axis=0)
        up = reach[:, seeds].any(axis=1)
        expected = set(seeds.tolist()) | set(np.flatnonzero(down | up).tolist())
        assert set(result.roles) == {graph.ids[i] for i in expected}
        for i in expected:
            role = result.roles[graph.ids[i]]
            if i in seeds:
                assert role is Role.TNC
            elif down[i]:
                assert role is Role.PC
            else:
                assert role is Role.SH
        assert sum(result.counts().values()) == result.subgraph.n

        extra = graph.ids[int(rng.integers(n))]
        larger = extract_tnc_network(graph, seed_ids + [extra])
        assert set(result.roles) <= set(larger.roles)


def test_write_roles(tmp_path):
    graph = build_graph([("T", "P", 0.5), ("S", "T", 0.5)])
    path = tmp_path / "roles.csv"
    write_roles(extract_tnc_network(graph, ["T"]), path)
    assert path.read_text(encoding="utf-8").splitlines() == [
        "id,role,provenance",
        "P,PC,downstream",
        "S,SH,upstream",
        "T,TNC,seed",
    ]
