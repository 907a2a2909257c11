from __future__ import annotations

import numpy as np
import pytest

from ownet_core.graph import Role, validate, write_graph
from ownet_core.models import ControlModel, ModelKind, check_frobenius_condition, direct_control
from ownet_core.synth import SynthError, SynthKind, SynthSpec, generate
from ownet_core.topology import Section, bow_tie, strongly_connected_components, weakly_connected_components


def _edges(graph):
    return {(edge.src, edge.dst): edge.weight for edge in graph.edges()}


def test_chain():
    graph = generate(SynthSpec(SynthKind.CHAIN, n=3))
    assert set(_edges(graph)) == {("1", "2"), ("2", "3")}


def test_cycle_with_fixed_weight():
    graph = generate(SynthSpec(SynthKind.CYCLE, n=2, weight=0.5))
    assert _edges(graph) == {("1", "2"): 0.5, ("2", "1"): 0.5}


def test_bowtie_sections_match_request():
    graph = generate(SynthSpec(SynthKind.BOWTIE, in_size=3, core_size=4, out_size=5, seed=42))
    partition = bow_tie(graph)
    counts = partition.counts()
    assert (counts[Section.IN], counts[Section.SCC], counts[Section.OUT]) == (3, 4, 5)
    assert partition.core == ("4", "5", "6", "7")
    assert graph.record("1").role is Role.SH
    assert graph.record("4").role is Role.TNC
    assert graph.record("12").role is Role.PC


def test_bowtie_with_tubes_and_tendrils():
    spec = SynthSpec(SynthKind.BOWTIE, in_size=4, core_size=3, out_size=2, tt_size=3, seed=7)
    partition = bow_tie(generate(spec))
    counts = partition.counts()
    assert counts[Section.TT] == 3
    assert counts[Section.OCC] == 0
    sccs = strongly_connected_components(generate(spec))
    largest = max(range(sccs.count), key=sccs.size)
    assert sccs.member_ids(largest) == partition.core


@pytest.mark.parametrize("kind", list(SynthKind))
def test_generated_graphs_validate(kind):
    for seed in range(20):
        spec = SynthSpec(kind, n=30, density=0.1, seed=seed, core_degree=3)
        graph = generate(spec)
        report = validate(graph)
        assert report.ok, report.errors
        assert np.all(graph.in_weight_sums() <= 0.95 + 1e-12)
        assert check_frobenius_condition(direct_control(graph, ControlModel(ModelKind.LM))).ok


def test_bowtie_has_no_majority_cycle():
    for seed in range(50):
        graph = generate(SynthSpec(SynthKind.BOWTIE, core_size=6, core_degree=3, seed=seed))
        control = direct_control(graph, ControlModel(ModelKind.TM, 0.5))
        assert check_frobenius_condition(control).ok


def test_same_seed_same_files(tmp_path):
    spec = SynthSpec(SynthKind.ER_WEIGHTED, n=50, density=0.08, seed=3)
    for name in ("a", "b"):
        write_graph(generate(spec), tmp_path / f"{name}_nodes.csv", tmp_path / f"{name}_edges.csv")
    for table in ("nodes", "edges"):
        assert (tmp_path / f"a_{table}.csv").read_bytes() == (tmp_path / f"b_{table}.csv").read_bytes()
    other = generate(SynthSpec(SynthKind.ER_WEIGHTED, n=50, density=0.08, seed=4))
    assert _edges(other) != _edges(generate(spec))


def test_dag_is_acyclic_and_connected_option():
    graph = generate(SynthSpec(SynthKind.DAG, n=40, density=0.05, seed=1, connected=True))
    assert strongly_connected_components(graph).nontrivial() == []
    assert weakly_connected_components(graph).count == 1


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": SynthKind.BOWTIE, "core_size": 1},
        {"kind": SynthKind.CYCLE, "n": 1},
        {"kind": SynthKind.CHAIN, "n": 0},
        {"kind": SynthKind.DAG, "density": 0.0, "connected": True},
        {"kind": SynthKind.ER_WEIGHTED, "density": 1.5},
        {"kind": SynthKind.DAG, "min_column_sum": 0.9, "max_column_sum": 0.5},
        {"kind": SynthKind.BOWTIE, "in_size": 0, "tt_size": 2},
    ],
)
def test_infeasible_specs(kwargs):
    with pytest.raises(SynthError):
        SynthSpec(**kwargs)


def test_fixed_weight_cannot_overfill_a_column():
    with pytest.raises(SynthError):
        generate(SynthSpec(SynthKind.ER_WEIGHTED, n=20, density=0.9, weight=0.4, seed=0))
