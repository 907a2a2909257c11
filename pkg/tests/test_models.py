from __future__ import annotations

import numpy as np
import pytest

from ownet_core.models import (
    ControlModel,
    ModelKind,
    check_frobenius_condition,
    direct_control,
)

from conftest import build_graph, graph_from_dense, random_weights

TM = ControlModel(ModelKind.TM)
LM = ControlModel(ModelKind.LM)
RM = ControlModel(ModelKind.RM)


def _column(graph, control, node_id):
    dense = control.matrix.toarray()
    return {
        holder: dense[graph.index_of(holder), graph.index_of(node_id)]
        for holder in graph.ids
        if dense[graph.index_of(holder), graph.index_of(node_id)] != 0
    }


def test_threshold_gives_majority_holder_full_control():
    graph = build_graph([("A", "C", 0.6), ("B", "C", 0.4)])
    assert _column(graph, direct_control(graph, TM), "C") == {"A": 1.0}


def test_threshold_is_strict():
    graph = build_graph([("A", "C", 0.5), ("B", "C", 0.5)])
    assert direct_control(graph, TM).matrix.nnz == 0


def test_low_threshold_tie_goes_to_smaller_id():
    graph = build_graph([("B", "C", 0.4), ("A", "C", 0.4)])
    control = direct_control(graph, ControlModel(ModelKind.TM, threshold=0.3))
    assert _column(graph, control, "C") == {"A": 1.0}


def test_low_threshold_prefers_larger_share():
    graph = build_graph([("A", "C", 0.35), ("B", "C", 0.45)])
    control = direct_control(graph, ControlModel(ModelKind.TM, threshold=0.3))
    assert _column(graph, control, "C") == {"B": 1.0}


def test_relative_model_examples():
    even = build_graph([("A", "C", 0.5), ("B", "C", 0.5)])
    assert _column(even, direct_control(even, RM), "C") == pytest.approx({"A": 0.5, "B": 0.5})
    skewed = build_graph([("A", "C", 0.3), ("B", "C", 0.1)])
    assert _column(skewed, direct_control(skewed, RM), "C") == pytest.approx({"A": 0.9, "B": 0.1})


def test_relative_model_leaves_unowned_columns_empty():
    graph = build_graph([("A", "B", 0.3)])
    control = direct_control(graph, RM)
    assert control.matrix[:, graph.index_of("A")].nnz == 0


@pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2, 1.5])
def test_threshold_outside_open_interval_is_rejected(threshold):
    with pytest.raises(ValueError):
        ControlModel(ModelKind.TM, threshold=threshold)


def test_parse_and_label():
    assert ControlModel.parse("TM", 0.3).label == "TM(0.3)"
    assert ControlModel.parse("rm").kind is ModelKind.RM
    with pytest.raises(ValueError):
        ControlModel.parse("banzhaf")


def test_model_invariants_over_random_columns(rng):
    for _ in range(10):
        weights = random_weights(rng, 100, 0.05, max_column_sum=1.0)
        graph = graph_from_dense(weights)

        linear = direct_control(graph, LM).matrix
        assert np.array_equal(linear.indptr, graph.weights.indptr)
        assert np.array_equal(linear.indices, graph.weights.indices)
        assert np.array_equal(linear.data, graph.weights.data)

        threshold = direct_control(graph, TM).matrix.tocsc()
        assert np.all(np.diff(threshold.indptr) <= 1)
        assert np.all(threshold.data == 1.0)

        relative = direct_control(graph, RM).matrix.tocsc()
        sums = np.asarray(relative.sum(axis=0)).ravel()
        nonempty = np.diff(relative.indptr) > 0
        assert np.allclose(sums[nonempty], 1.0, rtol=0, atol=1e-12)


def test_raising_threshold_never_adds_links(rng):
    weights = random_weights(rng, 60, 0.1, max_column_sum=1.0)
    graph = graph_from_dense(weights)
    previous = None
    for threshold in (0.2, 0.3, 0.5, 0.7, 0.9):
        links = {
            tuple(pair)
            for pair in np.argwhere(
                direct_control(graph, ControlModel(ModelKind.TM, threshold)).matrix.toarray()
            )
        }
        if previous is not None:
            assert links <= previous
        previous = links


def test_relative_model_scale_invariance_and_dominance():
    graph = build_graph([("A", "D", 0.3), ("B", "D", 0.2), ("C", "D", 0.1)])
    scaled = build_graph([("A", "D", 0.15), ("B", "D", 0.1), ("C", "D", 0.05)])
    original = _column(graph, direct_control(graph, RM), "D")
    assert _column(scaled, direct_control(scaled, RM), "D") == pytest.approx(original)
    assert original["A"] > original["B"] > original["C"]


def test_frobenius_examples():
    half = build_graph([("A", "B", 0.5), ("B", "A", 0.5)])
    assert check_frobenius_condition(direct_control(half, LM)).ok

    full = build_graph([("A", "B", 1.0), ("B", "A", 1.0)])
    report = check_frobenius_condition(direct_control(full, LM))
    assert not report.ok
    assert report.offending_sccs == [("A", "B")]

    dag = build_graph([("A", "B", 1.0), ("B", "C", 1.0)])
    assert check_frobenius_condition(direct_control(dag, LM)).ok


def test_threshold_cycle_violates_condition():
    graph = build_graph([("A", "B", 0.6), ("B", "A", 0.6)])
    report = check_frobenius_condition(direct_control(graph, TM))
    assert not report.ok


def test_condition_implies_spectral_radius_below_one(rng):
    for _ in range(30):
        n = int(rng.integers(2, 40))
        graph = graph_from_dense(random_weights(rng, n, 0.2, max_column_sum=1.0))
        for model in (LM, TM, RM):
            control = direct_control(graph, model)
            if check_frobenius_condition(control).ok:
                radius = max(abs(np.linalg.eigvals(control.matrix.toarray())))
                assert radius < 1.0
