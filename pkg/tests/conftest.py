from __future__ import annotations

from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
import pytest

from ownet_core.graph import NodeRecord, OwnershipEdge, OwnershipGraph, Role
from ownet_core.models import ControlMatrix, ControlModel, ModelKind, direct_control

EdgeList = Sequence[Tuple[str, str, float]]


def build_graph(
    edges: EdgeList,
    nodes: Iterable[str] = (),
    values: Optional[Mapping[str, float]] = None,
    roles: Optional[Mapping[str, Role]] = None,
    countries: Optional[Mapping[str, str]] = None,
) -> OwnershipGraph:
    values = values or {}
    roles = roles or {}
    countries = countries or {}
    ids = set(nodes) | {src for src, _, _ in edges} | {dst for _, dst, _ in edges}
    ids |= set(values) | set(roles) | set(countries)
    records = [
        NodeRecord(
            id=node_id,
            role=roles.get(node_id, Role.UNKNOWN),
            value=float(values.get(node_id, 0.0)),
            country=countries.get(node_id),
        )
        for node_id in ids
    ]
    return OwnershipGraph.from_edges(
        records, [OwnershipEdge(src, dst, weight) for src, dst, weight in edges]
    )


def random_weights(
    rng: np.random.Generator,
    n: int,
    density: float,
    acyclic: bool = False,
    max_column_sum: float = 0.9,
) -> np.ndarray:
    """Dense W with zero diagonal and every column sum at most ``max_column_sum``."""
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    if acyclic:
        mask = np.triu(mask, k=1)
    weights = np.where(mask, rng.uniform(0.05, 1.0, size=(n, n)), 0.0)
    sums = weights.sum(axis=0)
    targets = rng.uniform(0.2, max_column_sum, size=n)
    scale = np.divide(targets, sums, out=np.zeros(n), where=sums > 0)
    return weights * scale


def graph_from_dense(weights: np.ndarray, values: Optional[np.ndarray] = None) -> OwnershipGraph:
    n = weights.shape[0]
    ids = [str(i + 1) for i in range(n)]
    rows, cols = np.nonzero(weights)
    edges = [(ids[i], ids[j], float(weights[i, j])) for i, j in zip(rows, cols)]
    value_map = {ids[i]: float(values[i]) for i in range(n)} if values is not None else {}
    return build_graph(edges, nodes=ids, values=value_map)


def lm(graph: OwnershipGraph) -> ControlMatrix:
    return direct_control(graph, ControlModel(ModelKind.LM))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20070101)


@pytest.fixture
def make_graph() -> Callable[..., OwnershipGraph]:
    return build_graph


@pytest.fixture
def chain_graph() -> OwnershipGraph:
    """i -> j -> k with unit weights and values (0, 1, 1)."""
    return build_graph(
        [("i", "j", 1.0), ("j", "k", 1.0)], values={"i": 0.0, "j": 1.0, "k": 1.0}
    )


@pytest.fixture
def two_cycle() -> OwnershipGraph:
    return build_graph([("A", "B", 0.5), ("B", "A", 0.5)], values={"A": 1.0, "B": 1.0})


@pytest.fixture
def leaky_core() -> OwnershipGraph:
    """r holds 1% of a, which sits in a 90/90 cross-shareholding with b."""
    return build_graph(
        [("r", "a", 0.01), ("a", "b", 0.9), ("b", "a", 0.9)],
        values={"r": 0.0, "a": 1.0, "b": 1.0},
    )


def dense_values(result_ids: Sequence[str], mapping: Dict[str, float]) -> np.ndarray:
    return np.array([mapping[node_id] for node_id in result_ids])
