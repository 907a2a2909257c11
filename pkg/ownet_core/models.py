"""Direct-control models: linear (LM), threshold (TM) and relative (RM)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp

from .graph import OwnershipGraph
from .topology import strongly_connected_components

FROBENIUS_SLACK = 1e-9


class ModelKind(str, Enum):
    LM = "lm"
    TM = "tm"
    RM = "rm"


@dataclass(frozen=True)
class ControlModel:
    kind: ModelKind = ModelKind.TM
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.kind is ModelKind.TM and not 0.0 < self.threshold < 1.0:
            raise ValueError(
                f"threshold must lie strictly between 0 and 1, got {self.threshold}"
            )

    @classmethod
    def parse(cls, name: str, threshold: float = 0.5) -> "ControlModel":
        try:
            kind = ModelKind(name.strip().lower())
        except ValueError as exc:
            raise ValueError(f"unknown control model '{name}'") from exc
        return cls(kind=kind, threshold=threshold)

    @property
    def label(self) -> str:
        if self.kind is ModelKind.TM:
            return f"TM({self.threshold:g})"
        return self.kind.name


@dataclass(frozen=True, eq=False)
class ControlMatrix:
    """Sparse direct-control matrix; ``matrix[i, j]`` is i's control over j."""

    model: ControlModel
    matrix: sp.csr_matrix
    ids: Tuple[str, ...]

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _index(self) -> Dict[str, int]:
        return {node_id: position for position, node_id in enumerate(self.ids)}

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError as exc:
            raise KeyError(f"unknown node {node_id!r}") from exc


def _threshold_matrix(weights: sp.csr_matrix, threshold: float) -> sp.csr_matrix:
    n = weights.shape[0]
    coo = weights.tocoo()
    above = coo.data > threshold
    rows, cols, data = coo.row[above], coo.col[above], coo.data[above]
    if rows.size == 0:
        return sp.csr_matrix((n, n), dtype=np.float64)
    # per column: largest weight first, then the smaller holder index
    order = np.lexsort((rows, -data, cols))
    cols_sorted = cols[order]
    _, first = np.unique(cols_sorted, return_index=True)
    winners = order[first]
    ones = np.ones(winners.size, dtype=np.float64)
    return sp.csr_matrix((ones, (rows[winners], cols[winners])), shape=(n, n))


def _relative_matrix(weights: sp.csr_matrix) -> sp.csr_matrix:
    squares = weights.multiply(weights).tocsc()
    column_sums = np.asarray(squares.sum(axis=0)).ravel()
    scale = np.zeros_like(column_sums)
    nonempty = column_sums > 0
    scale[nonempty] = 1.0 / column_sums[nonempty]
    return sp.csr_matrix(squares @ sp.diags(scale))


def direct_control(graph: OwnershipGraph, model: ControlModel) -> ControlMatrix:
    """Build the direct-control matrix of ``graph`` under ``model``.

    LM copies W. TM gives full control (1) to the single holder strictly above
    the threshold; below 0.5 several holders may qualify and the largest share
    wins, then the smaller NodeId. RM assigns W_ij^2 / sum_l W_lj^2.
    """
    weights = graph.weights
    if model.kind is ModelKind.LM:
        matrix = weights.copy()
    elif model.kind is ModelKind.TM:
        matrix = _threshold_matrix(weights, model.threshold)
    else:
        matrix = _relative_matrix(weights)
    matrix = sp.csr_matrix(matrix, dtype=np.float64)
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return ControlMatrix(model=model, matrix=matrix, ids=graph.ids)


@dataclass(frozen=True)
class FrobeniusReport:
    ok: bool
    offending_sccs: List[Tuple[str, ...]]


def check_frobenius_condition(control: ControlMatrix) -> FrobeniusReport:
    """Check that every cyclic SCC has a column with in-SCC sum below one.

    This is the sufficient condition for the spectral radius of C to be
    smaller than one, so that ``(I - C)`` is invertible with a non-negative
    inverse.
    """
    sccs = strongly_connected_components(control)
    if sccs.count == 0:
        return FrobeniusReport(ok=True, offending_sccs=[])
    coo = control.matrix.tocoo()
    labels = sccs.labels
    inside = labels[coo.row] == labels[coo.col]
    column_sums = np.bincount(
        coo.col[inside], weights=coo.data[inside], minlength=control.n
    )
    offending: List[Tuple[str, ...]] = []
    for component in sccs.nontrivial():
        members = sccs.members[component]
        if np.min(column_sums[members]) >= 1.0 - FROBENIUS_SLACK:
            offending.append(sccs.member_ids(component))
    return FrobeniusReport(ok=not offending, offending_sccs=offending)
