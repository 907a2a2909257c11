"""Network value and network control: naive, cycle-corrected and staged."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .log import log_event
from .models import ControlMatrix, ControlModel, ModelKind, check_frobenius_condition
from .parallel import ordered_map
from .solver import (
    NonConvergenceError,
    SolverOptions,
    SolverStats,
    combine_stats,
    dense_inverse,
    residual_norm,
    solve_fixed_point,
)
from .topology import BowTiePartition, SccSet, adjacency, bfs_layers, strongly_connected_components

logger = logging.getLogger(__name__)

ValueVector = Union[Mapping[str, float], np.ndarray, Sequence[float]]


class EngineError(RuntimeError):
    """Raised for unsolvable systems or inconsistent engine inputs."""


class Method(str, Enum):
    NAIVE = "naive"
    CORRECTED = "corrected"
    STAGED = "staged"


@dataclass(frozen=True, eq=False)
class ControlResult:
    ids: Tuple[str, ...]
    values: np.ndarray
    v_net: np.ndarray
    method: Method
    model: ControlModel
    stats: SolverStats
    details: Dict[str, object] = field(default_factory=dict)

    @cached_property
    def c_net(self) -> np.ndarray:
        return self.v_net - self.values

    @cached_property
    def _index(self) -> Dict[str, int]:
        return {node_id: position for position, node_id in enumerate(self.ids)}

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError as exc:
            raise EngineError(f"unknown node {node_id!r}") from exc

    def v_net_of(self, node_id: str) -> float:
        return float(self.v_net[self.index_of(node_id)])

    def c_net_of(self, node_id: str) -> float:
        return float(self.c_net[self.index_of(node_id)])

    def key_vector(self, key: str) -> np.ndarray:
        """``cnet``, ``vnet`` or ``value`` as an array aligned with ``ids``."""
        if key == "cnet":
            return self.c_net
        if key == "vnet":
            return self.v_net
        if key == "value":
            return self.values
        raise ValueError(f"unknown key '{key}'")

    def rows(self) -> List[Tuple[str, float, float, float]]:
        c_net = self.c_net
        return [
            (node_id, float(self.values[i]), float(self.v_net[i]), float(c_net[i]))
            for i, node_id in enumerate(self.ids)
        ]

    def stats_dict(self) -> Dict[str, object]:
        payload: Dict[str, object] = {
            "method": self.method.value,
            "model": self.model.label,
            "nodes": len(self.ids),
            "solver": self.stats.as_dict(),
            "total_value": float(self.values.sum()),
            "total_network_control": float(self.c_net.sum()),
        }
        payload.update(self.details)
        return payload


@dataclass(frozen=True, eq=False)
class SubnetworkView:
    """Downstream closure of ``root``; links into the root are removed.

    ``indices`` lists global node indices with the root first, then BFS
    layer order, ties by index.
    """

    root: str
    ids: Tuple[str, ...]
    indices: np.ndarray
    matrix: sp.csr_matrix

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def d(self) -> np.ndarray:
        return self.matrix[0, 1:].toarray().ravel()

    @property
    def b_sub(self) -> sp.csr_matrix:
        return self.matrix[1:, 1:].tocsr()


@dataclass(frozen=True)
class FlowCheck:
    converged: bool
    steps: int
    error: float

    def __bool__(self) -> bool:
        return self.converged


def _options(options: Optional[SolverOptions]) -> SolverOptions:
    return options or SolverOptions()


def value_array(ids: Sequence[str], values: ValueVector) -> np.ndarray:
    """Align ``values`` with ``ids``; nodes missing from a mapping read as 0."""
    if isinstance(values, Mapping):
        index = {node_id: i for i, node_id in enumerate(ids)}
        vector = np.zeros(len(ids), dtype=np.float64)
        for node_id, value in values.items():
            if node_id not in index:
                raise EngineError(f"value given for unknown node {node_id!r}")
            vector[index[node_id]] = float(value)
    else:
        vector = np.array(values, dtype=np.float64)
        if vector.shape != (len(ids),):
            raise EngineError(
                f"value vector has shape {vector.shape}, expected ({len(ids)},)"
            )
    if vector.size and (np.any(vector < 0) or not np.all(np.isfinite(vector))):
        raise EngineError("intrinsic values must be finite and non-negative")
    return vector


def check_solvable(control: ControlMatrix) -> None:
    """Raise ``EngineError`` when some cycle has no outflow of control."""
    report = check_frobenius_condition(control)
    if not report.ok:
        shown = "; ".join(
            "{" + ", ".join(scc[:5]) + (", ..." if len(scc) > 5 else "") + "}"
            for scc in report.offending_sccs[:3]
        )
        raise EngineError(
            f"{len(report.offending_sccs)} strongly connected component(s) keep all"
            f" control inside the cycle under {control.model.label}: {shown}"
        )


def network_value_naive(
    control: ControlMatrix,
    values: ValueVector,
    options: Optional[SolverOptions] = None,
) -> ControlResult:
    """Solve ``v_net = C v_net + v``; ``c_net = v_net - v``."""
    v = value_array(control.ids, values)
    check_solvable(control)
    v_net, stats = solve_fixed_point(control.matrix, v, _options(options))
    return ControlResult(control.ids, v, v_net, Method.NAIVE, control.model, stats)


def integrated_control(
    control: ControlMatrix, options: Optional[SolverOptions] = None
) -> np.ndarray:
    """Dense ``(I - C)^-1 C``, the sum of all path products."""
    inverse = dense_inverse(control.matrix, _options(options).dense_limit)
    return inverse @ control.matrix.toarray()


def correction_operator(
    control: ControlMatrix, options: Optional[SolverOptions] = None
) -> np.ndarray:
    """Diagonal of ``D = diag((I - C)^-1)^-1`` as a vector."""
    inverse = dense_inverse(control.matrix, _options(options).dense_limit)
    return 1.0 / np.diag(inverse)


def corrected_network_value(
    control: ControlMatrix,
    values: ValueVector,
    options: Optional[SolverOptions] = None,
) -> ControlResult:
    """``D`` applied to the naive network value (dense validation mode)."""
    started = time.perf_counter()
    v = value_array(control.ids, values)
    check_solvable(control)
    inverse = dense_inverse(control.matrix, _options(options).dense_limit)
    naive = inverse @ v
    correction = 1.0 / np.diag(inverse)
    stats = SolverStats(
        method="dense",
        iterations=0,
        residual=residual_norm(control.matrix, naive, v),
        elapsed=time.perf_counter() - started,
    )
    return ControlResult(
        control.ids,
        v,
        correction * naive,
        Method.CORRECTED,
        control.model,
        stats,
        details={"min_correction": float(correction.min()) if correction.size else 1.0},
    )


def _view(
    matrix: sp.csr_matrix, root: int, allowed: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, sp.csr_matrix]:
    nodes = np.concatenate(bfs_layers(matrix, [root], allowed))
    block = matrix[nodes][:, nodes].tocsr()
    keep = np.ones(nodes.size)
    keep[0] = 0.0
    block = (block @ sp.diags(keep)).tocsr()
    block.eliminate_zeros()
    return nodes, block


def _view_value(
    matrix: sp.csr_matrix,
    values: np.ndarray,
    root: int,
    options: SolverOptions,
    allowed: Optional[np.ndarray] = None,
) -> Tuple[float, SolverStats]:
    nodes, block = _view(matrix, root, allowed)
    local = values[nodes]
    if nodes.size == 1:
        return float(local[0]), SolverStats("direct", 0, 0.0, 0.0)
    solution, stats = solve_fixed_point(block[1:, 1:], local[1:], options)
    d = block[0, 1:].toarray().ravel()
    return float(local[0] + d @ solution), stats


def bfs_downstream_subnetwork(
    control: ControlMatrix,
    node_id: str,
    allowed: Optional[np.ndarray] = None,
) -> SubnetworkView:
    try:
        root = control.index_of(node_id)
    except KeyError as exc:
        raise EngineError(f"unknown node {node_id!r}") from exc
    nodes, block = _view(control.matrix, root, allowed)
    return SubnetworkView(
        root=node_id,
        ids=tuple(control.ids[i] for i in nodes),
        indices=nodes,
        matrix=block,
    )


def node_network_value_bfs(
    control: ControlMatrix,
    values: ValueVector,
    node_id: str,
    options: Optional[SolverOptions] = None,
) -> float:
    """``v_net(i) = v_i + d (I - B_sub)^-1 v_sub`` on the downstream view of ``i``."""
    v = value_array(control.ids, values)
    try:
        root = control.index_of(node_id)
    except KeyError as exc:
        raise EngineError(f"unknown node {node_id!r}") from exc
    value, _ = _view_value(control.matrix, v, root, _options(options))
    return value


def partition_matches(control: ControlMatrix, sccs: SccSet, partition: BowTiePartition) -> bool:
    """True when the partition's core is one strongly connected component of C."""
    if tuple(partition.ids) != tuple(control.ids) or not partition.core:
        return False
    core = sorted(control.index_of(node_id) for node_id in partition.core)
    component = sccs.component_of(core[0])
    return list(sccs.members[component]) == core and sccs.is_nontrivial(component)


def _check_partition(
    control: ControlMatrix, sccs: SccSet, partition: Optional[BowTiePartition]
) -> None:
    if tuple(sccs.ids) != tuple(control.ids):
        raise EngineError("SCC set was computed for a different node set")
    if partition is not None and not partition_matches(control, sccs, partition):
        raise EngineError("bow-tie core is not a strongly connected component of C")


def staged_network_value(
    control: ControlMatrix,
    values: ValueVector,
    scc_set: Optional[SccSet] = None,
    partition: Optional[BowTiePartition] = None,
    options: Optional[SolverOptions] = None,
) -> ControlResult:
    """Cycle-aware network value, flowing from sinks back to sources.

    Components of C are processed in reverse topological order. An acyclic
    node gets ``v_i + sum_j C_ij v_net(j)`` over its already final
    successors, so value reaches upstream neighbours of a cycle by one hop
    only. Inside a cyclic component every member's intrinsic value is first
    increased by its inflow from outside the component, then each member is
    valued by a BFS solve over the component with links into it removed.
    """
    started = time.perf_counter()
    options = _options(options)
    v = value_array(control.ids, values)
    check_solvable(control)
    sccs = scc_set if scc_set is not None else strongly_connected_components(control)
    _check_partition(control, sccs, partition)

    matrix = control.matrix
    indptr, indices, data = matrix.indptr, matrix.indices, matrix.data
    v_net = np.zeros(control.n, dtype=np.float64)
    parts: List[SolverStats] = []
    cyclic = 0
    for component in reversed(range(sccs.count)):
        members = sccs.members[component]
        if not sccs.is_nontrivial(component):
            i = int(members[0])
            start, end = indptr[i], indptr[i + 1]
            v_net[i] = v[i] + float(data[start:end] @ v_net[indices[start:end]])
            continue
        cyclic += 1
        rows = matrix[members]
        outside = sccs.labels[rows.indices] != component
        inflow = np.asarray(
            sp.csr_matrix(
                (rows.data * outside, rows.indices, rows.indptr), shape=rows.shape
            )
            @ v_net
        ).ravel()
        folded = v[members] + inflow
        block = rows[:, members].tocsr()
        solved = ordered_map(
            lambda root: _view_value(block, folded, root, options),
            list(range(members.size)),
        )
        for position, (value, stats) in enumerate(solved):
            v_net[members[position]] = value
            parts.append(stats)
        log_event(
            logger,
            logging.DEBUG,
            "cyclic component valued",
            component=component,
            size=int(members.size),
        )

    details: Dict[str, object] = {"cyclic_components": cyclic}
    if partition is not None:
        c_net = v_net - v
        details["section_network_control"] = {
            section.value: float(c_net[partition.mask(section)].sum())
            for section in partition.counts()
        }
    stats = combine_stats("staged", parts, time.perf_counter() - started)
    return ControlResult(
        control.ids, v, v_net, Method.STAGED, control.model, stats, details
    )


def compute_network_value(
    control: ControlMatrix,
    values: ValueVector,
    method: Method,
    options: Optional[SolverOptions] = None,
    scc_set: Optional[SccSet] = None,
    partition: Optional[BowTiePartition] = None,
) -> ControlResult:
    if method is Method.NAIVE:
        result = network_value_naive(control, values, options)
    elif method is Method.CORRECTED:
        result = corrected_network_value(control, values, options)
    else:
        result = staged_network_value(control, values, scc_set, partition, options)
    log_event(
        logger,
        logging.INFO,
        "network value computed",
        method=method.value,
        model=control.model.label,
        nodes=control.n,
        elapsed=f"{result.stats.elapsed:.3f}s",
    )
    return result


def network_control(result: ControlResult) -> Dict[str, float]:
    """``c_net = v_net - v`` keyed by NodeId."""
    return {node_id: float(value) for node_id, value in zip(result.ids, result.c_net)}


def portfolio_value(
    network: object,
    values: ValueVector,
    options: Optional[SolverOptions] = None,
) -> Dict[str, float]:
    """``p_net = (I - W)^-1 W v``, the value reached through ownership alone."""
    weights, ids = adjacency(network)
    v = value_array(ids, values)
    check_solvable(
        ControlMatrix(ControlModel(ModelKind.LM), weights, ids)
    )
    p_net, _ = solve_fixed_point(weights, weights @ v, _options(options))
    return {node_id: float(value) for node_id, value in zip(ids, p_net)}


def flow_iteration_check(
    network: object,
    values: ValueVector,
    t_max: int = 100_000,
    tol: float = 1e-8,
) -> FlowCheck:
    """Iterate the inflow ``phi(t+1) = A phi(t) + A v`` from zero.

    Confirms convergence to the naive network control; raises
    ``NonConvergenceError`` when ``t_max`` steps are not enough.
    """
    matrix, ids = adjacency(network)
    v = value_array(ids, values)
    control = ControlMatrix(ControlModel(ModelKind.LM), matrix, ids)
    target = network_value_naive(control, v).c_net
    source = matrix @ v
    phi = np.zeros_like(v)
    error = float(np.max(np.abs(target))) if target.size else 0.0
    for step in range(1, t_max + 1):
        phi = matrix @ phi + source
        error = float(np.max(np.abs(phi - target))) if phi.size else 0.0
        if error <= tol:
            return FlowCheck(converged=True, steps=step, error=error)
    raise NonConvergenceError(
        f"inflow iteration still {error:.3g} away after {t_max} steps"
    )
