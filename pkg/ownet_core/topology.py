"""Component structure, bow-tie decomposition, cross-shareholding census and
degree statistics of ownership networks."""

from __future__ import annotations

import heapq
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .graph import OwnershipGraph, Role

logger = logging.getLogger(__name__)

MIN_TAIL_SAMPLES = 10


class TopologyError(RuntimeError):
    """Raised when a topological precondition does not hold."""


class PowerLawFitError(RuntimeError):
    """Raised when a power-law tail cannot be estimated."""

    TOO_FEW_SAMPLES = "TOO_FEW_SAMPLES"
    TOO_DEGENERATE = "TOO_DEGENERATE"
    BAD_XMIN = "BAD_XMIN"

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


class Section(str, Enum):
    IN = "IN"
    SCC = "SCC"
    OUT = "OUT"
    TT = "TT"
    OCC = "OCC"


class TTClass(str, Enum):
    TUBE = "TUBE"
    TENDRIL_IN = "TENDRIL_IN"
    TENDRIL_OUT = "TENDRIL_OUT"
    DISCONNECTED = "DISCONNECTED"


SECTION_ORDER = (Section.IN, Section.SCC, Section.OUT, Section.TT, Section.OCC)


def adjacency(network: object) -> Tuple[sp.csr_matrix, Tuple[str, ...]]:
    """Return ``(csr, ids)`` for a graph, a control matrix or a bare matrix."""
    if isinstance(network, OwnershipGraph):
        return network.weights, network.ids
    matrix = getattr(network, "matrix", None)
    ids = getattr(network, "ids", None)
    if matrix is not None and ids is not None:
        return sp.csr_matrix(matrix), tuple(ids)
    if sp.issparse(network) or isinstance(network, np.ndarray):
        csr = sp.csr_matrix(network)
        return csr, tuple(str(position) for position in range(csr.shape[0]))
    raise TypeError(f"cannot take adjacency of {type(network).__name__}")


def frontier_successors(csr: sp.csr_matrix, frontier: np.ndarray) -> np.ndarray:
    """Sorted unique column indices of the rows listed in ``frontier``."""
    if frontier.size == 0:
        return frontier
    starts = csr.indptr[frontier]
    lengths = csr.indptr[frontier + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths)
    gathered = csr.indices[offsets + np.arange(total)]
    return np.unique(gathered)


def bfs_layers(
    csr: sp.csr_matrix,
    sources: Iterable[int],
    allowed: Optional[np.ndarray] = None,
) -> List[np.ndarray]:
    """Breadth-first layers from ``sources``; each layer sorted by index.

    ``allowed`` is an optional boolean mask; nodes outside it are never
    entered (sources are always included).
    """
    visited = np.zeros(csr.shape[0], dtype=bool)
    layer = np.unique(np.asarray(list(sources), dtype=np.int64))
    layers: List[np.ndarray] = []
    while layer.size:
        visited[layer] = True
        layers.append(layer)
        nxt = frontier_successors(csr, layer)
        nxt = nxt[~visited[nxt]]
        if allowed is not None:
            nxt = nxt[allowed[nxt]]
        layer = nxt
    return layers


def reachable(
    csr: sp.csr_matrix,
    sources: Iterable[int],
    allowed: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Boolean mask of nodes reachable from ``sources`` (sources included)."""
    mask = np.zeros(csr.shape[0], dtype=bool)
    for layer in bfs_layers(csr, sources, allowed):
        mask[layer] = True
    return mask


@dataclass(frozen=True)
class ComponentPartition:
    ids: Tuple[str, ...]
    labels: np.ndarray
    component_ids: Tuple[str, ...]
    sizes: Tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.sizes)

    @property
    def largest(self) -> Optional[int]:
        if not self.sizes:
            return None
        best = max(self.sizes)
        return self.sizes.index(best)

    def component_of(self, node_id: str) -> str:
        return self.component_ids[self.labels[self.ids.index(node_id)]]

    def members(self, component: int) -> Tuple[str, ...]:
        return tuple(self.ids[i] for i in np.flatnonzero(self.labels == component))


def _relabel_by_first_member(labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Renumber labels so component k is the one whose smallest index is k-th."""
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(order.size, dtype=np.int64)
    remap[labels[first[order]]] = np.arange(order.size)
    return remap[labels], first[order]


def weakly_connected_components(network: object) -> ComponentPartition:
    """Partition nodes by undirected reachability.

    Component ids are the smallest member NodeId; components are numbered by
    that member so the numbering is deterministic.
    """
    csr, ids = adjacency(network)
    if csr.shape[0] == 0:
        return ComponentPartition(ids, np.empty(0, dtype=np.int64), (), ())
    _, raw = csgraph.connected_components(csr, directed=True, connection="weak")
    labels, firsts = _relabel_by_first_member(raw)
    sizes = np.bincount(labels, minlength=firsts.size)
    return ComponentPartition(
        ids=ids,
        labels=labels,
        component_ids=tuple(ids[i] for i in firsts),
        sizes=tuple(int(size) for size in sizes),
    )


@dataclass(frozen=True)
class SccSet:
    """Maximal strongly connected components in topological order.

    Component k precedes component l whenever an edge leads from k to l, so
    iterating ``reversed(range(count))`` visits sinks first.
    """

    ids: Tuple[str, ...]
    labels: np.ndarray
    members: Tuple[np.ndarray, ...]
    self_loops: np.ndarray
    condensation: sp.csr_matrix

    @property
    def count(self) -> int:
        return len(self.members)

    def size(self, component: int) -> int:
        return int(self.members[component].size)

    def is_nontrivial(self, component: int) -> bool:
        """True for components that contain a cycle."""
        return self.size(component) >= 2 or bool(self.self_loops[component])

    def nontrivial(self) -> List[int]:
        return [k for k in range(self.count) if self.is_nontrivial(k)]

    def member_ids(self, component: int) -> Tuple[str, ...]:
        return tuple(self.ids[i] for i in self.members[component])

    def component_of(self, node_index: int) -> int:
        return int(self.labels[node_index])


def _topological_order(condensation: sp.csr_matrix, priority: np.ndarray) -> np.ndarray:
    count = condensation.shape[0]
    indegree = np.diff(condensation.tocsc().indptr)
    heap = [(int(priority[k]), k) for k in np.flatnonzero(indegree == 0)]
    heapq.heapify(heap)
    remaining = indegree.copy()
    order: List[int] = []
    while heap:
        _, k = heapq.heappop(heap)
        order.append(k)
        start, end = condensation.indptr[k], condensation.indptr[k + 1]
        for succ in condensation.indices[start:end]:
            remaining[succ] -= 1
            if remaining[succ] == 0:
                heapq.heappush(heap, (int(priority[succ]), int(succ)))
    if len(order) != count:
        raise TopologyError("condensation graph contains a cycle")
    return np.asarray(order, dtype=np.int64)


def _condense(csr: sp.csr_matrix, labels: np.ndarray, count: int) -> sp.csr_matrix:
    coo = csr.tocoo()
    src = labels[coo.row]
    dst = labels[coo.col]
    keep = src != dst
    data = np.ones(int(keep.sum()), dtype=np.int8)
    condensed = sp.csr_matrix((data, (src[keep], dst[keep])), shape=(count, count))
    condensed.sum_duplicates()
    condensed.data[:] = 1
    condensed.sort_indices()
    return condensed


def strongly_connected_components(network: object) -> SccSet:
    """Maximal SCCs with their condensation DAG in topological order.

    Uses scipy's iterative Pearce/Tarjan labelling, so depth is bounded by
    heap memory rather than the interpreter call stack.
    """
    csr, ids = adjacency(network)
    n = csr.shape[0]
    if n == 0:
        empty = sp.csr_matrix((0, 0), dtype=np.int8)
        return SccSet(ids, np.empty(0, dtype=np.int64), (), np.empty(0, dtype=bool), empty)
    count, raw = csgraph.connected_components(csr, directed=True, connection="strong")
    raw = raw.astype(np.int64)
    firsts = np.full(count, n, dtype=np.int64)
    np.minimum.at(firsts, raw, np.arange(n))
    condensation = _condense(csr, raw, count)
    order = _topological_order(condensation, firsts)
    position = np.empty(count, dtype=np.int64)
    position[order] = np.arange(count)
    labels = position[raw]
    condensation = _condense(csr, labels, count)

    sort = np.argsort(labels, kind="stable")
    bounds = np.cumsum(np.bincount(labels, minlength=count))[:-1]
    members = tuple(np.split(sort, bounds))
    diagonal = csr.diagonal() != 0
    self_loops = np.zeros(count, dtype=bool)
    self_loops[labels[diagonal]] = True
    return SccSet(
        ids=ids,
        labels=labels,
        members=members,
        self_loops=self_loops,
        condensation=condensation,
    )


@dataclass(frozen=True)
class SccSummary:
    nontrivial: int
    largest: int
    second_largest: int
    histogram: Dict[int, int]
    in_largest_weak_component: int

    def as_dict(self) -> Dict[str, object]:
        return {
            "nontrivial_sccs": self.nontrivial,
            "largest": self.largest,
            "second_largest": self.second_largest,
            "size_histogram": {str(size): count for size, count in sorted(self.histogram.items())},
            "nontrivial_in_largest_weak_component": self.in_largest_weak_component,
        }


def scc_size_summary(scc_set: SccSet, components: ComponentPartition) -> SccSummary:
    """Census of SCC sizes (cross-shareholding structures of any size)."""
    cyclic = scc_set.nontrivial()
    sizes = sorted((scc_set.size(k) for k in cyclic), reverse=True)
    largest_weak = components.largest
    inside = 0
    if largest_weak is not None:
        for k in cyclic:
            if components.labels[scc_set.members[k][0]] == largest_weak:
                inside += 1
    return SccSummary(
        nontrivial=len(cyclic),
        largest=sizes[0] if sizes else 0,
        second_largest=sizes[1] if len(sizes) > 1 else 0,
        histogram=dict(Counter(sizes)),
        in_largest_weak_component=inside,
    )


@dataclass(frozen=True)
class BowTiePartition:
    ids: Tuple[str, ...]
    core: Tuple[str, ...]
    labels: Tuple[Section, ...]
    tt_classes: Optional[Dict[str, TTClass]] = None

    def label_of(self, node_id: str) -> Section:
        return self.labels[self.ids.index(node_id)]

    def members(self, section: Section) -> Tuple[str, ...]:
        return tuple(node for node, label in zip(self.ids, self.labels) if label is section)

    def mask(self, section: Section) -> np.ndarray:
        return np.array([label is section for label in self.labels], dtype=bool)

    def counts(self) -> Dict[Section, int]:
        tally = Counter(self.labels)
        return {section: tally.get(section, 0) for section in SECTION_ORDER}

    def as_mapping(self) -> Dict[str, str]:
        return {node: label.value for node, label in zip(self.ids, self.labels)}


def default_core(scc_set: SccSet, components: ComponentPartition) -> int:
    """Largest cyclic SCC inside the largest weak component."""
    largest = components.largest
    candidates = [
        k
        for k in scc_set.nontrivial()
        if largest is not None and components.labels[scc_set.members[k][0]] == largest
    ]
    if not candidates:
        candidates = scc_set.nontrivial()
    if not candidates:
        raise TopologyError("graph has no cycle, so there is no bow-tie core")
    return max(candidates, key=lambda k: (scc_set.size(k), -int(scc_set.members[k][0])))


def _core_component(scc_set: SccSet, core: Iterable[str]) -> int:
    index = {node: i for i, node in enumerate(scc_set.ids)}
    try:
        positions = sorted({index[node] for node in core})
    except KeyError as exc:
        raise TopologyError(f"core node {exc.args[0]!r} is not in the graph") from exc
    if not positions:
        raise TopologyError("core is empty")
    component = scc_set.component_of(positions[0])
    if list(scc_set.members[component]) != positions:
        raise TopologyError("core is not a strongly connected component of the graph")
    if not scc_set.is_nontrivial(component):
        raise TopologyError("core is a single node without a cycle")
    return component


def bow_tie(
    network: object,
    core: Optional[Iterable[str]] = None,
    *,
    split_tt: bool = False,
    scc_set: Optional[SccSet] = None,
) -> BowTiePartition:
    """Label every node IN, SCC, OUT, TT or OCC relative to ``core``.

    ``core`` defaults to the largest SCC within the largest weak component.
    With ``split_tt`` the TT nodes are further classified as tubes, tendrils
    or disconnected pieces of the weak component.
    """
    csr, ids = adjacency(network)
    sccs = scc_set if scc_set is not None else strongly_connected_components(network)
    components = weakly_connected_components(network)
    component = (
        default_core(sccs, components) if core is None else _core_component(sccs, core)
    )
    core_idx = sccs.members[component]
    n = csr.shape[0]
    transpose = csr.T.tocsr()

    is_core = np.zeros(n, dtype=bool)
    is_core[core_idx] = True
    out_mask = reachable(csr, core_idx) & ~is_core
    in_mask = reachable(transpose, core_idx) & ~is_core
    weak = components.labels == components.labels[core_idx[0]]
    tt_mask = weak & ~(is_core | out_mask | in_mask)

    labels = np.full(n, 4, dtype=np.int8)
    labels[weak] = 3
    labels[in_mask] = 0
    labels[is_core] = 1
    labels[out_mask] = 2
    sections = tuple(SECTION_ORDER[code] for code in labels)

    tt_classes: Optional[Dict[str, TTClass]] = None
    if split_tt:
        from_in = reachable(csr, np.flatnonzero(in_mask), allowed=in_mask | tt_mask)
        to_out = reachable(transpose, np.flatnonzero(out_mask), allowed=out_mask | tt_mask)
        tt_classes = {}
        for i in np.flatnonzero(tt_mask):
            if from_in[i] and to_out[i]:
                tt_classes[ids[i]] = TTClass.TUBE
            elif from_in[i]:
                tt_classes[ids[i]] = TTClass.TENDRIL_IN
            elif to_out[i]:
                tt_classes[ids[i]] = TTClass.TENDRIL_OUT
            else:
                tt_classes[ids[i]] = TTClass.DISCONNECTED

    return BowTiePartition(
        ids=ids,
        core=tuple(ids[i] for i in core_idx),
        labels=sections,
        tt_classes=tt_classes,
    )


@dataclass(frozen=True)
class BowTieRow:
    section: Section
    nodes: int
    tnc: int
    sh: int
    pc: int
    value_share: float
    control_share: Optional[float] = None


def bow_tie_table(
    partition: BowTiePartition,
    graph: OwnershipGraph,
    values: Optional[np.ndarray] = None,
    control: Optional[np.ndarray] = None,
) -> List[BowTieRow]:
    """Per-section role counts and percentage shares of value and control."""
    value_vector = graph.values() if values is None else np.asarray(values, dtype=float)
    roles = graph.roles()
    value_total = float(value_vector.sum())
    control_total = float(np.sum(control)) if control is not None else 0.0
    rows: List[BowTieRow] = []
    for section in SECTION_ORDER:
        mask = partition.mask(section)
        tally = Counter(role for role, flag in zip(roles, mask) if flag)
        value_share = 100.0 * float(value_vector[mask].sum()) / value_total if value_total > 0 else 0.0
        control_share: Optional[float] = None
        if control is not None:
            control_share = (
                100.0 * float(np.asarray(control)[mask].sum()) / control_total
                if control_total > 0
                else 0.0
            )
        rows.append(
            BowTieRow(
                section=section,
                nodes=int(mask.sum()),
                tnc=tally.get(Role.TNC, 0),
                sh=tally.get(Role.SH, 0),
                pc=tally.get(Role.PC, 0),
                value_share=value_share,
                control_share=control_share,
            )
        )
    return rows


CYCLE_PATTERNS = ("C3", "C3m1", "C3m2", "C3m3")
ROLE_PAIRS = ("TNC-TNC", "TNC-PC", "PC-PC", "SH-SH", "other")


@dataclass(frozen=True)
class MotifCensus:
    mutual_pairs: int
    triad_counts: Dict[str, int]
    role_pairs: Dict[str, int]

    def as_dict(self) -> Dict[str, object]:
        return {
            "mutual_pairs": self.mutual_pairs,
            "triad_counts": dict(self.triad_counts),
            "mutual_pairs_by_role": dict(self.role_pairs),
        }


def _role_pair(first: Role, second: Role) -> str:
    pair = {first, second}
    if pair == {Role.TNC}:
        return "TNC-TNC"
    if pair == {Role.TNC, Role.PC}:
        return "TNC-PC"
    if pair == {Role.PC}:
        return "PC-PC"
    if pair == {Role.SH}:
        return "SH-SH"
    return "other"


def cross_shareholding_census(graph: OwnershipGraph) -> MotifCensus:
    """Count mutual pairs and 3-node ownership cycles.

    Each node set containing a directed 3-cycle is counted once, classified
    by how many of its three links are reciprocated.
    """
    pattern = graph.weights.copy()
    pattern.data[:] = 1.0
    pattern.setdiag(0)
    pattern.eliminate_zeros()
    mutual = sp.triu(pattern.multiply(pattern.T), k=1).tocoo()
    roles = graph.roles()
    role_pairs = {name: 0 for name in ROLE_PAIRS}
    for i, j in zip(mutual.row, mutual.col):
        role_pairs[_role_pair(roles[i], roles[j])] += 1

    indptr, indices = pattern.indptr, pattern.indices
    successors: List[Set[int]] = [
        set(indices[indptr[i] : indptr[i + 1]].tolist()) for i in range(graph.n)
    ]
    counts = {name: 0 for name in CYCLE_PATTERNS}
    for a in range(graph.n):
        for b in successors[a]:
            if b <= a:
                continue
            for c in successors[b]:
                if c <= a or c == b or a not in successors[c]:
                    continue
                reciprocated = (
                    (a in successors[b]) + (b in successors[c]) + (c in successors[a])
                )
                # fully reciprocated triangles are walked in both orientations
                if reciprocated == 3 and c < b:
                    continue
                counts[CYCLE_PATTERNS[reciprocated]] += 1
    return MotifCensus(
        mutual_pairs=int(mutual.nnz), triad_counts=counts, role_pairs=role_pairs
    )


@dataclass(frozen=True)
class Ccdf:
    """Empirical complementary CDF ``P(X >= x)`` over positive samples."""

    x: np.ndarray
    p: np.ndarray

    def points(self) -> List[Tuple[float, float]]:
        return [(float(x), float(p)) for x, p in zip(self.x, self.p)]


def ccdf(samples: Iterable[float]) -> Ccdf:
    data = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float)
    data = np.sort(data[data > 0])
    if data.size == 0:
        return Ccdf(np.empty(0), np.empty(0))
    unique, first = np.unique(data, return_index=True)
    return Ccdf(unique, (data.size - first) / data.size)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    stderr: float
    x_min: float
    n_tail: int


def fit_power_law(samples: Iterable[float], x_min: float) -> PowerLawFit:
    """Continuous maximum-likelihood (Hill) estimate of a power-law tail.

    ``alpha`` is the exponent of the density ``p(x) ~ x^-alpha`` for
    ``x >= x_min``; ``stderr = (alpha - 1) / sqrt(n)``.
    """
    if not x_min > 0:
        raise PowerLawFitError(PowerLawFitError.BAD_XMIN, f"x_min must be positive, got {x_min}")
    data = np.asarray(samples if isinstance(samples, np.ndarray) else list(samples), dtype=float)
    tail = data[data >= x_min]
    if tail.size < MIN_TAIL_SAMPLES:
        raise PowerLawFitError(
            PowerLawFitError.TOO_FEW_SAMPLES,
            f"{tail.size} samples >= x_min, need {MIN_TAIL_SAMPLES}",
        )
    log_sum = float(np.sum(np.log(tail / x_min)))
    if log_sum <= 0:
        raise PowerLawFitError(
            PowerLawFitError.TOO_DEGENERATE, "all tail samples equal x_min"
        )
    alpha = 1.0 + tail.size / log_sum
    return PowerLawFit(
        alpha=alpha,
        stderr=(alpha - 1.0) / math.sqrt(tail.size),
        x_min=float(x_min),
        n_tail=int(tail.size),
    )


@dataclass(frozen=True)
class DistributionSummary:
    in_degree: np.ndarray
    out_degree: np.ndarray
    strength: np.ndarray
    ccdfs: Dict[str, Ccdf]
    fits: Dict[str, PowerLawFit] = field(default_factory=dict)
    fit_errors: Dict[str, str] = field(default_factory=dict)


DISTRIBUTION_QUANTITIES = ("in_degree", "out_degree", "strength")


def degree_strength_stats(
    graph: OwnershipGraph, x_min: Optional[float] = None
) -> DistributionSummary:
    """Degree and strength samples, their CCDFs and optional tail fits.

    Zero-valued samples are kept in the per-node arrays but excluded from the
    CCDF support.
    """
    samples = {
        "in_degree": graph.in_degree().astype(float),
        "out_degree": graph.out_degree().astype(float),
        "strength": graph.out_strength(),
    }
    fits: Dict[str, PowerLawFit] = {}
    fit_errors: Dict[str, str] = {}
    if x_min is not None:
        for name in DISTRIBUTION_QUANTITIES:
            try:
                fits[name] = fit_power_law(samples[name], x_min)
            except PowerLawFitError as exc:
                fit_errors[name] = exc.code
                logger.info("no power-law fit for %s: %s", name, exc)
    return DistributionSummary(
        in_degree=samples["in_degree"].astype(np.int64),
        out_degree=samples["out_degree"].astype(np.int64),
        strength=samples["strength"],
        ccdfs={name: ccdf(samples[name]) for name in DISTRIBUTION_QUANTITIES},
        fits=fits,
        fit_errors=fit_errors,
    )


__all__ = [
    "BowTiePartition",
    "BowTieRow",
    "Ccdf",
    "ComponentPartition",
    "DistributionSummary",
    "MotifCensus",
    "PowerLawFit",
    "PowerLawFitError",
    "SccSet",
    "SccSummary",
    "Section",
    "TTClass",
    "TopologyError",
    "adjacency",
    "bfs_layers",
    "bow_tie",
    "bow_tie_table",
    "ccdf",
    "cross_shareholding_census",
    "degree_strength_stats",
    "fit_power_law",
    "reachable",
    "scc_size_summary",
    "strongly_connected_components",
    "weakly_connected_components",
]
