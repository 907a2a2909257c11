"""Ownership network types, CSV ingestion and structural validation."""

from __future__ import annotations

import contextlib
import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import (
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    TextIO,
    Tuple,
    Union,
)

import numpy as np
import scipy.sparse as sp

from .log import log_event

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-6

NODE_HEADER = ("id", "role", "value", "country", "sector")
EDGE_HEADER = ("src", "dst", "weight")

TableSource = Union[Path, str, TextIO]


class Role(str, Enum):
    TNC = "TNC"
    SH = "SH"
    PC = "PC"
    UNKNOWN = "UNKNOWN"


class GraphLoadError(RuntimeError):
    """Raised when a nodes or edges table cannot be ingested."""

    def __init__(self, message: str, source: str = "", line: Optional[int] = None):
        self.source = source
        self.line = line
        location = source
        if line is not None:
            location = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)


def node_sort_key(node_id: str) -> Tuple[int, int, str]:
    """Total order on node ids: ASCII integers numerically first, then strings.

    Numeric ids that compare equal as integers ("7", "07") fall back to the
    raw text.
    """
    text = str(node_id)
    if text.isascii() and text.isdigit():
        return (0, int(text), text)
    return (1, 0, text)


@dataclass(frozen=True)
class NodeRecord:
    id: str
    role: Role = Role.UNKNOWN
    value: float = 0.0
    country: Optional[str] = None
    sector: Optional[str] = None


@dataclass(frozen=True)
class OwnershipEdge:
    src: str
    dst: str
    weight: float


@dataclass(frozen=True)
class Issue:
    code: str
    subject: str
    message: str

    def as_dict(self) -> Dict[str, str]:
        return {"code": self.code, "subject": self.subject, "message": self.message}


@dataclass(frozen=True)
class LoadOptions:
    relaxed: bool = False
    renormalize_columns: bool = False


@dataclass(frozen=True, eq=False)
class OwnershipGraph:
    """Immutable sparse ownership network.

    ``weights`` is an n x n CSR matrix with ``weights[i, j] = W_ij``, the share
    of node j held by node i. Rows and columns follow the order of ``nodes``,
    which is sorted by :func:`node_sort_key`.
    """

    nodes: Tuple[NodeRecord, ...]
    weights: sp.csr_matrix
    relaxed: bool = False
    load_warnings: Tuple[Issue, ...] = ()
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)
    _columns: sp.csc_matrix = field(init=False, repr=False, compare=False)
    _ids: Tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index = {record.id: position for position, record in enumerate(self.nodes)}
        if len(index) != len(self.nodes):
            raise GraphLoadError("duplicate node id in graph construction")
        weights = sp.csr_matrix(self.weights, dtype=np.float64)
        weights.sum_duplicates()
        weights.sort_indices()
        weights.eliminate_zeros()
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_columns", weights.tocsc())
        object.__setattr__(self, "_ids", tuple(record.id for record in self.nodes))

    @classmethod
    def from_edges(
        cls,
        nodes: Iterable[NodeRecord],
        edges: Iterable[OwnershipEdge],
        *,
        relaxed: bool = False,
        load_warnings: Sequence[Issue] = (),
    ) -> "OwnershipGraph":
        records = sorted(nodes, key=lambda record: node_sort_key(record.id))
        index = {record.id: position for position, record in enumerate(records)}
        rows: List[int] = []
        cols: List[int] = []
        data: List[float] = []
        for edge in edges:
            if edge.src not in index or edge.dst not in index:
                raise GraphLoadError(
                    f"edge {edge.src}->{edge.dst} references an unknown node"
                )
            rows.append(index[edge.src])
            cols.append(index[edge.dst])
            data.append(float(edge.weight))
        n = len(records)
        weights = sp.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=np.float64)
        return cls(
            nodes=tuple(records),
            weights=weights,
            relaxed=relaxed,
            load_warnings=tuple(load_warnings),
        )

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def ids(self) -> Tuple[str, ...]:
        return self._ids

    @property
    def edge_count(self) -> int:
        return int(self.weights.nnz)

    @property
    def columns(self) -> sp.csc_matrix:
        """Column-major copy of ``weights`` (in-edge index)."""
        return self._columns

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._index

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError as exc:
            raise KeyError(f"unknown node {node_id!r}") from exc

    def indices_of(self, node_ids: Iterable[str]) -> np.ndarray:
        return np.array([self.index_of(node_id) for node_id in node_ids], dtype=np.int64)

    def record(self, node_id: str) -> NodeRecord:
        return self.nodes[self.index_of(node_id)]

    def edges(self) -> Iterator[OwnershipEdge]:
        """Yield edges sorted by (src, dst) in node order."""
        coo = self.weights.tocoo()
        order = np.lexsort((coo.col, coo.row))
        ids = self.ids
        for position in order:
            yield OwnershipEdge(
                ids[coo.row[position]], ids[coo.col[position]], float(coo.data[position])
            )

    def values(self) -> np.ndarray:
        return np.array([record.value for record in self.nodes], dtype=np.float64)

    def roles(self) -> Tuple[Role, ...]:
        return tuple(record.role for record in self.nodes)

    def in_weight_sums(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=0)).ravel()

    def out_strength(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def out_degree(self) -> np.ndarray:
        return np.diff(self.weights.indptr).astype(np.int64)

    def in_degree(self) -> np.ndarray:
        return np.diff(self._columns.indptr).astype(np.int64)

    def successors(self, node_id: str) -> List[str]:
        row = self.index_of(node_id)
        start, end = self.weights.indptr[row], self.weights.indptr[row + 1]
        ids = self.ids
        return [ids[col] for col in self.weights.indices[start:end]]

    def predecessors(self, node_id: str) -> List[str]:
        col = self.index_of(node_id)
        start, end = self._columns.indptr[col], self._columns.indptr[col + 1]
        ids = self.ids
        return [ids[row] for row in sorted(self._columns.indices[start:end])]

    def value_vector(self, overrides: Optional[Mapping[str, float]] = None) -> np.ndarray:
        """Intrinsic values in node order; ``overrides`` replace node values."""
        values = self.values()
        if overrides:
            for node_id, value in overrides.items():
                if node_id in self._index:
                    values[self._index[node_id]] = float(value)
        if np.any(values < 0):
            raise ValueError("intrinsic values must be non-negative")
        return values

    def subgraph(self, node_ids: Iterable[str]) -> "OwnershipGraph":
        """Induced subgraph on ``node_ids`` (all edges among retained nodes)."""
        keep = np.unique(self.indices_of(node_ids))
        weights = self.weights[keep][:, keep]
        return OwnershipGraph(
            nodes=tuple(self.nodes[position] for position in keep),
            weights=weights,
            relaxed=self.relaxed,
        )

    def same_structure(self, other: "OwnershipGraph") -> bool:
        """True when node records and weights (bit for bit) are identical."""
        if self.nodes != other.nodes or self.weights.shape != other.weights.shape:
            return False
        return (
            np.array_equal(self.weights.indptr, other.weights.indptr)
            and np.array_equal(self.weights.indices, other.weights.indices)
            and np.array_equal(self.weights.data, other.weights.data)
        )

    def with_roles(self, roles: Mapping[str, Role]) -> "OwnershipGraph":
        nodes = tuple(
            replace(record, role=roles[record.id]) if record.id in roles else record
            for record in self.nodes
        )
        return OwnershipGraph(
            nodes=nodes,
            weights=self.weights,
            relaxed=self.relaxed,
            load_warnings=self.load_warnings,
        )


@dataclass(frozen=True)
class ValidationReport:
    errors: Tuple[Issue, ...] = ()
    warnings: Tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> Dict[str, int]:
        counts: Dict[str, int] = {"errors": len(self.errors), "warnings": len(self.warnings)}
        for issue in self.errors + self.warnings:
            counts[issue.code] = counts.get(issue.code, 0) + 1
        return counts

    def as_dict(self) -> Dict[str, object]:
        return {
            "errors": [issue.as_dict() for issue in self.errors],
            "warnings": [issue.as_dict() for issue in self.warnings],
            "summary": self.summary(),
        }


@contextlib.contextmanager
def _open_table(source: TableSource) -> Iterator[Tuple[TextIO, str]]:
    if isinstance(source, (str, Path)) and not isinstance(source, io.IOBase):
        path = Path(source)
        try:
            with path.open("r", encoding="utf-8-sig", newline="") as handle:
                yield handle, str(path)
        except FileNotFoundError as exc:
            raise GraphLoadError(f"table not found: {path}") from exc
        return
    yield source, getattr(source, "name", "<stream>")


def _check_header(reader: csv.DictReader, required: Sequence[str], name: str) -> None:
    header = [column.strip() for column in (reader.fieldnames or [])]
    missing = [column for column in required if column not in header]
    if missing:
        raise GraphLoadError(f"missing column(s) {', '.join(missing)}", name, 1)
    reader.fieldnames = header


def _check_width(row: Mapping[Optional[str], object], name: str, line: int) -> None:
    # DictReader collects cells beyond the header under the None key
    extra = row.get(None)
    if extra and any(str(cell).strip() for cell in extra):
        raise GraphLoadError(
            f"row has {len(extra)} cell(s) more than the header", name, line
        )


def _cell(row: Mapping[str, Optional[str]], column: str) -> str:
    value = row.get(column)
    return value.strip() if isinstance(value, str) else ""


def _parse_float(text: str, what: str, name: str, line: int) -> float:
    try:
        number = float(text)
    except ValueError as exc:
        raise GraphLoadError(f"{what} '{text}' is not a number", name, line) from exc
    if not math.isfinite(number):
        raise GraphLoadError(f"{what} '{text}' is not finite", name, line)
    return number


def read_nodes(source: TableSource) -> List[NodeRecord]:
    records: List[NodeRecord] = []
    seen: Dict[str, int] = {}
    with _open_table(source) as (handle, name):
        reader = csv.DictReader(handle)
        _check_header(reader, ("id",), name)
        for row in reader:
            line = reader.line_num
            _check_width(row, name, line)
            node_id = _cell(row, "id")
            if not node_id:
                if not any(_cell(row, column) for column in row if column):
                    continue
                raise GraphLoadError("row has no id", name, line)
            if node_id in seen:
                raise GraphLoadError(
                    f"duplicate node id {node_id!r} (first on line {seen[node_id]})",
                    name,
                    line,
                )
            role_text = _cell(row, "role").upper()
            if role_text and role_text not in (Role.TNC.value, Role.SH.value, Role.PC.value):
                raise GraphLoadError(f"unknown role '{role_text}'", name, line)
            value_text = _cell(row, "value")
            value = _parse_float(value_text, "value", name, line) if value_text else 0.0
            if value < 0:
                raise GraphLoadError(f"negative value {value}", name, line)
            seen[node_id] = line
            records.append(
                NodeRecord(
                    id=node_id,
                    role=Role(role_text) if role_text else Role.UNKNOWN,
                    value=value,
                    country=_cell(row, "country").upper() or None,
                    sector=_cell(row, "sector") or None,
                )
            )
    return records


def _read_edge_rows(
    source: TableSource, options: LoadOptions, warnings: List[Issue]
) -> Dict[Tuple[str, str], float]:
    totals: Dict[Tuple[str, str], float] = {}
    first_line: Dict[Tuple[str, str], int] = {}
    with _open_table(source) as (handle, name):
        reader = csv.DictReader(handle)
        _check_header(reader, EDGE_HEADER, name)
        for row in reader:
            line = reader.line_num
            _check_width(row, name, line)
            src, dst, weight_text = (_cell(row, column) for column in EDGE_HEADER)
            if not (src or dst or weight_text):
                continue
            if not src or not dst or not weight_text:
                raise GraphLoadError("expected src,dst,weight", name, line)
            weight = _parse_float(weight_text, "weight", name, line)
            if weight < 0:
                raise GraphLoadError(f"negative weight {weight}", name, line)
            if weight > 1:
                if not options.relaxed:
                    raise GraphLoadError(f"weight {weight} outside [0, 1]", name, line)
                warnings.append(
                    Issue("WEIGHT_CLIPPED", f"{src}->{dst}", f"weight {weight} clipped to 1")
                )
                weight = 1.0
            if weight == 0:
                warnings.append(Issue("ZERO_WEIGHT", f"{src}->{dst}", "zero weight dropped"))
                continue
            if src == dst:
                warnings.append(
                    Issue("SELF_LOOP", f"{src}->{dst}", "self-loop (treasury shares) dropped")
                )
                continue
            key = (src, dst)
            if key in totals:
                warnings.append(
                    Issue(
                        "DUPLICATE_EDGE",
                        f"{src}->{dst}",
                        f"duplicate row summed with line {first_line[key]}",
                    )
                )
                totals[key] += weight
            else:
                totals[key] = weight
                first_line[key] = line
            if totals[key] > 1 + WEIGHT_TOLERANCE and not options.relaxed:
                raise GraphLoadError(
                    f"summed weight {totals[key]} for {src}->{dst} exceeds 1", name, line
                )
    return totals


def load_graph(
    nodes_source: Optional[TableSource],
    edges_source: TableSource,
    options: LoadOptions = LoadOptions(),
) -> OwnershipGraph:
    """Ingest a nodes table (optional) and an edges table into a graph.

    Duplicate (src, dst) rows are summed, self-loops dropped and nodes that
    only appear in edges are created with role UNKNOWN and value 0; each of
    these emits a warning kept on ``OwnershipGraph.load_warnings``.
    """
    warnings: List[Issue] = []
    records = read_nodes(nodes_source) if nodes_source is not None else []
    totals = _read_edge_rows(edges_source, options, warnings)

    known = {record.id for record in records}
    implicit = sorted(
        {node for pair in totals for node in pair} - known, key=node_sort_key
    )
    for node_id in implicit:
        warnings.append(
            Issue("IMPLICIT_NODE", node_id, "node created from edges with role UNKNOWN")
        )
        records.append(NodeRecord(id=node_id))

    edges = [OwnershipEdge(src, dst, weight) for (src, dst), weight in totals.items()]
    graph = OwnershipGraph.from_edges(records, edges, relaxed=options.relaxed)
    if options.renormalize_columns:
        graph = _renormalize_columns(graph, warnings)

    for issue in warnings:
        log_event(logger, logging.WARNING, issue.message, code=issue.code, subject=issue.subject)
    return replace_warnings(graph, warnings)


def replace_warnings(graph: OwnershipGraph, warnings: Sequence[Issue]) -> OwnershipGraph:
    return OwnershipGraph(
        nodes=graph.nodes,
        weights=graph.weights,
        relaxed=graph.relaxed,
        load_warnings=tuple(warnings),
    )


def _renormalize_columns(graph: OwnershipGraph, warnings: List[Issue]) -> OwnershipGraph:
    sums = graph.in_weight_sums()
    excess = np.flatnonzero(sums > 1 + WEIGHT_TOLERANCE)
    if excess.size == 0:
        return graph
    scale = np.ones(graph.n)
    scale[excess] = 1.0 / sums[excess]
    ids = graph.ids
    for column in excess:
        warnings.append(
            Issue(
                "COLUMN_RENORMALIZED",
                ids[column],
                f"in-weight sum {sums[column]:.6g} rescaled to 1",
            )
        )
    weights = graph.weights @ sp.diags(scale)
    return OwnershipGraph(nodes=graph.nodes, weights=weights, relaxed=graph.relaxed)


def validate(graph: OwnershipGraph) -> ValidationReport:
    """Report over-full columns, isolated nodes and zero-value TNCs."""
    errors: List[Issue] = []
    warnings: List[Issue] = list(graph.load_warnings)
    ids = graph.ids
    sums = graph.in_weight_sums()
    for column in np.flatnonzero(sums > 1 + WEIGHT_TOLERANCE):
        issue = Issue(
            "IN_SUM_EXCEEDS",
            ids[column],
            f"in-weight sum {sums[column]:.9g} exceeds 1",
        )
        (warnings if graph.relaxed else errors).append(issue)
    degree = graph.in_degree() + graph.out_degree()
    for position in np.flatnonzero(degree == 0):
        warnings.append(Issue("ISOLATED_NODE", ids[position], "node has no edges"))
    for record in graph.nodes:
        if record.role is Role.TNC and record.value == 0:
            warnings.append(Issue("ZERO_VALUE_TNC", record.id, "TNC has zero value"))
    return ValidationReport(errors=tuple(errors), warnings=tuple(warnings))


def _format_weight(value: float) -> str:
    return repr(float(value))


def write_graph(graph: OwnershipGraph, nodes_path: Path, edges_path: Path) -> None:
    """Serialize ``graph`` as the nodes/edges CSV pair in deterministic order."""
    with nodes_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(NODE_HEADER)
        for record in graph.nodes:
            writer.writerow(
                [
                    record.id,
                    "" if record.role is Role.UNKNOWN else record.role.value,
                    _format_weight(record.value),
                    record.country or "",
                    record.sector or "",
                ]
            )
    with edges_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(EDGE_HEADER)
        for edge in graph.edges():
            writer.writerow([edge.src, edge.dst, _format_weight(edge.weight)])


def read_values(source: TableSource) -> Dict[str, float]:
    """Read an ``id,value`` table of intrinsic values."""
    values: Dict[str, float] = {}
    with _open_table(source) as (handle, name):
        reader = csv.DictReader(handle)
        _check_header(reader, ("id", "value"), name)
        for row in reader:
            _check_width(row, name, reader.line_num)
            node_id = _cell(row, "id")
            if not node_id:
                continue
            value = _parse_float(_cell(row, "value") or "0", "value", name, reader.line_num)
            if value < 0:
                raise GraphLoadError(f"negative value {value}", name, reader.line_num)
            values[node_id] = value
    return values


def read_ids(source: TableSource) -> List[str]:
    """Node ids from the first column, one per line; an ``id`` header is optional."""
    ids: List[str] = []
    with _open_table(source) as (handle, _):
        for raw in handle:
            node_id = raw.split(",")[0].strip()
            if not node_id or node_id.startswith("#"):
                continue
            if not ids and node_id.lower() == "id":
                continue
            ids.append(node_id)
    return ids
