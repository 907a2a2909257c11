"""Seeded synthetic ownership networks for tests, oracles and benchmarks.

Every generator draws from ``numpy.random.Generator(PCG64(seed))`` in a fixed
order, so a spec and seed always produce the same graph on every platform.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .graph import NodeRecord, OwnershipEdge, OwnershipGraph, Role
from .log import log_event

logger = logging.getLogger(__name__)

CORE_HOLDER_CAP = 0.45


class SynthError(RuntimeError):
    """Raised for a spec that cannot be generated."""


class SynthKind(str, Enum):
    DAG = "dag"
    BOWTIE = "bowtie"
    ER_WEIGHTED = "er"
    CHAIN = "chain"
    CYCLE = "cycle"


@dataclass(frozen=True)
class SynthSpec:
    kind: SynthKind
    n: int = 10
    density: float = 0.1
    in_size: int = 3
    core_size: int = 4
    out_size: int = 5
    tt_size: int = 0
    degree: int = 2
    core_degree: int = 2
    weight: Optional[float] = None
    min_column_sum: float = 0.3
    max_column_sum: float = 0.95
    value_sigma: float = 1.0
    seed: int = 0
    connected: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.min_column_sum <= self.max_column_sum < 1.0:
            raise SynthError("column sums must satisfy 0 < min <= max < 1")
        if self.weight is not None and not 0.0 < self.weight <= 1.0:
            raise SynthError(f"weight must lie in (0, 1], got {self.weight}")
        if not 0.0 <= self.density <= 1.0:
            raise SynthError(f"density must lie in [0, 1], got {self.density}")
        if self.degree < 1 or self.core_degree < 1:
            raise SynthError("degrees must be at least 1")
        if self.kind is SynthKind.BOWTIE:
            if self.core_size < 2:
                raise SynthError("a bow-tie core needs at least 2 nodes")
            if min(self.in_size, self.out_size, self.tt_size) < 0:
                raise SynthError("section sizes must be non-negative")
            if self.tt_size and not self.in_size:
                raise SynthError("tubes and tendrils hang off the IN section, which is empty")
        elif self.kind is SynthKind.CYCLE and self.n < 2:
            raise SynthError("a cycle needs at least 2 nodes")
        elif self.n < 1:
            raise SynthError("n must be at least 1")
        if self.kind in (SynthKind.DAG, SynthKind.ER_WEIGHTED):
            if self.connected and self.density == 0 and self.n > 1:
                raise SynthError("a connected graph cannot have density 0")

    @property
    def total_nodes(self) -> int:
        if self.kind is SynthKind.BOWTIE:
            return self.in_size + self.core_size + self.out_size + self.tt_size
        return self.n


Pairs = List[Tuple[int, int]]


def _sample_pairs(rng: np.random.Generator, n: int, density: float, acyclic: bool) -> np.ndarray:
    slots = n * (n - 1) // (2 if acyclic else 1)
    if slots == 0 or density == 0:
        return np.empty((0, 2), dtype=np.int64)
    count = int(rng.binomial(slots, density))
    src = rng.integers(0, n, size=count)
    dst = rng.integers(0, n, size=count)
    pairs = np.stack([src, dst], axis=1)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if acyclic:
        pairs = np.sort(pairs, axis=1)
    return pairs


def _spanning_pairs(rng: np.random.Generator, n: int) -> np.ndarray:
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    dst = np.arange(1, n)
    src = np.floor(rng.random(n - 1) * dst).astype(np.int64)
    return np.stack([src, dst], axis=1)


def _random_pairs(rng: np.random.Generator, spec: SynthSpec, acyclic: bool) -> np.ndarray:
    parts = [_sample_pairs(rng, spec.n, spec.density, acyclic)]
    if spec.connected:
        parts.append(_spanning_pairs(rng, spec.n))
    return np.concatenate(parts)


def _bowtie_pairs(rng: np.random.Generator, spec: SynthSpec) -> Tuple[np.ndarray, np.ndarray]:
    in_ids = np.arange(spec.in_size)
    core = np.arange(spec.core_size) + spec.in_size
    out_ids = np.arange(spec.out_size) + spec.in_size + spec.core_size
    tt_ids = np.arange(spec.tt_size) + spec.in_size + spec.core_size + spec.out_size
    pairs: Pairs = []

    m = core.size
    for k in range(m):
        pairs.append((core[k], core[(k + 1) % m]))
        for _ in range(spec.core_degree - 1):
            target = int(rng.integers(0, m - 1))
            target = target + 1 if target >= k else target
            pairs.append((core[k], core[target]))
    core_edges = len(pairs)

    for position, node in enumerate(in_ids):
        pairs.append((node, core[int(rng.integers(0, m))]))
        later = in_ids.size - position - 1
        for _ in range(spec.degree - 1):
            if later:
                pairs.append((node, in_ids[position + 1 + int(rng.integers(0, later))]))

    for position, node in enumerate(out_ids):
        pairs.append((core[int(rng.integers(0, m))], node))
        for _ in range(spec.degree - 1):
            if position:
                pairs.append((out_ids[int(rng.integers(0, position))], node))

    for node in tt_ids:
        pairs.append((in_ids[int(rng.integers(0, in_ids.size))], node))

    array = np.asarray(pairs, dtype=np.int64)
    is_core = np.zeros(array.shape[0], dtype=bool)
    is_core[:core_edges] = True
    return array, is_core


def _dedupe(pairs: np.ndarray, flags: Optional[np.ndarray] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    if pairs.size == 0:
        return pairs.reshape(0, 2), flags
    _, first = np.unique(pairs, axis=0, return_index=True)
    first = np.sort(first)
    return pairs[first], (flags[first] if flags is not None else None)


def _weights(
    rng: np.random.Generator,
    spec: SynthSpec,
    pairs: np.ndarray,
    n: int,
    core_edges: Optional[np.ndarray] = None,
) -> np.ndarray:
    dst = pairs[:, 1]
    targets = rng.uniform(spec.min_column_sum, spec.max_column_sum, size=n)
    if spec.weight is not None:
        weights = np.full(dst.size, spec.weight, dtype=np.float64)
        if dst.size and np.max(np.bincount(dst, minlength=n)) * spec.weight > 1.0 + 1e-12:
            raise SynthError(
                f"fixed weight {spec.weight} pushes an in-weight sum above 1"
            )
        return weights
    raw = rng.uniform(0.05, 1.0, size=dst.size)
    sums = np.bincount(dst, weights=raw, minlength=n)
    weights = raw * targets[dst] / np.where(sums > 0, sums, 1.0)
    if core_edges is not None:
        # every core cycle contains a descending link, and those stay below majority
        descending = core_edges & (pairs[:, 1] < pairs[:, 0])
        weights[descending] = np.minimum(weights[descending], CORE_HOLDER_CAP)
    return weights


def _roles(spec: SynthSpec, n: int) -> List[Role]:
    if spec.kind is not SynthKind.BOWTIE:
        return [Role.UNKNOWN] * n
    return (
        [Role.SH] * spec.in_size
        + [Role.TNC] * spec.core_size
        + [Role.PC] * (spec.out_size + spec.tt_size)
    )


def generate(spec: SynthSpec) -> OwnershipGraph:
    """Build the graph described by ``spec``; node ids are ``"1"`` to ``"n"``."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.total_nodes
    core_edges: Optional[np.ndarray] = None
    if spec.kind is SynthKind.CHAIN:
        pairs = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    elif spec.kind is SynthKind.CYCLE:
        pairs = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    elif spec.kind is SynthKind.DAG:
        pairs = _random_pairs(rng, spec, acyclic=True)
    elif spec.kind is SynthKind.ER_WEIGHTED:
        pairs = _random_pairs(rng, spec, acyclic=False)
    else:
        pairs, core_edges = _bowtie_pairs(rng, spec)
    pairs, core_edges = _dedupe(pairs.astype(np.int64), core_edges)
    weights = _weights(rng, spec, pairs, n, core_edges)
    values = rng.lognormal(mean=0.0, sigma=spec.value_sigma, size=n)

    ids = [str(position + 1) for position in range(n)]
    nodes = [
        NodeRecord(id=ids[i], role=role, value=float(values[i]))
        for i, role in enumerate(_roles(spec, n))
    ]
    edges = [
        OwnershipEdge(ids[src], ids[dst], float(weight))
        for (src, dst), weight in zip(pairs.tolist(), weights)
    ]
    graph = OwnershipGraph.from_edges(nodes, edges)
    log_event(
        logger,
        logging.DEBUG,
        "synthetic graph generated",
        kind=spec.kind.value,
        nodes=graph.n,
        edges=graph.edge_count,
        seed=spec.seed,
    )
    return graph
