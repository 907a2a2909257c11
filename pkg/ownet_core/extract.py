"""TNC selection and extraction of the ownership neighbourhood around them."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Mapping, Optional

import numpy as np

from .graph import (
    GraphLoadError,
    OwnershipGraph,
    Role,
    TableSource,
    _cell,
    _check_header,
    _open_table,
    node_sort_key,
)
from .log import log_event
from .topology import frontier_successors, reachable

logger = logging.getLogger(__name__)

DEFAULT_MIN_SHARE = 0.10
DEFAULT_MISSING_COUNTRY_FRACTION = 0.05

SEED = "seed"
DOWNSTREAM = "downstream"
UPSTREAM = "upstream"
PROVENANCE_ORDER = (SEED, DOWNSTREAM, UPSTREAM)

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"", "0", "false", "no", "n", "f"}


class ExtractionError(RuntimeError):
    """Raised when TNC selection or extraction cannot proceed."""


@dataclass(frozen=True)
class TncSelectionInput:
    listed: FrozenSet[str] = frozenset()
    ultimate_owner: Mapping[str, str] = field(default_factory=dict)


def read_selection_input(source: TableSource) -> TncSelectionInput:
    """Read ``id,listed,ultimate_owner`` rows."""
    listed = set()
    owners: Dict[str, str] = {}
    with _open_table(source) as (handle, name):
        reader = csv.DictReader(handle)
        _check_header(reader, ("id",), name)
        for row in reader:
            node_id = _cell(row, "id")
            if not node_id:
                continue
            flag = _cell(row, "listed").lower()
            if flag in _TRUE:
                listed.add(node_id)
            elif flag not in _FALSE:
                raise GraphLoadError(f"listed flag '{flag}' is not a boolean", name, reader.line_num)
            owner = _cell(row, "ultimate_owner")
            if owner:
                owners[node_id] = owner
    return TncSelectionInput(listed=frozenset(listed), ultimate_owner=owners)


def select_tncs(
    graph: OwnershipGraph,
    selection_input: Optional[TncSelectionInput] = None,
    min_share: float = DEFAULT_MIN_SHARE,
    max_missing_country: float = DEFAULT_MISSING_COUNTRY_FRACTION,
) -> FrozenSet[str]:
    """Owners of at least ``min_share`` in companies of two or more countries.

    A selected owner whose ultimate owner is listed is replaced by that
    ultimate owner.
    """
    if not 0.0 < min_share <= 1.0:
        raise ValueError(f"min_share must lie in (0, 1], got {min_share}")
    selection_input = selection_input or TncSelectionInput()
    coo = graph.weights.tocoo()
    strong = coo.data >= min_share
    owners, owned = coo.row[strong], coo.col[strong]

    countries = [record.country for record in graph.nodes]
    considered = np.unique(owned)
    missing = [int(j) for j in considered if not countries[j]]
    if considered.size and len(missing) / considered.size > max_missing_country:
        sample = ", ".join(graph.ids[j] for j in missing[:5])
        raise ExtractionError(
            f"{len(missing)} of {considered.size} participated companies have no country"
            f" (limit {max_missing_country:.0%}): {sample}"
        )

    spread: Dict[int, set] = {}
    for i, j in zip(owners, owned):
        if countries[j]:
            spread.setdefault(int(i), set()).add(countries[j])
    selected = {graph.ids[i] for i, found in spread.items() if len(found) >= 2}

    seeds = set()
    for node_id in selected:
        owner = selection_input.ultimate_owner.get(node_id)
        if owner and owner != node_id and owner in selection_input.listed:
            if owner not in graph:
                raise ExtractionError(
                    f"ultimate owner {owner!r} of {node_id!r} is not in the graph"
                )
            seeds.add(owner)
        else:
            seeds.add(node_id)
    log_event(
        logger,
        logging.INFO,
        "TNCs selected",
        candidates=len(selected),
        seeds=len(seeds),
        min_share=min_share,
    )
    return frozenset(seeds)


@dataclass(frozen=True, eq=False)
class ExtractionResult:
    subgraph: OwnershipGraph
    roles: Dict[str, Role]
    provenance: Dict[str, FrozenSet[str]]

    def counts(self) -> Dict[str, int]:
        tally = Counter(role.value for role in self.roles.values())
        return {role.value: tally.get(role.value, 0) for role in (Role.TNC, Role.SH, Role.PC)}


def extract_tnc_network(
    graph: OwnershipGraph,
    seeds: Iterable[str],
    min_edge_weight: float = 0.0,
) -> ExtractionResult:
    """Downstream and upstream closure of ``seeds`` with role labels.

    Seeds become TNC, nodes reached downstream PC and nodes reaching a seed
    SH; a node reached both ways is PC. ``min_edge_weight`` restricts only the
    upstream walk.
    """
    seed_ids = sorted(set(seeds), key=node_sort_key)
    if not seed_ids:
        raise ExtractionError("seed set is empty")
    unknown = [node_id for node_id in seed_ids if node_id not in graph]
    if unknown:
        raise ExtractionError(f"seed(s) not in the graph: {', '.join(unknown[:5])}")
    seed_idx = graph.indices_of(seed_ids)

    forward = graph.weights
    backward = graph.columns.T.tocsr()
    if min_edge_weight > 0:
        backward = backward.copy()
        backward.data[backward.data < min_edge_weight] = 0.0
        backward.eliminate_zeros()
    down = reachable(forward, frontier_successors(forward, seed_idx))
    up = reachable(backward, frontier_successors(backward, seed_idx))
    is_seed = np.zeros(graph.n, dtype=bool)
    is_seed[seed_idx] = True
    keep = is_seed | down | up

    roles: Dict[str, Role] = {}
    provenance: Dict[str, FrozenSet[str]] = {}
    ids = graph.ids
    for i in np.flatnonzero(keep):
        flags = (is_seed[i], down[i], up[i])
        provenance[ids[i]] = frozenset(
            name for name, flag in zip(PROVENANCE_ORDER, flags) if flag
        )
        if is_seed[i]:
            roles[ids[i]] = Role.TNC
        elif down[i]:
            roles[ids[i]] = Role.PC
        else:
            roles[ids[i]] = Role.SH
    subgraph = graph.subgraph(roles).with_roles(roles)
    result = ExtractionResult(subgraph=subgraph, roles=roles, provenance=provenance)
    log_event(logger, logging.INFO, "ownership neighbourhood extracted", **result.counts())
    return result


def provenance_label(flags: FrozenSet[str]) -> str:
    return "+".join(name for name in PROVENANCE_ORDER if name in flags)


def write_roles(result: ExtractionResult, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("id", "role", "provenance"))
        for node_id in result.subgraph.ids:
            writer.writerow(
                (node_id, result.roles[node_id].value, provenance_label(result.provenance[node_id]))
            )
