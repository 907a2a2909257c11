"""Concentration curves, the eta* index, holder rankings and group shares."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .engine import ControlResult, EngineError, Method, compute_network_value
from .graph import OwnershipGraph, Role, node_sort_key
from .models import ControlModel, direct_control
from .solver import SolverError, SolverOptions
from .topology import BowTiePartition

logger = logging.getLogger(__name__)

THETA_SLACK = 1e-12
OTHER_GROUP = "OTHER"


class ConcentrationError(RuntimeError):
    """Raised when a concentration measure is undefined for the input."""


class CurveKey(str, Enum):
    CNET = "cnet"
    VNET = "vnet"
    VALUE = "value"


@dataclass(frozen=True, eq=False)
class ConcentrationCurve:
    """Actors sorted by decreasing key; point k is ``(k / N, top-k share)``."""

    ids: Tuple[str, ...]
    keys: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    total: float
    key: CurveKey

    @property
    def size(self) -> int:
        return len(self.ids)

    def points(self) -> List[Tuple[float, float]]:
        return [(float(e), float(t)) for e, t in zip(self.eta, self.theta)]


@dataclass(frozen=True)
class EtaStar:
    theta: float
    discrete: float
    interpolated: float
    holders: int

    def as_dict(self) -> Dict[str, float]:
        return {
            "theta": self.theta,
            "eta_star_discrete": self.discrete,
            "eta_star_interp": self.interpolated,
            "top_holders": self.holders,
        }


def _ordered(ids: Sequence[str], keys: np.ndarray) -> np.ndarray:
    by_id = {node_id: rank for rank, node_id in enumerate(sorted(ids, key=node_sort_key))}
    tiebreak = np.array([by_id[node_id] for node_id in ids], dtype=np.int64)
    return np.lexsort((tiebreak, -keys))


def concentration_curve(
    values: Mapping[str, float], key: CurveKey = CurveKey.CNET
) -> ConcentrationCurve:
    """Lorenz-like curve over every actor in ``values``.

    The denominator is the sum of the key over all supplied actors; ties in
    the ordering are broken by NodeId.
    """
    ids = list(values)
    keys = np.array([float(values[node_id]) for node_id in ids], dtype=np.float64)
    if keys.size == 0 or not np.any(keys > 0):
        raise ConcentrationError("no actor has a positive value, the curve is undefined")
    if np.any(keys < 0):
        keys = np.where(keys < 0, 0.0, keys)
    order = _ordered(ids, keys)
    sorted_keys = keys[order]
    total = float(sorted_keys.sum())
    theta = np.cumsum(sorted_keys) / total
    theta[-1] = 1.0
    eta = np.arange(1, keys.size + 1, dtype=np.float64) / keys.size
    return ConcentrationCurve(
        ids=tuple(ids[i] for i in order),
        keys=sorted_keys,
        eta=eta,
        theta=theta,
        total=total,
        key=CurveKey(key),
    )


def _check_theta(theta: float) -> None:
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")


def eta_star(curve: ConcentrationCurve, theta: float = 0.8) -> EtaStar:
    """Smallest fraction of top actors holding at least ``theta`` of the total.

    The interpolated variant reads the crossing off the straight segment
    between the previous curve point (or the origin) and the first point at
    or above ``theta``.
    """
    _check_theta(theta)
    k = int(np.searchsorted(curve.theta, theta - THETA_SLACK, side="left"))
    k = min(k, curve.size - 1)
    eta_hi, theta_hi = float(curve.eta[k]), float(curve.theta[k])
    eta_lo, theta_lo = (0.0, 0.0) if k == 0 else (float(curve.eta[k - 1]), float(curve.theta[k - 1]))
    if theta_hi > theta_lo:
        fraction = min(1.0, max(0.0, (theta - theta_lo) / (theta_hi - theta_lo)))
    else:
        fraction = 1.0
    return EtaStar(
        theta=float(theta),
        discrete=eta_hi,
        interpolated=eta_lo + fraction * (eta_hi - eta_lo),
        holders=k + 1,
    )


def top_holder_set(curve: ConcentrationCurve, theta: float = 0.8) -> FrozenSet[str]:
    """Actors that make up the discrete eta* group."""
    star = eta_star(curve, theta)
    return frozenset(curve.ids[: star.holders])


def select_universe(
    result: ControlResult,
    key: CurveKey,
    universe: str = "positive",
    graph: Optional[OwnershipGraph] = None,
) -> Dict[str, float]:
    """Actors counted on the eta axis.

    ``positive`` keeps actors with a positive key, ``all`` keeps every node
    and a comma-separated role list (``TNC,SH``) keeps nodes of those roles.
    """
    vector = result.key_vector(CurveKey(key).value)
    if universe == "all":
        mask = np.ones(vector.size, dtype=bool)
    elif universe == "positive":
        mask = vector > 0
    else:
        if graph is None:
            raise ConcentrationError("a role universe needs the graph's node roles")
        try:
            wanted = {Role(name.strip().upper()) for name in universe.split(",") if name.strip()}
        except ValueError as exc:
            raise ConcentrationError(f"unknown role in universe '{universe}'") from exc
        mask = np.array([role in wanted for role in graph.roles()], dtype=bool)
    return {
        node_id: float(vector[i]) for i, node_id in enumerate(result.ids) if mask[i]
    }


@dataclass(frozen=True)
class RankRow:
    rank: int
    id: str
    country: str
    sector: str
    role: str
    section: str
    key_value: float
    cumulative_pct: float


@dataclass(frozen=True)
class HolderRanking:
    key: CurveKey
    total: float
    rows: Tuple[RankRow, ...]


def rank_holders(
    result: ControlResult,
    metadata: Optional[OwnershipGraph] = None,
    top_n: int = 50,
    *,
    key: CurveKey = CurveKey.CNET,
    partition: Optional[BowTiePartition] = None,
) -> HolderRanking:
    """Top ``top_n`` actors by key with their cumulative share of the total."""
    if top_n < 1:
        raise ValueError(f"top_n must be at least 1, got {top_n}")
    vector = result.key_vector(CurveKey(key).value)
    total = float(vector[vector > 0].sum())
    if total <= 0:
        raise ConcentrationError("no actor has a positive value, nothing to rank")
    order = _ordered(result.ids, vector)
    labels = partition.as_mapping() if partition is not None else {}
    rows: List[RankRow] = []
    running = 0.0
    for position in order[:top_n]:
        value = float(vector[position])
        if value <= 0:
            break
        node_id = result.ids[position]
        running += value
        record = metadata.record(node_id) if metadata is not None and node_id in metadata else None
        rows.append(
            RankRow(
                rank=len(rows) + 1,
                id=node_id,
                country=(record.country or "") if record else "",
                sector=(record.sector or "") if record else "",
                role=record.role.value if record else "",
                section=labels.get(node_id, ""),
                key_value=value,
                cumulative_pct=100.0 * running / total,
            )
        )
    return HolderRanking(key=CurveKey(key), total=total, rows=tuple(rows))


@dataclass(frozen=True)
class GroupShare:
    label: str
    count: int
    total: float
    share_pct: float
    top_count: Optional[int] = None
    p_top: Optional[float] = None


def group_shares(
    result: ControlResult,
    grouping: Mapping[str, str],
    key: CurveKey = CurveKey.CNET,
    top_holders: Optional[Iterable[str]] = None,
) -> List[GroupShare]:
    """Per-label member counts and share of the total key.

    Actors absent from ``grouping`` fall into ``OTHER``. Given a top-holder
    set, each row also carries the probability that a member is a top holder.
    """
    vector = result.key_vector(CurveKey(key).value)
    top = frozenset(top_holders) if top_holders is not None else None
    counts: Dict[str, int] = {}
    totals: Dict[str, float] = {}
    tops: Dict[str, int] = {}
    for i, node_id in enumerate(result.ids):
        label = grouping.get(node_id) or OTHER_GROUP
        counts[label] = counts.get(label, 0) + 1
        totals[label] = totals.get(label, 0.0) + float(vector[i])
        if top is not None and node_id in top:
            tops[label] = tops.get(label, 0) + 1
    grand = math.fsum(totals.values())
    rows = []
    for label in sorted(counts):
        share = 100.0 * totals[label] / grand if grand > 0 else 0.0
        rows.append(
            GroupShare(
                label=label,
                count=counts[label],
                total=totals[label],
                share_pct=share,
                top_count=tops.get(label, 0) if top is not None else None,
                p_top=tops.get(label, 0) / counts[label] if top is not None else None,
            )
        )
    return rows


@dataclass(frozen=True)
class ModelComparison:
    model: str
    total_network_control: float
    eta_star: Optional[EtaStar]
    error: str = ""


def compare_models(
    graph: OwnershipGraph,
    values: Mapping[str, float],
    models: Sequence[ControlModel],
    method: Method = Method.STAGED,
    theta: float = 0.8,
    options: Optional[SolverOptions] = None,
) -> List[ModelComparison]:
    """Concentration of network control under several control models.

    A model whose system cannot be solved is reported with its error instead
    of aborting the comparison. A final ``value`` row ranks actors by their
    intrinsic value alone.
    """
    _check_theta(theta)
    rows: List[ModelComparison] = []
    for model in models:
        try:
            result = compute_network_value(direct_control(graph, model), values, method, options)
            curve = concentration_curve(select_universe(result, CurveKey.CNET))
        except (EngineError, SolverError, ConcentrationError) as exc:
            logger.warning("model %s skipped: %s", model.label, exc)
            rows.append(ModelComparison(model.label, 0.0, None, str(exc)))
            continue
        rows.append(
            ModelComparison(
                model=model.label,
                total_network_control=float(result.c_net.sum()),
                eta_star=eta_star(curve, theta),
            )
        )
    intrinsic = {
        node_id: float(values[node_id])
        for node_id in graph.ids
        if float(values.get(node_id, 0.0)) > 0
    }
    try:
        value_star: Optional[EtaStar] = eta_star(concentration_curve(intrinsic, CurveKey.VALUE), theta)
        rows.append(ModelComparison("value", 0.0, value_star))
    except ConcentrationError as exc:
        rows.append(ModelComparison("value", 0.0, None, str(exc)))
    return rows
