"""End-to-end runs: ingestion, extraction, topology, control and reports.

Every artifact is written into a staging directory and published only when
all enabled stages succeed, so a failed run leaves no partial outputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from .concentration import (
    ConcentrationError,
    CurveKey,
    compare_models,
    concentration_curve,
    eta_star,
    group_shares,
    rank_holders,
    select_universe,
    top_holder_set,
)
from .config import ConfigError, RunConfig
from .engine import (
    ControlResult,
    EngineError,
    Method,
    compute_network_value,
    partition_matches,
)
from .extract import (
    ExtractionError,
    extract_tnc_network,
    read_selection_input,
    select_tncs,
    write_roles,
)
from .graph import (
    GraphLoadError,
    LoadOptions,
    OwnershipGraph,
    load_graph,
    read_ids,
    read_values,
    validate,
    write_graph,
)
from .log import log_event
from .manifest import write_manifest
from .models import ControlMatrix, ControlModel, ModelKind, check_frobenius_condition, direct_control
from .paths import OutputPaths, staged_outputs
from .solver import SolverError, SolverOptions
from .tables import write_csv, write_json
from .topology import (
    DISTRIBUTION_QUANTITIES,
    BowTiePartition,
    PowerLawFitError,
    SccSet,
    TopologyError,
    bow_tie,
    bow_tie_table,
    ccdf,
    cross_shareholding_census,
    degree_strength_stats,
    scc_size_summary,
    strongly_connected_components,
    weakly_connected_components,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2

AUTO_SEEDS = "auto"


class ValidationFailed(RuntimeError):
    """Raised when the validation stage finds errors; aborts the run."""


@dataclass
class RunContext:
    config: RunConfig
    outputs: OutputPaths
    graph: OwnershipGraph
    inputs: Dict[str, Optional[Path]] = field(default_factory=dict)
    scc_set: Optional[SccSet] = None
    partition: Optional[BowTiePartition] = None
    control: Optional[ControlMatrix] = None
    result: Optional[ControlResult] = None
    summary: Dict[str, object] = field(default_factory=dict)

    @property
    def precision(self) -> str:
        return self.config.precision

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            tolerance=self.config.tolerance,
            max_iterations=self.config.max_iterations,
            dense_limit=self.config.dense_limit,
        )


@dataclass(frozen=True)
class PipelineResult:
    exit_code: int
    artifacts: List[Path] = field(default_factory=list)
    summary: Dict[str, object] = field(default_factory=dict)
    error: str = ""


def _sccs(ctx: RunContext) -> SccSet:
    if ctx.scc_set is None:
        ctx.scc_set = strongly_connected_components(ctx.graph)
    return ctx.scc_set


def run_validate(ctx: RunContext) -> None:
    report = validate(ctx.graph)
    write_json(ctx.outputs.validation_file, report.as_dict(), ctx.precision)
    ctx.summary["validation"] = report.summary()
    for issue in report.errors:
        log_event(logger, logging.ERROR, issue.message, code=issue.code, subject=issue.subject)
    if not report.ok:
        raise ValidationFailed(f"{len(report.errors)} validation error(s)")


def run_extract(ctx: RunContext) -> None:
    config = ctx.config
    if not config.seeds:
        logger.debug("no seeds configured, extraction skipped")
        return
    if config.seeds == AUTO_SEEDS:
        selection = read_selection_input(config.selection) if config.selection else None
        seeds = select_tncs(
            ctx.graph,
            selection,
            min_share=config.min_share,
            max_missing_country=config.missing_country_fraction,
        )
    else:
        seeds = read_ids(Path(config.seeds))
    extraction = extract_tnc_network(ctx.graph, seeds, config.min_edge_weight)
    ctx.graph = extraction.subgraph
    ctx.scc_set = None
    write_graph(ctx.graph, ctx.outputs.nodes_file, ctx.outputs.edges_file)
    write_roles(extraction, ctx.outputs.roles_file)
    ctx.summary["extraction"] = extraction.counts()


def run_components(ctx: RunContext) -> None:
    graph = ctx.graph
    components = weakly_connected_components(graph)
    sccs = _sccs(ctx)
    write_csv(
        ctx.outputs.components_file,
        ("id", "component"),
        ((node_id, components.component_ids[label]) for node_id, label in zip(graph.ids, components.labels)),
    )
    write_csv(
        ctx.outputs.scc_file,
        ("id", "scc", "scc_size"),
        (
            (node_id, int(label), sccs.size(int(label)))
            for node_id, label in zip(graph.ids, sccs.labels)
        ),
    )
    largest = components.largest
    summary = {
        "weak_components": components.count,
        "largest_weak_component": components.sizes[largest] if largest is not None else 0,
        "strong_components": sccs.count,
        "sccs": scc_size_summary(sccs, components).as_dict(),
    }
    write_json(ctx.outputs.components_summary_file, summary, ctx.precision)
    ctx.summary["components"] = summary


def _bowtie_rows(ctx: RunContext, partition: BowTiePartition) -> None:
    control = ctx.result.c_net if ctx.result is not None else None
    values = ctx.result.values if ctx.result is not None else None
    rows = bow_tie_table(partition, ctx.graph, values=values, control=control)
    header = ["section", "nodes", "TNC", "SH", "PC", "value_pct"]
    if control is not None:
        header.append("control_pct")
    write_csv(
        ctx.outputs.bowtie_table_file,
        header,
        (
            [row.section.value, row.nodes, row.tnc, row.sh, row.pc, row.value_share]
            + ([row.control_share] if control is not None else [])
            for row in rows
        ),
        ctx.precision,
    )


def run_bowtie(ctx: RunContext) -> None:
    config = ctx.config
    core = read_ids(config.core) if config.core else None
    try:
        partition = bow_tie(ctx.graph, core, split_tt=config.split_tt, scc_set=_sccs(ctx))
    except TopologyError as exc:
        if core is not None:
            raise
        log_event(logger, logging.WARNING, "bow-tie skipped", reason=str(exc))
        return
    ctx.partition = partition
    tt = partition.tt_classes or {}
    header = ["id", "section"] + (["tt_class"] if partition.tt_classes is not None else [])
    write_csv(
        ctx.outputs.bowtie_labels_file,
        header,
        (
            [node_id, label.value]
            + ([tt[node_id].value if node_id in tt else ""] if partition.tt_classes is not None else [])
            for node_id, label in zip(partition.ids, partition.labels)
        ),
    )
    _bowtie_rows(ctx, partition)
    ctx.summary["bowtie"] = {
        section.value: count for section, count in partition.counts().items()
    }


def run_motifs(ctx: RunContext) -> None:
    census = cross_shareholding_census(ctx.graph)
    write_json(ctx.outputs.motifs_file, census.as_dict(), ctx.precision)
    ctx.summary["motifs"] = {"mutual_pairs": census.mutual_pairs, **census.triad_counts}


def _write_ccdf(ctx: RunContext, quantity: str, samples: np.ndarray) -> None:
    curve = ccdf(samples)
    write_csv(ctx.outputs.ccdf_file(quantity), ("x", "p"), curve.points(), ctx.precision)


def run_stats(ctx: RunContext) -> None:
    summary = degree_strength_stats(ctx.graph, ctx.config.xmin)
    for quantity in DISTRIBUTION_QUANTITIES:
        write_csv(
            ctx.outputs.ccdf_file(quantity),
            ("x", "p"),
            summary.ccdfs[quantity].points(),
            ctx.precision,
        )
    _write_ccdf(ctx, "value", ctx.graph.values())
    payload: Dict[str, object] = {
        "nodes": ctx.graph.n,
        "edges": ctx.graph.edge_count,
        "mean_out_degree": float(summary.out_degree.mean()) if ctx.graph.n else 0.0,
        "fits": {
            name: {
                "alpha": fit.alpha,
                "stderr": fit.stderr,
                "x_min": fit.x_min,
                "n_tail": fit.n_tail,
            }
            for name, fit in summary.fits.items()
        },
        "fit_errors": dict(summary.fit_errors),
    }
    write_json(ctx.outputs.stats_summary_file, payload, ctx.precision)
    ctx.summary["stats"] = {"fits": sorted(summary.fits)}


def _model(config: RunConfig) -> ControlModel:
    return ControlModel.parse(config.model, config.threshold)


def _compute_control(ctx: RunContext) -> ControlResult:
    if ctx.result is not None:
        return ctx.result
    config = ctx.config
    overrides = read_values(config.values) if config.values else None
    if overrides:
        unknown = sum(1 for node_id in overrides if node_id not in ctx.graph)
        if unknown:
            log_event(logger, logging.WARNING, "values for unknown nodes ignored", count=unknown)
    values = ctx.graph.value_vector(overrides)
    control = direct_control(ctx.graph, _model(config))
    method = Method(config.method)
    partition = None
    scc_set = None
    if method is Method.STAGED:
        scc_set = strongly_connected_components(control)
        if ctx.partition is not None and partition_matches(control, scc_set, ctx.partition):
            partition = ctx.partition
    ctx.result = compute_network_value(
        control, values, method, ctx.solver_options(), scc_set, partition
    )
    ctx.control = control
    return ctx.result


def run_control(ctx: RunContext) -> None:
    result = _compute_control(ctx)
    control = ctx.control
    write_csv(
        ctx.outputs.control_file,
        ("id", "v", "v_net", "c_net"),
        result.rows(),
        ctx.precision,
    )
    payload = result.stats_dict()
    payload["frobenius_ok"] = check_frobenius_condition(control).ok
    payload["control_links"] = int(control.matrix.nnz)
    write_json(ctx.outputs.control_stats_file, payload, ctx.precision)
    _write_ccdf(ctx, "cnet", result.c_net)
    if ctx.partition is not None:
        _bowtie_rows(ctx, ctx.partition)
    ctx.summary["control"] = {
        "method": result.method.value,
        "model": result.model.label,
        "total_network_control": float(result.c_net.sum()),
    }


def _groupings(ctx: RunContext) -> Dict[str, Dict[str, str]]:
    groupings: Dict[str, Dict[str, str]] = {
        "country": {record.id: record.country or "" for record in ctx.graph.nodes},
        "role": {record.id: record.role.value for record in ctx.graph.nodes},
    }
    if ctx.partition is not None:
        groupings["section"] = ctx.partition.as_mapping()
    return groupings


def run_concentration(ctx: RunContext) -> None:
    config = ctx.config
    result = _compute_control(ctx)
    key = CurveKey(config.key)
    curve = concentration_curve(select_universe(result, key, config.universe, ctx.graph), key)
    star = eta_star(curve, config.theta)
    write_csv(
        ctx.outputs.concentration_file,
        ("rank", "id", "eta", "theta"),
        (
            (position + 1, node_id, curve.eta[position], curve.theta[position])
            for position, node_id in enumerate(curve.ids)
        ),
        ctx.precision,
    )
    payload: Dict[str, object] = {
        "key": key.value,
        "universe": config.universe,
        "actors": curve.size,
        "total": curve.total,
        **star.as_dict(),
    }
    if config.compare_models:
        models = [
            ControlModel(ModelKind.LM),
            ControlModel(ModelKind.TM, config.threshold),
            ControlModel(ModelKind.RM),
        ]
        values = dict(zip(result.ids, result.values.tolist()))
        payload["models"] = [
            {
                "model": row.model,
                "total_network_control": row.total_network_control,
                "error": row.error,
                **(row.eta_star.as_dict() if row.eta_star is not None else {}),
            }
            for row in compare_models(
                ctx.graph, values, models, result.method, config.theta, ctx.solver_options()
            )
        ]
    write_json(ctx.outputs.concentration_summary_file, payload, ctx.precision)

    top = top_holder_set(curve, config.theta)
    rows = []
    for name, grouping in _groupings(ctx).items():
        for share in group_shares(result, grouping, key, top):
            rows.append(
                (name, share.label, share.count, share.total, share.share_pct, share.top_count, share.p_top)
            )
    write_csv(
        ctx.outputs.groups_file,
        ("grouping", "label", "count", "total", "share_pct", "top_count", "p_top"),
        rows,
        ctx.precision,
    )
    ctx.summary["concentration"] = star.as_dict()


def run_rank(ctx: RunContext) -> None:
    config = ctx.config
    result = _compute_control(ctx)
    ranking = rank_holders(
        result, ctx.graph, config.top, key=CurveKey(config.key), partition=ctx.partition
    )
    write_csv(
        ctx.outputs.ranking_file,
        ("rank", "id", "country", "sector", "role", "section", ranking.key.value, "cumulative_pct"),
        (
            (row.rank, row.id, row.country, row.sector, row.role, row.section, row.key_value, row.cumulative_pct)
            for row in ranking.rows
        ),
        ctx.precision,
    )
    ctx.summary["rank"] = {"rows": len(ranking.rows)}


Stage = Callable[[RunContext], None]

STAGES: Dict[str, Stage] = {
    "validate": run_validate,
    "extract": run_extract,
    "components": run_components,
    "bowtie": run_bowtie,
    "motifs": run_motifs,
    "stats": run_stats,
    "control": run_control,
    "concentration": run_concentration,
    "rank": run_rank,
}


def _inputs(config: RunConfig) -> Dict[str, Optional[Path]]:
    seeds = Path(config.seeds) if config.seeds and config.seeds != AUTO_SEEDS else None
    return {
        "nodes": config.nodes,
        "edges": config.edges,
        "values": config.values,
        "seeds": seeds,
        "selection": config.selection,
        "core": config.core,
    }


def load_input_graph(config: RunConfig) -> OwnershipGraph:
    if config.edges is None:
        raise ConfigError("an edges table is required (--edges).")
    return load_graph(
        config.nodes,
        config.edges,
        LoadOptions(relaxed=config.relaxed, renormalize_columns=config.renormalize),
    )


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Run the enabled stages in order and publish their artifacts.

    Returns exit code 0 on success, 1 for configuration, input and validation
    failures and 2 when the control system cannot be solved.
    """
    target = OutputPaths(base_dir=Path(config.out_dir))
    summary: Dict[str, object] = {}
    try:
        config.check()
        graph = load_input_graph(config)
        with staged_outputs(target) as staging:
            ctx = RunContext(config=config, outputs=staging, graph=graph, inputs=_inputs(config))
            summary = ctx.summary
            for name in [stage for stage in STAGES if stage in config.stages]:
                log_event(logger, logging.INFO, "stage started", stage=name)
                STAGES[name](ctx)
            write_manifest(config, ctx.inputs, staging)
    except (EngineError, SolverError) as exc:
        log_event(logger, logging.ERROR, "control system not solvable", error=str(exc))
        return PipelineResult(EXIT_SOLVER, [], summary, str(exc))
    except (
        ConfigError,
        GraphLoadError,
        ValidationFailed,
        ExtractionError,
        TopologyError,
        PowerLawFitError,
        ConcentrationError,
        ValueError,
        OSError,
    ) as exc:
        log_event(logger, logging.ERROR, "run aborted", error=str(exc))
        return PipelineResult(EXIT_INPUT, [], summary, str(exc))
    artifacts = target.artifacts()
    log_event(logger, logging.INFO, "run complete", artifacts=len(artifacts), out_dir=target.base_dir)
    return PipelineResult(EXIT_OK, artifacts, summary)
