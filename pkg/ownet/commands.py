from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ownet_core.colors import ACCENT, ERROR, RESET, SUCCESS, WARNING
from ownet_core.config import ALL_STAGES, ConfigError, RunConfig, load_config
from ownet_core.graph import write_graph
from ownet_core.paths import OutputPaths, staged_outputs
from ownet_core.pipeline import EXIT_INPUT, EXIT_OK, PipelineResult, run_pipeline
from ownet_core.synth import SynthError, SynthKind, SynthSpec, generate

AUTO_CORE = "auto"

COMMAND_STAGES: Dict[str, Optional[List[str]]] = {
    "validate": ["validate"],
    "extract-tnc": ["validate", "extract"],
    "components": ["validate", "components"],
    "bowtie": ["validate", "bowtie"],
    "motifs": ["validate", "motifs"],
    "stats": ["validate", "stats"],
    "control": ["validate", "control"],
    "concentration": ["validate", "control", "concentration"],
    "rank": ["validate", "bowtie", "control", "rank"],
    "report": None,
}

_OVERRIDES = (
    "nodes",
    "edges",
    "values",
    "seeds",
    "selection",
    "out_dir",
    "model",
    "threshold",
    "method",
    "theta",
    "key",
    "universe",
    "top",
    "xmin",
    "renormalize",
    "relaxed",
    "split_tt",
    "compare_models",
    "min_share",
    "min_edge_weight",
    "missing_country_fraction",
    "precision",
    "dense_limit",
    "tolerance",
    "max_iterations",
)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the ``--config`` file, then command-line flags."""
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {name: getattr(args, name, None) for name in _OVERRIDES}
    core = getattr(args, "core", None)
    if core is not None:
        overrides["core"] = None if core == AUTO_CORE else Path(core)
    stages = COMMAND_STAGES.get(args.command)
    if stages is None and getattr(args, "stages", None):
        stages = [stage.strip() for stage in args.stages.split(",") if stage.strip()]
    config = config.with_overrides(overrides)
    if "core" in overrides and overrides["core"] is None:
        config.core = None
    if stages is not None:
        config.stages = [stage for stage in ALL_STAGES if stage in stages] + [
            stage for stage in stages if stage not in ALL_STAGES
        ]
    return config.check()


def _print_result(command: str, result: PipelineResult) -> None:
    if result.exit_code != EXIT_OK:
        print(f"{ERROR}{command} failed{RESET}: {result.error}", file=sys.stderr)
        return
    print(f"{SUCCESS}{command} complete{RESET}: {len(result.artifacts)} artifact(s)")
    for stage, details in result.summary.items():
        print(f"  {ACCENT}{stage}{RESET} {details}")


def handle_pipeline(args: argparse.Namespace) -> int:
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"Config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    result = run_pipeline(config)
    _print_result(args.command, result)
    return result.exit_code


def handle_synth(args: argparse.Namespace) -> int:
    out_dir = getattr(args, "out_dir", None) or OutputPaths.default().base_dir
    seed = args.seed
    if seed is None:
        try:
            seed = (load_config(args.config) if args.config else RunConfig()).seed
        except ConfigError as exc:
            print(f"Config error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    try:
        spec = SynthSpec(
            kind=SynthKind(args.kind),
            n=args.n,
            density=args.density,
            in_size=args.in_size,
            core_size=args.core_size,
            out_size=args.out_size,
            tt_size=args.tt_size,
            degree=args.degree,
            core_degree=args.core_degree,
            weight=args.weight,
            seed=seed,
            connected=args.connected,
        )
        graph = generate(spec)
    except SynthError as exc:
        print(f"{WARNING}Cannot generate{RESET}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    with staged_outputs(OutputPaths(base_dir=Path(out_dir))) as staging:
        write_graph(graph, staging.nodes_file, staging.edges_file)
    print(
        f"{SUCCESS}synth complete{RESET}: {ACCENT}{graph.n}{RESET} nodes, "
        f"{ACCENT}{graph.edge_count}{RESET} edges in {out_dir}"
    )
    return EXIT_OK


CommandHandler = Callable[[argparse.Namespace], int]


COMMAND_HANDLERS: Dict[str, CommandHandler] = {
    "synth": handle_synth,
    **{command: handle_pipeline for command in COMMAND_STAGES},
}
