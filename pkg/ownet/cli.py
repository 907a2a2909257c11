from __future__ import annotations

import argparse
from pathlib import Path
from typing import List, Optional

from ownet_core.log import configure_logging
from ownet_core.synth import SynthKind

from .commands import COMMAND_HANDLERS
from .version import __version__


def _input_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("input")
    group.add_argument("--nodes", type=Path, default=None, help="Nodes CSV (id,role,value,country,sector).")
    group.add_argument("--edges", type=Path, default=None, help="Edges CSV (src,dst,weight).")
    group.add_argument("--values", type=Path, default=None, help="Intrinsic values CSV (id,value) overriding node values.")
    group.add_argument(
        "--out-dir", type=Path, default=argparse.SUPPRESS, help="Artifact directory (default ./ownet-out)."
    )
    group.add_argument(
        "--relaxed",
        action="store_true",
        default=None,
        help="Clip weights above 1 and report over-full columns as warnings.",
    )
    group.add_argument(
        "--renormalize-columns",
        dest="renormalize",
        action="store_true",
        default=None,
        help="Rescale columns whose in-weight sum exceeds 1 to sum exactly 1.",
    )
    return parent


def _control_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("control")
    group.add_argument("--model", choices=("lm", "tm", "rm"), default=None, help="Direct-control model (default tm).")
    group.add_argument("--threshold", type=float, default=None, help="Threshold of the tm model (default 0.5).")
    group.add_argument(
        "--method",
        choices=("naive", "corrected", "staged"),
        default=None,
        help="Network value formulation (default staged).",
    )
    group.add_argument("--tolerance", type=float, default=None, help="Relative solver tolerance (default 1e-10).")
    group.add_argument("--max-iterations", type=int, default=None, help="Iteration cap of the sparse solver.")
    group.add_argument(
        "--dense-limit",
        type=int,
        default=None,
        help="Largest system solved by direct factorisation and dense validation (default 2000).",
    )
    return parent


def _concentration_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--theta", type=float, default=None, help="Target cumulative share for eta* (default 0.8).")
    parser.add_argument("--key", choices=("cnet", "vnet", "value"), default=None, help="Ranking key (default cnet).")
    parser.add_argument(
        "--universe",
        default=None,
        help="Actors on the eta axis: positive (default), all, or roles such as TNC,SH.",
    )


def _topology_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--core", default=None, help="'auto' or a file listing the core node ids.")
    parser.add_argument("--split-tt", action="store_true", default=None, help="Split TT into tubes and tendrils.")


def _extract_options(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument(
        "--seeds",
        required=required,
        default=None,
        help="'auto' to select TNCs by the cross-border rule, or a file of seed ids.",
    )
    parser.add_argument("--selection", type=Path, default=None, help="CSV id,listed,ultimate_owner for 'auto' seeds.")
    parser.add_argument("--min-share", type=float, default=None, help="Ownership share qualifying a TNC (default 0.10).")
    parser.add_argument(
        "--min-edge-weight",
        type=float,
        default=None,
        help="Ignore links below this weight during the upstream walk (default 0).",
    )
    parser.add_argument(
        "--max-missing-country",
        dest="missing_country_fraction",
        type=float,
        default=None,
        help="Largest tolerated fraction of participated companies without a country.",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ownet",
        description="Control propagation and concentration analytics for ownership networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, default=None, help="Flat key=value run configuration.")
    parser.add_argument("--out-dir", type=Path, default=None, help="Artifact directory (default ./ownet-out).")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug diagnostics.")
    parser.add_argument("-q", "--quiet", action="store_true", help="Log errors only.")
    parser.add_argument("--no-color", action="store_true", help="Disable ANSI colours.")
    parser.add_argument(
        "--precision",
        choices=("6", "full"),
        default=None,
        help="Six significant digits (default) or full round-trip precision.",
    )

    inputs = _input_options()
    control = _control_options()
    subparsers = parser.add_subparsers(dest="command", required=True)

    subparsers.add_parser("validate", parents=[inputs], help="Load and validate a network.")

    synth = subparsers.add_parser("synth", help="Write a seeded synthetic network.")
    synth.add_argument("--kind", choices=[kind.value for kind in SynthKind], default="bowtie")
    synth.add_argument("--n", type=int, default=10, help="Node count (non-bowtie kinds).")
    synth.add_argument("--density", type=float, default=0.1, help="Link probability (dag, er).")
    synth.add_argument("--in", dest="in_size", type=int, default=3, help="IN section size.")
    synth.add_argument("--core", dest="core_size", type=int, default=4, help="Core size.")
    synth.add_argument("--out", dest="out_size", type=int, default=5, help="OUT section size.")
    synth.add_argument("--tt", dest="tt_size", type=int, default=0, help="Tubes and tendrils size.")
    synth.add_argument("--degree", type=int, default=2, help="Links per IN/OUT node.")
    synth.add_argument("--core-degree", type=int, default=2, help="Out-links per core node.")
    synth.add_argument("--weight", type=float, default=None, help="Fixed link weight instead of sampled shares.")
    synth.add_argument("--seed", type=int, default=None, help="Generator seed (default: the config seed, 0).")
    synth.add_argument("--connected", action="store_true", help="Add a spanning tree (dag, er).")
    synth.add_argument("--out-dir", type=Path, default=argparse.SUPPRESS, help="Directory for nodes.csv and edges.csv.")

    extract = subparsers.add_parser("extract-tnc", parents=[inputs], help="Extract the TNC ownership network.")
    _extract_options(extract, required=True)

    subparsers.add_parser("components", parents=[inputs], help="Weak and strong components.")
    bowtie = subparsers.add_parser("bowtie", parents=[inputs], help="Bow-tie decomposition.")
    _topology_options(bowtie)
    subparsers.add_parser("motifs", parents=[inputs], help="Cross-shareholding census.")
    stats = subparsers.add_parser("stats", parents=[inputs], help="Degree and strength distributions.")
    stats.add_argument("--xmin", type=float, default=None, help="Lower cutoff of the power-law fit.")

    subparsers.add_parser("control", parents=[inputs, control], help="Network value and network control.")
    concentration = subparsers.add_parser(
        "concentration", parents=[inputs, control], help="Concentration curve and eta*."
    )
    _concentration_options(concentration)
    concentration.add_argument(
        "--compare-models", action="store_true", default=None, help="Also report eta* under lm, tm and rm."
    )
    rank = subparsers.add_parser("rank", parents=[inputs, control], help="Top holders by network control.")
    rank.add_argument("--top", type=int, default=None, help="Rows in the ranking (default 50).")
    rank.add_argument("--key", choices=("cnet", "vnet", "value"), default=None)

    report = subparsers.add_parser("report", parents=[inputs, control], help="Run every analysis stage.")
    _extract_options(report, required=False)
    _topology_options(report)
    _concentration_options(report)
    report.add_argument("--compare-models", action="store_true", default=None)
    report.add_argument("--top", type=int, default=None)
    report.add_argument("--xmin", type=float, default=None)
    report.add_argument("--stages", default=None, help="Comma-separated subset of stages to run.")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbosity = 1 if args.verbose else (-1 if args.quiet else 0)
    configure_logging(verbosity, color=not args.no_color)

    handler = COMMAND_HANDLERS.get(args.command or "")
    if handler is None:
        parser.print_help()
        return 1
    return handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
