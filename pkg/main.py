#!/usr/bin/env python3
"""
adalloc - Main Command Line Entry Point

Generates instances, runs the online allocation algorithms, certifies traces,
prints closed-form bound tables and runs experiments with CSV reports.

Exit codes: 0 success, 1 certification failure, 2 bound violation, 3 input error.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv
from rich.console import Console
from rich.table import Table

# Load environment variables
load_dotenv()

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent))

from models import (
    AdAllocError, AlgorithmKind, TieBreak, CertificationReport, BoundRow, ExperimentSpec
)
from services import (
    get_codec_service, get_experiment_service, get_generator_service
)
from utils import VERIFY_LEVELS, get_config, get_logger, setup_logging, parse_rational, format_rational

EXIT_OK = 0
EXIT_CERTIFICATION = 1
EXIT_INPUT = 3

FAMILIES = ("greedy-tight", "equal-bids-tight", "adwords-greedy-tight", "high-degree-ub",
            "star", "adwords-ub", "random", "outlier")

console = Console()
logger = get_logger(__name__)


def parse_params(pairs: Optional[Sequence[str]]) -> Dict[str, Any]:
    """key=value pairs from --param"""
    params = {}
    for pair in pairs or []:
        key, separator, value = pair.partition("=")
        if not separator or not key:
            raise argparse.ArgumentTypeError(f"expected key=value, got {pair!r}")
        params[key.strip()] = value.strip()
    return params


def parse_tie(text: Optional[str], seed: int) -> Optional[TieBreak]:
    """lowest | degree | seeded | script:<file>; None keeps the default"""
    if text is None:
        return None
    if text == "lowest":
        return TieBreak.lowest()
    if text == "degree":
        return TieBreak.highest_degree()
    if text == "seeded":
        return TieBreak.seeded(seed)
    if text.startswith("script:"):
        return get_codec_service().load_script(text[len("script:"):])
    raise argparse.ArgumentTypeError(f"unknown tie policy {text!r}")


def script_path_for(instance_path: Path) -> Path:
    return instance_path.with_name(instance_path.stem + ".script.json")


# Rendering

def render_certification(report: CertificationReport):
    table = Table(title=f"Certification of {report.algorithm} ({report.level})")
    table.add_column("Check")
    table.add_column("Result")
    table.add_column("Checked", justify="right")
    table.add_column("Detail")
    for check in report.checks:
        detail = check.detail
        if check.counterexample:
            detail = f"{detail} {check.counterexample}".strip()
        table.add_row(check.name, "[green]pass[/green]" if check.passed else "[red]FAIL[/red]",
                      str(check.checked), detail)
    console.print(table)
    for warning in report.warnings:
        console.print(f"[yellow]warning:[/yellow] {warning}")
    if report.max_z is not None:
        console.print(f"max z = {format_rational(report.max_z)}")


def render_bounds(rows: List[BoundRow]):
    table = Table(title="Competitive ratio bounds")
    for column in ("R", "k", "d", "greedy", "greedy (matching)", "1-(1-1/d)^k", "det", "1-e^(-k/d)",
                   "ours (k/d -> inf)", "previous"):
        table.add_column(column, justify="right")

    def show(value) -> str:
        if value is None:
            return ""
        return f"{float(value):.6f}"

    for row in rows:
        table.add_row(format_rational(row.r), str(row.k or ""), str(row.d or ""), show(row.greedy_bound),
                      show(row.greedy_matching_bound), show(row.matching_bound), show(row.det_bound),
                      show(row.exponential_bound), show(row.asymptotic_ours), show(row.asymptotic_sota))
    console.print(table)


def render_rows(rows: List[Dict[str, Any]]):
    if not rows:
        return
    table = Table(title="Experiment")
    for column in rows[0]:
        table.add_column(column)
    for row in rows:
        table.add_row(*(str(value) for value in row.values()))
    console.print(table)


# Commands

def cmd_generate(args) -> int:
    generated = get_generator_service().generate(args.family, parse_params(args.param))
    codec = get_codec_service()
    path = codec.save_instance(generated.source, args.out)
    console.print(f"Wrote {args.family} instance to {path}")
    if generated.script is not None:
        script = codec.save_script(generated.script, script_path_for(path))
        console.print(f"Wrote tie script to {script}")
    return EXIT_OK


def _spec_from_args(args, trials: int) -> ExperimentSpec:
    return ExperimentSpec(
        algorithm=AlgorithmKind(args.algo),
        instance_path=args.instance,
        generator=args.family,
        generator_params=parse_params(args.param),
        k=args.k,
        d=args.d,
        tie=parse_tie(args.tie, args.seed),
        verify=args.verify or get_config().default_verify_level,
        trials=trials,
        seed=args.seed,
        report_path=args.out
    )


def cmd_run(args) -> int:
    report = get_experiment_service().run_experiment(_spec_from_args(args, 1))
    trace = report.trace
    console.print(f"{args.algo}: revenue {report.rows[0]['revenue']}, ratio {report.rows[0]['ratio']} "
                  f"against {report.rows[0]['opt_kind']} OPT {report.rows[0]['opt']}")

    if args.trace:
        codec = get_codec_service()
        trace_path = codec.save_trace(trace, args.trace)
        realized = codec.save_instance(trace.instance, Path(trace_path).with_suffix(".instance.json"))
        console.print(f"Wrote trace to {trace_path} and the realized instance to {realized}")

    if report.certification is not None:
        render_certification(report.certification)
    return report.exit_code


def cmd_certify(args) -> int:
    level = args.verify or get_config().default_verify_level
    report = get_experiment_service().certify(args.trace, args.instance, level)
    render_certification(report)
    return EXIT_OK if report.passed else EXIT_CERTIFICATION


def cmd_bounds(args) -> int:
    rates = [parse_rational(text) for text in args.R]
    pairs = []
    for text in args.kd or []:
        k, _, d = text.partition(",")
        pairs.append((int(k), int(d)))
    render_bounds(get_experiment_service().bounds_table(rates, pairs))
    return EXIT_OK


def cmd_experiment(args) -> int:
    report = get_experiment_service().run_experiment(_spec_from_args(args, args.trials))
    render_rows(report.rows)
    if report.std_ratio is not None:
        console.print(f"mean {float(report.mean_ratio):.6f}, std {report.std_ratio:.6f}, "
                      f"stderr {report.stderr_ratio:.6f} over {len(report.ratios)} trials")
    if report.certification is not None:
        render_certification(report.certification)
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adalloc", description="Online ad allocation on (k,d)-bounded graphs")
    parser.add_argument("--log-level", default=None, help="Override ADALLOC_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="Generate an instance family member")
    generate.add_argument("--family", required=True, choices=FAMILIES)
    generate.add_argument("--param", action="append", metavar="KEY=VALUE",
                          help="Generator parameter, e.g. k=7, R=1/2, base=path.json")
    generate.add_argument("--out", required=True, help="Instance file to write")
    generate.set_defaults(handler=cmd_generate)

    def add_run_arguments(command: argparse.ArgumentParser):
        source = command.add_mutually_exclusive_group(required=True)
        source.add_argument("--instance", help="Instance file")
        source.add_argument("--family", choices=FAMILIES, help="Generate the instance instead")
        command.add_argument("--param", action="append", metavar="KEY=VALUE")
        command.add_argument("--algo", required=True, choices=[kind.value for kind in AlgorithmKind])
        command.add_argument("--k", type=int)
        command.add_argument("--d", type=int)
        command.add_argument("--tie", help="lowest | degree | seeded | script:<file>")
        command.add_argument("--seed", type=int, default=0)
        command.add_argument("--verify", choices=VERIFY_LEVELS)
        command.add_argument("--out", help="CSV report to write")

    run = commands.add_parser("run", help="Run one algorithm")
    add_run_arguments(run)
    run.add_argument("--trace", help="Trace file (JSON Lines) to write")
    run.set_defaults(handler=cmd_run)

    certify = commands.add_parser("certify", help="Certify a trace against its realized instance")
    certify.add_argument("--trace", required=True)
    certify.add_argument("--instance", required=True)
    certify.add_argument("--verify", choices=VERIFY_LEVELS)
    certify.set_defaults(handler=cmd_certify)

    bounds = commands.add_parser("bounds", help="Closed-form bound table")
    bounds.add_argument("--R", nargs="+", required=True, help="Bid-to-budget ratios, e.g. 1/2 1/3")
    bounds.add_argument("--kd", nargs="*", help="(k,d) pairs written k,d")
    bounds.set_defaults(handler=cmd_bounds)

    experiment = commands.add_parser("experiment", help="Run an experiment and report against OPT")
    add_run_arguments(experiment)
    experiment.add_argument("--trials", type=int, default=1)
    experiment.set_defaults(handler=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = get_config()
    config.ensure_directories()
    setup_logging(args.log_level)

    try:
        return args.handler(args)
    except (AdAllocError, argparse.ArgumentTypeError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        console.print(f"[red]error:[/red] {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
