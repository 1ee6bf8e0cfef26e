"""Command-line surface: one subcommand per pipeline stage plus the
end-to-end run.

Exit codes for `run` and `fuzz`: 0 = exploit triggered, 2 = budget exhausted
without an exploit, 1 = pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from .campaign import report_table
from .config import load_config
from .errors import ChainfuzzError
from .pipeline import Pipeline, rerender_report

log = logging.getLogger(__name__)

EXIT_EXPLOIT = 0
EXIT_FAILURE = 1
EXIT_TIMEOUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainfuzz",
        description="Directed fuzzing campaigns derived from a target function",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage_parser(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config file (TOML)")
        p.add_argument("--workspace", help="override workspace directory")
        p.add_argument("--target-function", dest="target_function", help="override the target function")
        p.add_argument("--source-root", dest="source_root", help="override the source tree root")
        p.add_argument("--mode", choices=("record", "replay", "live"), help="gateway mode override")
        p.add_argument("--cassette", help="cassette path override")
        p.add_argument("--budget", dest="budget_s", type=float, help="campaign budget seconds")
        p.add_argument("--rng-seed", dest="rng_seed", type=int, help="campaign rng seed")
        p.add_argument("--max-execs", dest="max_execs", type=int, help="stop the campaign after N executions")
        p.add_argument("--engine", choices=("builtin", "external"), help="campaign engine")
        p.add_argument(
            "--ablation",
            choices=("none", "without-input", "without-mutator", "harness-only"),
            help="ablation variant",
        )
        return p

    for name, help_text in (
        ("analyze", "build the call graph, enumerate chains, select the campaign chain"),
        ("conditions", "derive per-edge execution conditions for the selected chain"),
        ("harness", "generate and compile the target harness (with repair)"),
        ("seed", "generate and verify a reachable seed input"),
        ("mutator", "generate, build and validate the target-specific mutator"),
        ("fuzz", "run the fuzzing campaign on the prepared artifacts"),
        ("run", "run every stage end to end"),
    ):
        stage_parser(name, help_text)

    report_p = sub.add_parser("report", help="re-render the report for a completed workspace")
    report_p.add_argument("--workspace", required=True, help="campaign workspace directory")
    report_p.add_argument("--format", choices=("table", "json", "both"), default="both")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = (
        "workspace",
        "target_function",
        "source_root",
        "mode",
        "cassette",
        "budget_s",
        "rng_seed",
        "max_execs",
        "engine",
        "ablation",
    )
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _pipeline(args: argparse.Namespace) -> Pipeline:
    config = load_config(args.config, overrides=_overrides(args))
    return Pipeline(config)


def _print_report(report: dict, fmt: str = "both") -> None:
    if fmt in ("table", "both"):
        print(report_table(report), end="")
    if fmt in ("json", "both"):
        print(json.dumps(report, indent=2))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return dispatch(args)
    except ChainfuzzError as exc:
        log.error("%s failed: %s", args.command, exc)
        return EXIT_FAILURE
    except (ValueError, OSError) as exc:
        log.error("%s failed: %s", args.command, exc)
        return EXIT_FAILURE


def dispatch(args: argparse.Namespace) -> int:
    command = args.command

    if command == "report":
        report = rerender_report(Path(args.workspace))
        _print_report(report, args.format)
        return EXIT_EXPLOIT

    pipeline = _pipeline(args)

    if command == "analyze":
        chain = pipeline.stage_analyze()
        print(json.dumps({"selected_chain": list(chain.names)}, indent=2))
        return EXIT_EXPLOIT

    chain = pipeline.stage_analyze()
    if command == "conditions":
        pipeline.stage_conditions(chain)
        print(f"conditions written to {pipeline.ws / 'conditions.json'}")
        return EXIT_EXPLOIT

    conditions = pipeline.stage_conditions(chain)
    if command == "harness":
        artifact = pipeline.stage_harness(chain, conditions)
        print(f"harness binary: {artifact.binary} (repair rounds: {artifact.repair_rounds_used})")
        return EXIT_EXPLOIT

    harness = pipeline.stage_harness(chain, conditions)
    if command == "seed":
        seed = pipeline.stage_seed(conditions, harness)
        if seed is None:
            print("seed generation skipped by ablation")
        else:
            print(f"verified seed ({len(seed.data)} bytes) on attempt {seed.producer.attempt}")
        return EXIT_EXPLOIT

    seed = pipeline.stage_seed(conditions, harness)
    if command == "mutator":
        mutator = pipeline.stage_mutator(chain, harness, seed)
        if mutator is None:
            print("mutator skipped (ablation or failed validation)")
        else:
            print(f"mutator built: {mutator.binary}")
        return EXIT_EXPLOIT

    mutator = pipeline.stage_mutator(chain, harness, seed)
    result = pipeline.stage_fuzz(harness, seed, mutator)
    report = pipeline.stage_report(result, harness)
    _print_report(report)
    return EXIT_EXPLOIT if result.exploited else EXIT_TIMEOUT


if __name__ == "__main__":
    raise SystemExit(main())
