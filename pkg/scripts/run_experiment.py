#!/usr/bin/env python3
"""
Experiment Runner CLI for the cloaking toolkit.

Each experiment kind is a subcommand; `validate` checks a config without
running it. Flags override values from the experiment file, which
overrides config.yaml.

Usage:
    python scripts/run_experiment.py cloak-converge --config experiments/cloak_converge.yaml
    python scripts/run_experiment.py design-dump --out output/design --threads 4
    python scripts/run_experiment.py rays --config experiments/rays.yaml --tol 1e-11
    python scripts/run_experiment.py validate --config experiments/quantum_converge.yaml
"""

import argparse
import logging
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.errors import EXIT_CONFIG, EXIT_OK, CloakingError, exit_code_for
from src.experiment_runner import KINDS, ExperimentRunner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Run transformation-optics cloaking experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Exit codes: 0 ok, 2 config, 3 resonance, 4 numerical, 5 I/O",
    )
    parser.add_argument("--defaults", type=str, default="config.yaml",
                        help="Repository defaults file (default: config.yaml)")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Experiment YAML file")
    common.add_argument("--out", type=str, default=None, help="Output directory")
    common.add_argument("--threads", type=int, default=None, help="Worker pool size")
    common.add_argument("--tol", type=float, default=None, help="Integration tolerance")

    subparsers = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        subparsers.add_parser(kind, parents=[common], help=f"Run a {kind} experiment")
    subparsers.add_parser("validate", parents=[common], help="Check a config without running it")
    return parser


def run(args) -> int:
    """Run one experiment; returns the process exit code."""
    try:
        runner = ExperimentRunner(args.defaults)
    except CloakingError as e:
        print(f"Error: {e}", file=sys.stderr)
        return exit_code_for(e)

    overrides = {"output_dir": args.out, "threads": args.threads, "tol": args.tol}

    if args.command == "validate":
        report = runner.validate(args.config, overrides)
        if not report.ok:
            for message in report.errors:
                print(f"Invalid: {message}", file=sys.stderr)
            return EXIT_CONFIG
        for message in report.warnings:
            print(f"Warning: {message}")
        print("ok")
        for key, value in report.config.echo().items():
            print(f"  {key}: {value}")
        return EXIT_OK

    overrides["kind"] = args.command
    try:
        config = runner.load_experiment(args.config, overrides)
        manifest = runner.run(config)
    except CloakingError as e:
        logging.getLogger(__name__).error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)

    print(runner.last_report)
    print(f"\nManifest: {Path(config.output_dir) / (manifest.name + '.manifest.json')}")
    return EXIT_OK


def main():
    from dotenv import load_dotenv

    # Load environment variables (CLOAKING_OUTPUT_DIR)
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args()
    sys.exit(run(args))


if __name__ == "__main__":
    main()
