#!/usr/bin/env python3
"""
Differential advising simulator - command line entry point
  run         one experiment from a config file or preset
  sweep       one experiment per value of a config key, per method
  verify      statistical verification suite
  acceptance  desk-scale method comparison
Exit codes: 0 success, 1 config or parameter error, 2 verification or acceptance failure
"""

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from loguru import logger

from acceptance import run_acceptance
from harness import run_experiment, sweep, write_experiment
from numerics import ParameterError
from sim_config import (DEFAULT_OUTPUT_DIR, ConfigError, ExperimentConfig, PRESETS, apply_env_overrides,
                        configure_logging, describe_keys, load_config_file, preset_config)
from verify import VerificationParams, verify

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Multi-agent RL with differential advising")
    parser.add_argument("--log-level", default=None, help="Log level (default: DASIM_LOG_LEVEL or INFO)")
    parser.add_argument("--no-progress", action="store_true", help="Hide progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one experiment")
    run.add_argument("--config", type=str, help="Config file (key = value lines)")
    run.add_argument("--preset", type=str, choices=sorted(PRESETS), help="Start from a named preset")
    run.add_argument("--seed", type=int, default=None, help="Override the base seed")
    run.add_argument("--out", type=str, default=None, help=f"Output directory (default: {DEFAULT_OUTPUT_DIR})")

    sw = sub.add_parser("sweep", help="Sweep one config key over several values")
    sw.add_argument("--config", type=str, help="Base config file")
    sw.add_argument("--preset", type=str, choices=sorted(PRESETS), help="Start from a named preset")
    sw.add_argument("--axis", type=str, required=True, help="Config key to sweep, or 'size' with WxH values")
    sw.add_argument("--values", type=str, required=True, help="Comma-separated values")
    sw.add_argument("--out", type=str, default=None, help="Output directory")

    ver = sub.add_parser("verify", help="Run the statistical verification suite")
    ver.add_argument("--trials", type=int, default=1_000_000, help="Monte-Carlo samples per check")
    ver.add_argument("--seed", type=int, default=2024, help="Seed for the verification streams")

    acc = sub.add_parser("acceptance", help="Desk-scale method comparison")
    acc.add_argument("--runs", type=int, default=None, help="Replicas per method (default: preset value)")
    acc.add_argument("--workers", type=int, default=None, help="Replica processes")
    acc.add_argument("--seed", type=int, default=1, help="Base seed")

    sub.add_parser("keys", help="List config keys with defaults")
    return parser.parse_args(argv)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """preset < config file < environment < command line"""
    config = preset_config(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        config = load_config_file(args.config, config)
    config = apply_env_overrides(config)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def output_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or os.getenv("DASIM_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))


def main(argv=None) -> int:
    args = parse_args(argv)
    configure_logging(args.log_level)
    progress = not args.no_progress

    try:
        if args.command == "keys":
            print(describe_keys())
            return EXIT_OK

        if args.command == "run":
            config = build_config(args)
            result = run_experiment(config, progress)
            write_experiment(result, output_dir(args))
            return EXIT_OK

        if args.command == "sweep":
            config = build_config(args)
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            text = sweep(config, args.axis, values, progress=progress)
            out = output_dir(args)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"sweep_{args.axis}.csv"
            path.write_text(text)
            logger.info(f"📁 wrote {path}")
            return EXIT_OK

        if args.command == "verify":
            report = verify(VerificationParams(trials=args.trials, seed=args.seed))
            print(report.to_text())
            return EXIT_OK if report.passed else EXIT_FAILED

        if args.command == "acceptance":
            workers = args.workers or int(os.getenv("DASIM_WORKERS", "1"))
            report = run_acceptance(args.runs, workers, args.seed, progress)
            print(report.to_text())
            return EXIT_OK if report.passed else EXIT_FAILED
    except ConfigError as e:
        logger.error(f"❌ config error: {e}")
        return EXIT_CONFIG
    except ParameterError as e:
        logger.error(f"❌ invalid parameter: {e}")
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
