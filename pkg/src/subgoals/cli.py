"""Command-line entry point: `subgoals run` and `subgoals summarize`."""

from __future__ import annotations

import argparse
import sys

from .harness import (ConfigError, ExperimentConfig, coerce_config,
                      parse_config_file, run_experiment, summarize)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subgoals")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment batch")
    run.add_argument("--condition", choices=("baseline", "topdown", "twopronged"))
    run.add_argument("--runs", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--hidden", help="MLP hidden widths, e.g. 32,16")
    run.add_argument("--jobs", type=int)
    run.add_argument("--trace", action="store_true", default=None)

    summ = sub.add_parser("summarize", help="summarize a trials.csv")
    summ.add_argument("--in", dest="infile", required=True)
    summ.add_argument("--window", type=int, default=25)
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig()
    if args.config:
        coerce_config(config, parse_config_file(args.config))
    cli_overrides = {
        "condition": args.condition,
        "runs": args.runs,
        "trials": args.trials,
        "seed": args.seed,
        "out_dir": args.out,
        "mlp_hidden": args.hidden,
        "jobs": args.jobs,
        "trace": args.trace,
    }
    coerce_config(config, {k: v for k, v in cli_overrides.items() if v is not None})
    return config.validate()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            out = run_experiment(_config_from_args(args))
            print(f"wrote bundle to {out}")
        elif args.command == "summarize":
            result = summarize(args.infile, window=args.window)
            print(f"runs: {len(result['runs'])}  trials: {result['trials']}")
            print(f"last-100-trials mean iterations: {result['last100_mean']:.3f}")
            final = result["mean"][-1]
            sd = result["sd"][-1]
            print(f"smoothed final iterations (window {result['window']}): "
                  f"{final:.3f} +/- {sd:.3f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
