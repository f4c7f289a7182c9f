"""Command-line experiment runner.

Subcommands: run (simulate measurements and run a filter), compare-timing
(EKF vs UKF on identical streams), plot (render SVGs for a finished run),
and list-benchmarks. Settings come from defaults, then an optional JSON
config file, then explicit command-line flags; every run writes its
resolved configuration next to its artifacts. The IOCKF_OUTPUT_ROOT
environment variable re-roots relative output directories.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

from . import benchmarks as bench
from . import experiments
from .experiments import ExperimentConfig

__all__ = ["main"]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--benchmark", choices=bench.names())
    p.add_argument("--filter", choices=experiments.FILTERS)
    p.add_argument("--mode", choices=experiments.MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--prior-mean", help="comma-separated prior mean, e.g. '1,1'")
    p.add_argument("--prior-cov-scale", type=float)
    p.add_argument("--q-scale", type=float)
    p.add_argument("--noise-scale", type=float)
    p.add_argument("--output", help="output directory for artifacts")


def _build_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    overrides = {
        "benchmark": args.benchmark,
        "filter": args.filter,
        "mode": args.mode,
        "seed": args.seed,
        "trials": args.trials,
        "horizon": args.horizon,
        "prior_cov_scale": args.prior_cov_scale,
        "q_scale": args.q_scale,
        "noise_scale": args.noise_scale,
        "output_dir": args.output,
    }
    if args.prior_mean is not None:
        overrides["prior_mean"] = [float(v) for v in args.prior_mean.split(",")]
    data.update({k: v for k, v in overrides.items() if v is not None})
    root = os.environ.get("IOCKF_OUTPUT_ROOT")
    if root and "output_dir" in data and not os.path.isabs(data["output_dir"]):
        data["output_dir"] = str(Path(root) / data["output_dir"])
    elif root and "output_dir" not in data:
        data["output_dir"] = str(Path(root) / ExperimentConfig().output_dir)
    return ExperimentConfig.from_dict(data)


def _fail(config: ExperimentConfig, exc: Exception) -> int:
    record = {
        "error": type(exc).__name__,
        "message": str(exc),
        "config": config.to_dict(),
    }
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(json.dumps(record, indent=2) + "\n")
    except OSError:
        pass
    print(json.dumps(record), file=sys.stderr)
    return 1


def _cmd_run(args) -> int:
    config = _build_config(args)
    try:
        artifacts = experiments.run_experiment(config)
    except (ValueError, AssertionError):
        raise
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        return _fail(config, exc)
    print(f"wrote {len(artifacts.trial_dirs)} trial(s) under {artifacts.root}")
    return 0


def _cmd_compare_timing(args) -> int:
    config = _build_config(args)
    try:
        summary = experiments.compare_timing(config)
    except (ValueError, AssertionError):
        raise
    except Exception as exc:  # noqa: BLE001
        return _fail(config, exc)
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_plot(args) -> int:
    try:
        written = experiments.plot_run(args.run_dir)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_list_benchmarks(_args) -> int:
    for name in bench.names():
        info = bench.get(name).describe()
        print(
            f"{name}: n={info['state_dim']} m={info['control_dim']} "
            f"N={info['param_dim']} q={info['measurement_dim']} T={info['horizon']} "
            f"theta*={info['ground_truth']} noise={info['noise_variance']:g}"
        )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="iockf",
        description="Online inverse optimal control experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate measurements and run a filter")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser(
        "compare-timing", help="run EKF and UKF on the same stream and compare"
    )
    _add_config_flags(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare_timing)

    p_plot = sub.add_parser("plot", help="render plots for a finished run")
    p_plot.add_argument("run_dir")
    p_plot.set_defaults(func=_cmd_plot)

    p_list = sub.add_parser("list-benchmarks", help="show available benchmarks")
    p_list.set_defaults(func=_cmd_list_benchmarks)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
