"""Command-line driver for the experiment campaigns.

Usage: ``taylor-rbm <experiment> --config path.json [overrides]`` with
experiments ``dims``, ``grid``, ``path`` and ``compare-pt``.  Flags override
config-file keys; the SEED and WORKERS environment variables seed the power
iterations and size the worker pool.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .experiments import EXPERIMENTS, ExperimentConfig, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taylor-rbm",
        description="Reduced-basis and perturbation-series experiments for "
                    "parametric Hermitian eigenvalue problems.",
    )
    parser.add_argument("experiment", nargs="?", choices=EXPERIMENTS,
                        help="experiment to run (may also come from the config file)")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--experiment", dest="experiment_flag", choices=EXPERIMENTS,
                        help="experiment override when the positional form is not used")
    parser.add_argument("--model-l", type=int, help="chain length of the xxz model")
    parser.add_argument("--mu0", help="reference parameter point, comma separated")
    parser.add_argument("--clusters", type=int, help="number of targeted eigenvalue clusters")
    parser.add_argument("--order", type=int, help="highest derivative order of the basis")
    parser.add_argument("--tol-rank", type=float, help="rank-detection threshold")
    parser.add_argument("--tol-cluster", type=float, help="eigenvalue clustering threshold")
    parser.add_argument("--tol-solve", type=float, help="relative residual of deflated solves")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="seed override (also env SEED)")
    parser.add_argument("--workers", type=int, help="worker count override (also env WORKERS)")
    return parser


def config_from_args(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    config = config.with_env()
    updates = {}
    experiment = args.experiment or args.experiment_flag
    if experiment:
        updates["experiment"] = experiment
    if args.model_l is not None:
        updates["model_l"] = args.model_l
    if args.mu0 is not None:
        updates["mu0"] = tuple(float(x) for x in args.mu0.split(","))
    if args.clusters is not None:
        updates["clusters"] = args.clusters
    if args.order is not None:
        updates["order"] = args.order
    if args.tol_rank is not None:
        updates["tol_rank"] = args.tol_rank
    if args.tol_cluster is not None:
        updates["tol_cluster"] = args.tol_cluster
    if args.tol_solve is not None:
        updates["tol_solve"] = args.tol_solve
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    return replace(config, **updates) if updates else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args).validate()
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = run(config)
    print(f"experiment: {summary['experiment']}")
    print(f"csv:        {summary['csv']}")
    print(f"summary:    {summary['summary_path']}")
    if "dims" in summary:
        print(f"dims:       {summary['dims']}")
    if summary.get("crossing", {}).get("crossing_offset") is not None:
        print(f"crossing:   {summary['crossing']['crossing_offset']:.6g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
