"""Command-line interface: ``ssur {estimate,sweep,ga-study,oracle,cuts}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .estimators import _json_default
from .runner import (
    ConfigError,
    RunConfig,
    run_budget_sweep,
    run_cuts,
    run_estimate,
    run_ga_study,
    run_oracle,
)
from .oracle import OracleRefusal

log = logging.getLogger("ssur")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", required=True, help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads for replications")
    common.add_argument("--replications", type=int, metavar="K", help="number of independent runs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ssur", description="Network failure probability estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("estimate", parents=[common], help="run the full estimation workflow")
    sweep = sub.add_parser("sweep", parents=[common], help="refinement-step budget sweep")
    sweep.add_argument("--budget-cap", type=float)
    sweep.add_argument("--max-steps", type=int)
    sweep.add_argument("--stride", type=int)
    sweep.add_argument("--oracle", action="store_true", help="exact variance ratios (small models)")
    ga = sub.add_parser("ga-study", parents=[common], help="GA accuracy over a settings grid")
    ga.add_argument("--runs", type=int)
    sub.add_parser("oracle", parents=[common], help="exact solution by enumeration")
    sub.add_parser("cuts", parents=[common], help="minimum cut cardinality and minimal cuts")
    return parser


def _config(args):
    config = RunConfig.load(args.config)
    data = config.to_dict()
    for name in ("seed", "out", "threads", "replications"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    return RunConfig.from_dict(data, base_dir=config.base_dir)


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = _config(args)
        if args.command == "estimate":
            result = run_estimate(config)
            summary = {k: result[k] for k in ("i_star", "label", "n_strata", "preprocessing_cost", "summary")}
        elif args.command == "sweep":
            result = run_budget_sweep(config, args.budget_cap, args.max_steps, args.stride,
                                      args.oracle or None)
            summary = {"selected_steps": result["selected_steps"], "rows": len(result["rows"])}
        elif args.command == "ga-study":
            rows = run_ga_study(config, runs=args.runs)
            summary = {"cells": [{"cell": r[0], "accuracy": r[7], "mean_evaluations": r[8]} for r in rows]}
        elif args.command == "oracle":
            result = run_oracle(config)
            summary = {k: result[k] for k in ("p_f", "p_f_star", "i_star")}
        else:
            result = run_cuts(config)
            summary = {"i_star": result["i_star"], "cuts": len(result["states"])}
    except (ConfigError, OracleRefusal, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
