"""Command-line entry points.

Exit codes: 0 success, 2 configuration problems, 3 data problems,
4 execution failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from .analysis import AnalysisError
from .datasets import DatasetError, load_csv
from .evaluation import Budget
from .harness import (ExperimentConfig, HarnessError, bootstrap_metabase,
                      make_clock, report, run_experiment)
from .landmarking import design_space
from .metabase import MetabaseError, MetaKnowledgeBase

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", required=True,
                   help="experiment config file (JSON)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--budget", type=float,
                   help="override the per-run budget in seconds")
    p.add_argument("--out", help="override the output directory")
    clock = p.add_mutually_exclusive_group()
    clock.add_argument("--virtual-clock", dest="clock", action="store_const",
                       const="virtual", help="deterministic cost-model time")
    clock.add_argument("--wall-clock", dest="clock", action="store_const",
                       const="wall", help="real elapsed time")


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.budget is not None:
        overrides["budget_seconds"] = args.budget
    if args.out is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "clock", None):
        overrides["clock"] = args.clock
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    return ExperimentConfig.from_json(args.config, **overrides)


def cmd_bootstrap(args) -> int:
    config = _load_config(args)
    result = bootstrap_metabase(config)
    print(f"meta-knowledge base written to {config.resolved_metabase_path}")
    print(f"{len(result.base.datasets)} datasets, "
          f"{len(result.base.cells)} cells")
    for note in result.notes:
        print(f"note: {note}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load_config(args)
    result = run_experiment(config)
    absent = sum(1 for v in result.table.cells.values() if v is None)
    print(f"error table written to {config.output_dir}/error_table.csv "
          f"({absent} absent cells)")
    return EXIT_OK


def cmd_report(args) -> int:
    config = _load_config(args)
    payload = report(config)
    print(f"report written to {config.output_dir}/report.json")
    if "friedman" in payload:
        fr = payload["friedman"]
        print(f"Friedman statistic {fr['statistic']:.4f} (df={fr['df']}), "
              f"significant: {fr['significant']}")
    if "critical_difference" in payload:
        print(f"critical difference: {payload['critical_difference']:.4f}")
    for note in payload.get("notes", []):
        print(f"note: {note}")
    return EXIT_OK


def cmd_landmark(args) -> int:
    config = _load_config(args)
    dataset = load_csv(args.dataset)
    base = MetaKnowledgeBase.load(config.resolved_metabase_path)
    landmarkers = base.fastest_predictors(config.landmarker_count)
    from .harness import build_space
    budget = Budget.from_seconds(config.budget_seconds)
    _, similarity, _ = design_space(
        base.leave_one_out(dataset.name), build_space(config), dataset,
        landmarkers, args.k, budget, config.seed, config.folds,
        make_clock(config))
    print(json.dumps(similarity.to_dict(), sort_keys=True, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipecull",
        description="pipeline-space culling experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bootstrap",
                       help="build the meta-knowledge base from full runs")
    _add_common(p)
    p.set_defaults(fn=cmd_bootstrap)

    p = sub.add_parser("run", help="execute the scenario grid")
    _add_common(p)
    p.add_argument("--workers", type=int,
                   help="parallel cell workers (default 1)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("report", help="rank results and run the tests")
    _add_common(p)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("landmark",
                       help="probe one dataset and show its best match")
    _add_common(p)
    p.add_argument("--dataset", required=True, help="dataset CSV to probe")
    p.add_argument("--k", type=int, default=4,
                   help="predictors to keep (default 4)")
    p.set_defaults(fn=cmd_landmark)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except HarnessError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, MetabaseError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AnalysisError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
