"""Command-line interface.

``bapomcp run`` executes a learning experiment and writes the records CSV
(plus a per-episode stats CSV next to it); ``bapomcp verify`` runs the
analytic verification suite and prints measured distances.

Exit codes: 0 success, 2 configuration error, 3 run aborted by belief
deprivation (partial output is still written).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from bapomcp.experiments import (
    ConfigError,
    ExperimentConfig,
    aggregate_stats,
    config_from_mapping,
    emit_csv,
    emit_stats_csv,
    read_config_file,
    run_learning,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bapomcp",
        description="Bayes-adaptive online planning benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a learning experiment and emit CSV")
    run.add_argument("--config", help="key=value config file; flags override it")
    run.add_argument("--domain", choices=("tiger", "sysadmin", "chain"))
    run.add_argument("--n", type=int, help="sysadmin network size")
    run.add_argument("--f", type=float, help="sysadmin failure probability")
    run.add_argument("--planner", choices=("pomcp", "lookahead"))
    run.add_argument(
        "--variants",
        help="planner adaptations, any combination of the letters r, e, l",
    )
    run.add_argument("--sims", type=int, dest="num_sims", help="simulations per plan call")
    run.add_argument("--particles", type=int, help="belief particle count")
    run.add_argument("--episodes", type=int)
    run.add_argument("--runs", type=int, help="independent repeats")
    run.add_argument("--horizon", type=int)
    run.add_argument("--gamma", type=float)
    run.add_argument("--ucb-c", type=float, dest="ucb_c", help="exploration constant override")
    run.add_argument("--lambda", type=int, dest="lam", help="linking-state merge threshold")
    run.add_argument("--depth", type=int, dest="lookahead_depth", help="lookahead depth")
    run.add_argument("--seed", type=int)
    run.add_argument("--time-cap", type=float, dest="time_cap", help="seconds per plan call")
    run.add_argument("--engine", choices=("fast", "reference"))
    run.add_argument("--workers", type=int, help="parallel workers across runs")
    run.add_argument("--out", help="records CSV path")

    verify = sub.add_parser("verify", help="run the analytic verification suite")
    verify.add_argument("--sims", type=int, default=100_000, help="simulations per check")
    verify.add_argument("--depth", type=int, default=3, help="history depth for checks")
    verify.add_argument("--particles", type=int, default=100_000, help="belief-check filter size")
    verify.add_argument("--seed", type=int, default=0)
    return parser


def _run_command(args: argparse.Namespace) -> int:
    values: dict[str, str] = {}
    if args.config:
        values.update(read_config_file(args.config))
    cfg = config_from_mapping(values)
    overrides = {
        key: getattr(args, key)
        for key in (
            "domain", "n", "f", "planner", "variants", "num_sims", "particles",
            "episodes", "runs", "horizon", "gamma", "ucb_c", "lam",
            "lookahead_depth", "seed", "time_cap", "engine", "workers", "out",
        )
        if getattr(args, key) is not None
    }
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    cfg.validate()
    records = run_learning(cfg)
    deprived = any(r.deprived for r in records)
    if cfg.out:
        emit_csv(records, cfg.out)
        stem = cfg.out[: -len(".csv")] if cfg.out.endswith(".csv") else cfg.out
        stats_path = stem + ".stats.csv"
        emit_stats_csv(aggregate_stats(records), stats_path)
        print(f"wrote {len(records)} records to {cfg.out} (stats: {stats_path})")
    overall = float(np.mean([r.ret for r in records]))
    print(
        f"{cfg.domain} {cfg.planner}{'/' + cfg.variants if cfg.variants else ''}: "
        f"{len(records)} episodes over {cfg.runs} runs, mean return {overall:.3f}, "
        f"mean plan time {np.mean([r.mean_action_time_s for r in records]):.4f}s"
    )
    if deprived:
        print("warning: at least one run aborted on belief deprivation", file=sys.stderr)
        return 3
    return 0


def _verify_command(args: argparse.Namespace) -> int:
    from bapomcp.verification import run_verification

    results = run_verification(
        seed=args.seed,
        num_sims=args.sims,
        depth=args.depth,
        filter_size=args.particles,
    )
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}")
        failed += not res.passed
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _run_command(args)
        return _verify_command(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
