"""Command-line harness: scenario runs, bounds-only evaluation, config lint.

Exit codes: 0 on success, 1 for configuration errors, 2 when the per-point
trial failure rate exceeds the configured threshold.
"""

from __future__ import annotations

import argparse
import sys
import time

from .bench import RmseTable, emit_outputs, run_scenario
from .config import ConfigError, load_scenario, scenario_at

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hrisloc",
        description="Near-field localization workbench: Monte Carlo runs and bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario sweep and write CSV outputs")
    run_p.add_argument("config", help="scenario YAML file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--workers", type=int, default=1, help="trial worker processes")
    run_p.add_argument(
        "--full-scale",
        action="store_true",
        help="apply the scenario's full-scale overrides (long-running)",
    )
    run_p.add_argument("--quiet", action="store_true", help="suppress progress output")

    bounds_p = sub.add_parser("bounds", help="evaluate theoretical bounds only")
    bounds_p.add_argument("config", help="scenario YAML file")
    bounds_p.add_argument("--out", required=True, help="output directory")
    bounds_p.add_argument("--full-scale", action="store_true")

    val_p = sub.add_parser("validate", help="lint a scenario file")
    val_p.add_argument("config", help="scenario YAML file")
    return parser


def _cmd_run(args) -> int:
    try:
        config = load_scenario(args.config, full_scale=args.full_scale)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    t0 = time.time()

    def progress(sweep_index, done):
        if not args.quiet and done % 25 == 0:
            print(
                f"  sweep point {sweep_index + 1}: {done}/{config.run.trials} trials "
                f"({time.time() - t0:.0f}s)",
                flush=True,
            )

    table, results = run_scenario(config, workers=args.workers, progress=progress)
    csv_path, plot_path = emit_outputs(table, args.out)
    if not args.quiet:
        print(f"wrote {csv_path} and {plot_path}")
    worst = 0.0
    for point_results in results:
        if point_results:
            worst = max(worst, sum(r.failed for r in point_results) / len(point_results))
    if worst > config.run.failure_threshold:
        print(
            f"failure rate {worst:.1%} exceeds threshold "
            f"{config.run.failure_threshold:.1%}",
            file=sys.stderr,
        )
        return 2
    return 0


def _cmd_bounds(args) -> int:
    try:
        config = load_scenario(args.config, full_scale=args.full_scale)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    from .bench import _bounds_row

    table = RmseTable()
    for sweep_index, value in enumerate(config.sweep.points()):
        point = scenario_at(config, value)
        row = {
            "sweep_value": value,
            "n_trials": 0,
            "n_failed": 0,
        }
        row.update(_bounds_row(point, []))
        table.add_row(row)
    csv_path, _ = emit_outputs(table, args.out)
    print(f"wrote {csv_path}")
    return 0


def _cmd_validate(args) -> int:
    try:
        config = load_scenario(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    print(
        f"ok: {config.name}: {config.geometry.num_x}x{config.geometry.num_z} HRIS, "
        f"{len(config.sources)} sources, {len(config.bs)} BS, "
        f"sweep {config.sweep.parameter} x{len(config.sweep.points())}, "
        f"{config.run.trials} trials"
    )
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        code = _cmd_run(args)
    elif args.command == "bounds":
        code = _cmd_bounds(args)
    else:
        code = _cmd_validate(args)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
