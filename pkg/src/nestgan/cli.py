"""Command-line harness: train, check, sweep, truncated-gaussian.

Exit codes: 0 success, 1 invariant failure, 2 configuration error,
3 numerical failure.  All outputs are CSV/JSON; runs with identical
config and seeds produce bitwise-identical metric files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .checks import run_checks
from .config import ExperimentConfig
from .errors import ConfigError, ConvergenceFailure, NotPositiveDefinite, Singular
from .metrics import CSV_COLUMNS
from .model import estimate_region_mass
from .training import nested_sgda

MASS_FLOOR = 0.01


def _write_metric_files(out_dir: Path, per_seed_records: dict[int, list]) -> None:
    for seed, records in per_seed_records.items():
        with open(out_dir / f"metrics_seed{seed}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for record in records:
                writer.writerow(record.to_csv_row())
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("seed",) + CSV_COLUMNS)
        for seed in sorted(per_seed_records):
            for record in per_seed_records[seed]:
                writer.writerow([repr(seed)] + record.to_csv_row())


def _train_seeds(config: ExperimentConfig, seeds, checkpoint_every=0, checkpoint_dir=None):
    """Run nested training for each seed; returns (reports, records) maps."""
    reports: dict[int, dict] = {}
    records: dict[int, list] = {}
    for seed in seeds:
        target = config.build_target(seed)
        ck_dir = None
        if checkpoint_every and checkpoint_dir is not None:
            ck_dir = Path(checkpoint_dir) / f"seed{seed}"
        settings = config.settings_for(seed, checkpoint_every, ck_dir)
        _, report = nested_sgda(target, settings)
        reports[seed] = report.summary()
        records[seed] = report.records
    return reports, records


def cmd_train(args) -> int:
    config = ExperimentConfig.load(args.config)
    seeds = [s + args.seed_offset for s in config.seeds]
    budgets = config.resolved_budgets()
    if args.dry_run:
        resolved = dict(budgets)
        resolved["beta"] = config.resolved_beta()
        resolved["mu"] = config.mu if config.mu is not None else "auto"
        resolved["seeds"] = seeds
        print(json.dumps(resolved, indent=2))
        return 0
    out_dir = Path(args.out)
    started = time.perf_counter()
    reports, records = _train_seeds(
        config, seeds, args.checkpoint_every, out_dir if args.checkpoint_every else None
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_metric_files(out_dir, records)
    summary = {
        "config": config.to_dict(),
        "config_hash": config.content_hash(),
        "budgets": budgets,
        "beta": config.resolved_beta(),
        "seed_offset": args.seed_offset,
        "results": {str(seed): reports[seed] for seed in sorted(reports)},
        "total_wall_time": time.perf_counter() - started,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    finals = [reports[s]["final_surrogate_tv"] for s in reports]
    print(f"trained {len(seeds)} seed(s); median surrogate_tv = {float(np.median(finals)):.4f}")
    return 0


def cmd_check(args) -> int:
    results = run_checks(level=args.level, corrupt=args.corrupt)
    width = max(len(r.name) for r in results)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(r.name for r in failed)}")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def cmd_sweep(args) -> int:
    config = ExperimentConfig.load(args.config)
    grid = config.sweep.get(args.axis)
    if not grid:
        raise ConfigError(f"sweep axis {args.axis!r} has no grid in the config")
    out_dir = Path(args.out)
    rows = []
    for value in grid:
        variant = dict(config.to_dict())
        variant.pop("sweep", None)
        if args.axis == "samples":
            variant["k"] = int(value)
        elif args.axis == "dim":
            variant["dim"] = int(value)
            if variant.get("sigma_star", {}).get("kind") == "explicit":
                raise ConfigError("dim sweep cannot reuse an explicit sigma_star")
        elif args.axis == "epsilon":
            variant["epsilon"] = float(value)
        var_config = ExperimentConfig.from_dict({**variant, "sweep": {}})
        seeds = [s + args.seed_offset for s in var_config.seeds]
        reports, _ = _train_seeds(var_config, seeds)
        for seed in sorted(reports):
            rep = reports[seed]
            rows.append(
                [
                    repr(value),
                    repr(seed),
                    repr(rep["final_surrogate_tv"]),
                    repr(rep["target_samples"]),
                    repr(rep["outer_iterations"]),
                ]
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis_value", "seed", "final_surrogate_tv", "samples", "iterations"])
        writer.writerows(rows)
    print(f"swept {args.axis} over {len(grid)} values; wrote {out_dir / 'sweep.csv'}")
    return 0


def cmd_truncated_gaussian(args) -> int:
    config = ExperimentConfig.load(args.config)
    if config.activation.get("kind") != "identity_box":
        raise ConfigError("truncated-gaussian mode requires the identity_box activation")
    probe_target = config.build_target(config.seeds[0])
    from .rng import RngStream

    mass, _ = estimate_region_mass(
        probe_target.sqrt_sigma, probe_target.activation, 100_000, RngStream(config.seeds[0], 13)
    )
    if mass < MASS_FLOOR:
        raise ConfigError(
            f"box mass {mass:.4f} under the target is below {MASS_FLOOR}; "
            "truncation this severe leaves the learner without usable samples"
        )
    print(f"estimated box mass under target: {mass:.4f}")
    return cmd_train(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nestgan",
        description="Train one-layer generators against quadratic discriminators "
        "by nested stochastic gradient descent-ascent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run training for every configured seed")
    train.add_argument("--config", required=True)
    train.add_argument("--out", default="out")
    train.add_argument("--seed-offset", type=int, default=0)
    train.add_argument("--dry-run", action="store_true")
    train.add_argument("--checkpoint-every", type=int, default=0)
    train.set_defaults(func=cmd_train)

    check = sub.add_parser("check", help="run the property suites")
    check.add_argument("--level", choices=("quick", "full"), default="quick")
    check.add_argument("--corrupt", default=None, help=argparse.SUPPRESS)  # test hook
    check.set_defaults(func=cmd_check)

    sweep = sub.add_parser("sweep", help="train across a budget grid")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", default="out")
    sweep.add_argument("--axis", choices=("samples", "dim", "epsilon"), required=True)
    sweep.add_argument("--seed-offset", type=int, default=0)
    sweep.set_defaults(func=cmd_sweep)

    trunc = sub.add_parser(
        "truncated-gaussian", help="covariance recovery under box truncation"
    )
    trunc.add_argument("--config", required=True)
    trunc.add_argument("--out", default="out")
    trunc.add_argument("--seed-offset", type=int, default=0)
    trunc.add_argument("--dry-run", action="store_true")
    trunc.add_argument("--checkpoint-every", type=int, default=0)
    trunc.set_defaults(func=cmd_truncated_gaussian)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (Singular, NotPositiveDefinite, ConvergenceFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
