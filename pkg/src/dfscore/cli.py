"""Command-line interface for experiment runs and sweeps.

Subcommands: ``estimate``, ``sweep-tau``, ``sweep-n``, ``sweep-lag``,
``compare-fd``, ``oracle``.  All take ``--config`` and ``--out``; ``--seed``
overrides the config's base seed, ``--threads`` sizes the worker pool, and
``--timings`` opts into writing wall-clock times (which breaks byte-level
reproducibility of the output and is therefore off by default).

Exit codes: 0 success, 2 config error, 3 all runs failed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import (
    ConfigError,
    compare_fd,
    fit_rate_slope,
    load_config,
    run_experiment,
    write_compare_csv,
    write_records_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfscore",
        description="Derivative-free score / observed-information experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("estimate", "single grid point, R replications"),
        ("sweep-tau", "sweep the shrinkage scale grid"),
        ("sweep-n", "sweep the sample/particle count grid"),
        ("sweep-lag", "sweep the fixed-lag grid"),
        ("compare-fd", "finite differences vs proposed at matched budget"),
        ("oracle", "emit oracle score and information for the model"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the INI config")
        cmd.add_argument("--out", required=True, help="output CSV path")
        cmd.add_argument("--seed", type=int, default=None, help="override base seed")
        cmd.add_argument("--threads", type=int, default=1, help="worker pool size")
        cmd.add_argument(
            "--timings",
            action="store_true",
            help="write wall_time_ms values (output is then not reproducible)",
        )
    return parser


def _check_grids(config, command) -> None:
    if command == "estimate":
        for name, grid in (
            ("tau", config.taus),
            ("n", config.ns),
            ("delta", config.deltas),
            ("h", config.hs),
        ):
            if config.tau_rule and name == "tau":
                continue
            if len(grid) != 1:
                raise ConfigError(
                    f"estimate needs singleton grids; grid.{name} has {len(grid)} points",
                    key=f"grid.{name}",
                )
    sweep_axis = {
        "sweep-tau": ("tau", config.taus),
        "sweep-n": ("n", config.ns),
        "sweep-lag": ("delta", config.deltas),
    }.get(command)
    if sweep_axis is not None:
        name, grid = sweep_axis
        if name == "tau" and config.tau_rule:
            if len(config.ns) < 2:
                raise ConfigError(
                    "sweep-tau with tau_rule needs >= 2 n values", key="grid.n"
                )
            return
        if len(grid) < 2:
            raise ConfigError(
                f"{command} needs >= 2 points in grid.{name}", key=f"grid.{name}"
            )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, base_seed=args.seed)
        if args.command == "oracle":
            config = replace(config, method="oracle", replications=1)
        _check_grids(config, args.command)
        if args.command == "compare-fd":
            records, table = compare_fd(config, threads=args.threads)
            write_compare_csv(table, args.out)
        else:
            records = run_experiment(config, threads=args.threads)
            write_records_csv(records, args.out, timings=args.timings)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"config error: {exc}{key}", file=sys.stderr)
        return EXIT_CONFIG

    produced = [r for r in records if r.error == ""]
    failed = [r for r in records if r.error != ""]
    print(f"wrote {args.out}: {len(records)} rows ({len(failed)} failed)")
    if args.command in ("sweep-tau", "sweep-n") and produced:
        x_field = "tau" if args.command == "sweep-tau" else "n_particles"
        try:
            fit = fit_rate_slope(produced, x_field, "mse")
            print(
                f"log-log MSE slope vs {x_field}: "
                f"{fit.slope:.4f} +/- {fit.stderr:.4f} ({fit.n_points} points)"
            )
        except ValueError:
            pass
    if produced:
        return EXIT_OK
    return EXIT_ALL_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
