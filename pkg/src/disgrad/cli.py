"""Command-line experiment runner.

Subcommands: ``run`` executes a config end to end (CSV + summary JSON on
stdout, optional figures), ``validate`` dry-runs a config's structural and
assumption checks, ``reference`` prints the centralized ground truth, and
``plot`` renders figures from previously written CSVs.

Exit codes: 0 success, 1 check failure or aborted run, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import AssumptionViolation, ConfigError, InvalidParameter, RunAborted
from .experiment import load_config, run_experiment, solve_reference, assemble, validate_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disgrad",
        description="Distributed subgradient experiments with inexact first-order oracles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="path to a JSON experiment config")
    run_p.add_argument("--csv", help="override the metrics CSV output path")
    run_p.add_argument("--seed-override", type=int, help="master seed replacing all config seeds")
    run_p.add_argument("--horizon", type=int, help="override the number of rounds")
    run_p.add_argument("--figures", help="directory for rendered figures")

    val_p = sub.add_parser("validate", help="check a config without running it")
    val_p.add_argument("config")

    ref_p = sub.add_parser("reference", help="print the centralized reference solution")
    ref_p.add_argument("config")

    plot_p = sub.add_parser("plot", help="render figures from run CSVs")
    plot_p.add_argument("csv", help="metrics CSV written by `run`")
    plot_p.add_argument("--trajectory", help="trajectory CSV written by `run`")
    plot_p.add_argument("--out", default="figures", help="output directory")
    plot_p.add_argument("--f-star", type=float, help="reference optimal value to mark")
    plot_p.add_argument(
        "--coords", type=int, nargs="*",
        help="zero-based components to plot (default: 3rd and 4th when available)",
    )
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    outcome = run_experiment(
        args.config,
        csv_override=args.csv,
        horizon_override=args.horizon,
        seed_override=args.seed_override,
        figures_override=args.figures,
    )
    print(json.dumps(outcome.summary, indent=2))
    return outcome.exit_code


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    report = validate_config(cfg)
    print(
        json.dumps(
            {
                "passed": report.passed,
                "entries": [
                    {"level": e.level, "check": e.check, "message": e.message}
                    for e in report.entries
                ],
            },
            indent=2,
        )
    )
    return 0 if report.passed else 1


def _cmd_reference(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    assembled = assemble(cfg)
    solution = solve_reference(cfg, assembled.family)
    print(
        json.dumps(
            {
                "x_star": [float(v) for v in solution.x_star],
                "f_star": solution.f_star,
                "gap_bound": solution.gap_bound,
                "iterations_used": solution.iterations_used,
                "converged": solution.converged,
            },
            indent=2,
        )
    )
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    from .plots import render_run_figures

    paths = render_run_figures(
        args.csv,
        args.trajectory,
        args.out,
        f_star=args.f_star,
        coords=args.coords if args.coords else None,
    )
    print(json.dumps({"figures": [str(p) for p in paths]}, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "reference": _cmd_reference,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AssumptionViolation, InvalidParameter) as exc:
        print(f"invalid experiment: {exc}", file=sys.stderr)
        return 2
    except RunAborted as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
