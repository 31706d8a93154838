"""Command-line front end.

Subcommands: solve, bounds, evaluate, simulate, sweep, compare, figure.
Configuration is a flat key=value file (--config) plus positional key=value
overrides; every key defaults to the reference parameter set, so each
subcommand runs with no arguments. Datasets go to stdout or to the path in
the ``out`` key as CSV or JSON, always headed by the tool version and the
config hash; ``figure`` additionally renders a PNG next to the CSV. The CLI
adds no math: every emitted number is a library call away. Failures exit
nonzero with a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .adaptive import adaptive_thresholds, pe_adaptive
from .core import (
    FeasibilityError,
    IncrementSchedule,
    NumericError,
    ParameterError,
    ThresholdPolicy,
    ml_fixed_threshold,
    validate_schedule,
)
from .experiments import (
    COLUMNS,
    FIGURE_NAMES,
    build_config,
    compare,
    config_hash,
    csv_lines,
    figure_dataset,
    format_cell,
    parse_config,
    run_sweep,
)
from .noisi import (
    boundary_sequence,
    increment_count_bound,
    pe_bounds,
    pe_schedule,
    solve_increments,
)
from .plots import render_figure
from .simulate import make_strategy, simulate


def _raw_config(args) -> dict:
    raw: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw.update(parse_config(fh.read()))
    if args.overrides:
        raw.update(parse_config("\n".join(args.overrides)))
    return raw


def _emit(columns, rows, raw, config, comments=()):
    lines = csv_lines(columns, rows, __version__, config_hash(raw))
    body = [lines[0]] + [f"# {c}" for c in comments] + lines[1:]
    if config.fmt == "json":
        payload = {
            "version": __version__,
            "config": config_hash(raw),
            "comments": list(comments),
            "columns": list(columns),
            "rows": [[format_cell(row[c]) for c in columns] for row in rows],
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        text = "\n".join(body) + "\n"
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(config.out)
    else:
        sys.stdout.write(text)


def _fixed_policy(config):
    th = config.threshold
    if th is None:
        th = ml_fixed_threshold(config.params.M, config.params.lam)
    return ThresholdPolicy.fixed(th)


def cmd_solve(args) -> None:
    raw = _raw_config(args)
    config = build_config(raw)
    params = config.params
    policy = _fixed_policy(config)
    schedule, cert = solve_increments(params, policy)
    bound = boundary_sequence(params, policy)
    report = pe_schedule(params, schedule, policy)
    columns = ("j", "delta", "boundary", "threshold")
    rows = []
    for j in range(1, schedule.J + 2):
        rows.append(
            {
                "j": j,
                "delta": schedule.delta(j),
                "boundary": bound.a[j - 1] if j - 1 < len(bound.a) else "",
                "threshold": policy.at(j),
            }
        )
    comments = (
        f"J={schedule.J} total={format_cell(schedule.total)} "
        f"pe={format_cell(report.pe_total)} mu={format_cell(cert.mu)} "
        f"residual={format_cell(cert.residual)} "
        f"n_bound={increment_count_bound(params, policy)}",
    )
    _emit(columns, rows, raw, config, comments)


def cmd_bounds(args) -> None:
    raw = _raw_config(args)
    config = build_config(raw)
    params = config.params
    policy = _fixed_policy(config)
    bound = boundary_sequence(params, policy)
    lower, upper = pe_bounds(params, policy)
    columns = ("j", "delta_lower", "delta_upper")
    rows = []
    for j in range(1, bound.J + 1):
        rows.append(
            {
                "j": j,
                "delta_lower": bound.a[j] if j < len(bound.a) else 0.0,
                "delta_upper": bound.a[j - 1],
            }
        )
    gap = (upper - lower) / upper if upper > 0 else 0.0
    comments = (
        f"pe_lower={format_cell(lower)} pe_upper={format_cell(upper)} "
        f"rel_gap={format_cell(gap)} J={bound.J}",
    )
    _emit(columns, rows, raw, config, comments)


def cmd_evaluate(args) -> None:
    raw = _raw_config(args)
    config = build_config(raw)
    params = config.params
    schedule = IncrementSchedule(config.deltas)
    feas = validate_schedule(schedule, params.B_M)
    # report error rates even for over-budget schedules; the verdict lands
    # in the feasible flag instead of an exception
    analysis = params if feas.feasible else params.with_storage(schedule.total)
    if config.policy == "per_state":
        policy = adaptive_thresholds(analysis, schedule)
        report = pe_adaptive(analysis, schedule, policy)
    else:
        policy = _fixed_policy(config)
        report = pe_schedule(analysis, schedule, policy)
    columns = ("state", "weight", "pe_state", "threshold")
    rows = [
        {"state": j, "weight": w, "pe_state": pe, "threshold": policy.at(j)}
        for j, w, pe in report.per_state
    ]
    comments = (
        f"pe={format_cell(report.pe_total)} J={schedule.J} "
        f"total={format_cell(schedule.total)} feasible={int(feas.feasible)}",
    )
    _emit(columns, rows, raw, config, comments)


def cmd_simulate(args) -> None:
    raw = _raw_config(args)
    config = build_config(raw)
    params = config.params
    n_slots = config.mc_slots if config.mc_slots else 10_000
    columns = ("strategy", "slots", "errors", "ber", "ci_half_width", "violations", "seed")
    rows = []
    for i, name in enumerate(config.strategies):
        spec = make_strategy(name, params)
        seed = config.seed + i
        report = simulate(
            spec,
            params,
            n_slots,
            seed,
            genie=config.genie,
            allow_infeasible=config.allow_infeasible or name == "S6",
        )
        rows.append(
            {
                "strategy": name,
                "slots": report.slots,
                "errors": report.errors,
                "ber": report.ber,
                "ci_half_width": report.ci_half_width,
                "violations": report.feasibility_violations,
                "seed": seed,
            }
        )
    _emit(columns, rows, raw, config, ())


def cmd_sweep(args) -> None:
    raw = _raw_config(args)
    config = build_config(raw)
    rows = run_sweep(config)
    _emit(COLUMNS, rows, raw, config, ())


def cmd_compare(args) -> None:
    raw = _raw_config(args)
    config = build_config(raw)
    columns, rows = compare(config)
    _emit(columns, rows, raw, config, ())


def cmd_figure(args) -> None:
    overrides = _raw_config(args)
    raw, columns, rows = figure_dataset(args.name, overrides)
    config = build_config(raw)
    out_dir = config.out or "figures"
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{args.name}.csv")
    text = "\n".join(csv_lines(columns, rows, __version__, config_hash(raw))) + "\n"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    png_path = os.path.join(out_dir, f"{args.name}.png")
    render_figure(args.name, rows, config.sweep, png_path)
    print(csv_path)
    print(png_path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relmod",
        description="Release-duration schedules for a storage-limited Poisson link.",
        epilog=(
            "Config keys (key=value overrides or --config file): beta, T, T_M, "
            "lam, hitting, storage_override, strategies, sweep, grid, mc_slots, "
            "mc_strategies, seed, bound_k, genie, allow_infeasible, deltas, "
            "policy, threshold, out, format."
        ),
    )
    parser.add_argument("--version", action="version", version=f"relmod {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("overrides", nargs="*", help="key=value overrides")

    common(sub.add_parser("solve", help="optimal increments under a fixed threshold"))
    common(sub.add_parser("bounds", help="schedule and error-probability bounds"))
    common(sub.add_parser("evaluate", help="error probability of a given schedule"))
    common(sub.add_parser("simulate", help="Monte Carlo run per strategy"))
    common(sub.add_parser("sweep", help="parameter sweep dataset"))
    common(sub.add_parser("compare", help="strategy ordering table"))
    fig = sub.add_parser("figure", help="regenerate a figure dataset and PNG")
    fig.add_argument("name", choices=FIGURE_NAMES)
    common(fig)
    return parser


COMMANDS = {
    "solve": cmd_solve,
    "bounds": cmd_bounds,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "figure": cmd_figure,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ParameterError, FeasibilityError, NumericError, OSError, ValueError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
