"""Command-line front end.

Subcommands: solve (one slot), round (full round -> CSV), oracle (grid
cross-check on a small slot), check (re-audit a stored solution), report
(matched-seed scenario matrix -> CSVs + figures). Errors print one
machine-readable line to stderr: `ehwsn-error: category=<cat> <detail>` with
exit codes config=2, infeasible=3, solver=4, io=5.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, load_scenario
from .oracle import brute_force_solve
from .simulate import (
    build_slot_problem,
    export_results,
    run_round,
    run_slot,
    solution_from_dict,
    solution_to_dict,
)
from .solver import (
    InfeasibleProblemError,
    SolverError,
    kkt_report,
    solve_no_transfer,
    solve_with_transfer,
)

__all__ = ["main", "build_parser"]

_KKT_BAR = 1e-5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehwsn",
        description="Delay-minimal power allocation and energy transfer "
        "for energy-harvesting sensor networks",
    )
    parser.add_argument("--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON path")
    common.add_argument("--channel", choices=["oc", "ifc"], help="override channel mode")
    common.add_argument("--transfer", choices=["on", "off"], help="override transfer mode")
    common.add_argument("--seed-gains", type=int, help="override gain seed")
    common.add_argument("--seed-flows", type=int, help="override flow seed")
    common.add_argument("--seed-energy", type=int, help="override energy seed")
    common.add_argument("--tol", type=float, help="override solver duality-gap target")
    common.add_argument("--slots", type=int, help="override slots per round")

    p_solve = sub.add_parser("solve", parents=[common], help="solve one schedule slot")
    p_solve.add_argument("--slot", type=int, default=0, help="schedule slot index")
    p_solve.add_argument("--out", help="write the solution as JSON for later `check`")

    p_round = sub.add_parser("round", parents=[common], help="run a data collection round")
    p_round.add_argument("--out", default="round.csv", help="per-link CSV path")

    p_oracle = sub.add_parser(
        "oracle", parents=[common], help="grid-search cross-check on a small slot"
    )
    p_oracle.add_argument("--slot", type=int, default=0, help="schedule slot index")

    p_check = sub.add_parser("check", help="re-audit a stored solution")
    p_check.add_argument("--solution", required=True, help="JSON written by solve --out")

    p_report = sub.add_parser(
        "report", parents=[common], help="matched-seed scenario matrix with figures"
    )
    p_report.add_argument("--out", default="report", help="output directory")
    return parser


def _apply_overrides(config: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    updates: dict = {}
    if args.channel is not None:
        updates["channel_mode"] = "orthogonal" if args.channel == "oc" else "interference"
    if args.transfer is not None:
        updates["transfer_on"] = args.transfer == "on"
    if args.seed_gains is not None:
        updates["seed_gains"] = args.seed_gains
    if args.seed_flows is not None:
        updates["seed_flows"] = args.seed_flows
    if args.seed_energy is not None:
        updates["seed_energy"] = args.seed_energy
    if args.tol is not None:
        updates["gap_tol"] = args.tol
    if args.slots is not None:
        updates["slots"] = args.slots
    return dataclasses.replace(config, **updates) if updates else config


def _cmd_solve(args) -> int:
    config = _apply_overrides(load_scenario(args.config), args)
    result = run_slot(config, args.slot)
    if not result.feasible:
        detail = "; ".join(result.infeasible_reasons) or "no strict interior"
        print(f"ehwsn-error: category=infeasible {detail}", file=sys.stderr)
        return 3
    sol, problem = result.solution, result.problem
    print(f"slot {args.slot}: {problem.n_links} links, "
          f"{problem.n_transfers} energy links, objective {sol.objective:.6g}")
    print(f"{'link':>8} {'flow':>10} {'power':>10} {'sinr':>12} {'capacity':>10} {'delay':>10}")
    for l in range(problem.n_links):
        print(
            f"{problem.link_ids[l]:>8} {problem.flows[l]:>10.4g} "
            f"{sol.power.p[l]:>10.4g} {sol.sinr[l]:>12.6g} "
            f"{sol.capacity_approx[l]:>10.4g} {sol.delays[l]:>10.4g}"
        )
    if problem.n_transfers:
        moved = ", ".join(
            f"{el.donor}->{el.recipient}: {sol.transfers[q]:.4g}"
            for q, el in enumerate(problem.energy_links)
        )
        print(f"transfers: {moved}")
    rep = result.report
    print(
        f"kkt: stationarity {rep.max_stationarity:.3g}, "
        f"comp-slack {rep.max_comp_slack:.3g}, gap {sol.duality_gap:.3g}, "
        f"termination {sol.termination}"
    )
    if result.low_sinr_links:
        print(
            f"ehwsn-warning: sinr below {config.high_sinr_threshold:g} on "
            f"{', '.join(result.low_sinr_links)} (approximation quality degrades)",
            file=sys.stderr,
        )
    if args.out:
        Path(args.out).write_text(
            json.dumps(solution_to_dict(result), indent=2), encoding="utf-8"
        )
        print(f"solution written to {args.out}")
    return 0


def _cmd_round(args) -> int:
    config = _apply_overrides(load_scenario(args.config), args)
    result = run_round(config)
    links_path, summary_path = export_results(result, args.out)
    infeasible = [s.slot_index for s in result.slots if not s.feasible]
    print(f"round: {len(result.slots)} slots, "
          f"final cumulative delay {result.cumulative_delay[-1]:.6g}")
    for slot, cum in zip(result.slots, result.cumulative_delay):
        mark = "" if slot.feasible else "  [infeasible, skipped]"
        print(f"  slot {slot.slot_index}: delay {slot.delay:.6g} cumulative {cum:.6g}{mark}")
    if infeasible:
        print(f"ehwsn-warning: infeasible slots {infeasible}", file=sys.stderr)
    print(f"links csv: {links_path}")
    print(f"summary csv: {summary_path}")
    return 0


def _cmd_oracle(args) -> int:
    config = _apply_overrides(load_scenario(args.config), args)
    problem = build_slot_problem(config, args.slot)
    try:
        oracle = brute_force_solve(problem, transfer=config.transfer_on)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if config.transfer_on and problem.n_transfers:
        sol = solve_with_transfer(problem, tol=config.gap_tol)
    else:
        sol = solve_no_transfer(problem, tol=config.gap_tol)
    tolerance = 1e-3 * (1.0 + abs(oracle.value))
    gap = sol.objective - oracle.value
    print(f"solver objective: {sol.objective:.8g}")
    print(f"oracle objective: {oracle.value:.8g}  ({oracle.evaluations} evaluations)")
    print(f"solver - oracle:  {gap:+.3g}  (tolerance {tolerance:.3g})")
    print(f"oracle powers:    {np.array2string(oracle.powers, precision=5)}")
    if oracle.transfers.size:
        print(f"oracle transfers: {np.array2string(oracle.transfers, precision=5)}")
    if gap > tolerance:
        raise SolverError(
            f"solver objective exceeds the grid oracle by {gap:.3g} (> {tolerance:.3g})"
        )
    print("agreement: ok")
    return 0


def _cmd_check(args) -> int:
    try:
        raw = json.loads(Path(args.solution).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"solution file is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read solution file: {exc}") from exc
    try:
        problem, solution = solution_from_dict(raw)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed solution file: {exc}") from exc
    rep = kkt_report(problem, solution)

    def _peak(values) -> float:
        if isinstance(values, dict):
            values = list(values.values())
        arr = np.asarray(values, dtype=float)
        return float(np.max(np.abs(arr))) if arr.size else 0.0

    checks = [
        ("stationarity(power)", _peak(rep.stationarity_power), _KKT_BAR),
        ("stationarity(transfer)", _peak(rep.stationarity_transfer), _KKT_BAR),
        ("comp-slack(budget)", _peak(rep.comp_slack_budget), _KKT_BAR),
        ("comp-slack(rate)", _peak(rep.comp_slack_rate), _KKT_BAR),
        ("comp-slack(transfer)", _peak(rep.comp_slack_transfer), _KKT_BAR),
        ("rate-multiplier-zero", rep.rate_multiplier_max, 0.0),
    ]
    failed = False
    for name, value, bar in checks:
        ok = value <= bar
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3g} (<= {bar:g})")
    if rep.marginal_value_spread is not None:
        ok = rep.marginal_value_spread <= _KKT_BAR
        failed |= not ok
        print(
            f"{'PASS' if ok else 'FAIL'} marginal-value spread: "
            f"{rep.marginal_value_spread:.3g} (<= {_KKT_BAR:g})"
        )
    if failed:
        raise SolverError("stored solution fails its optimality audit")
    return 0


def _cmd_report(args) -> int:
    from .report import run_report  # defer: pulls in matplotlib

    config = _apply_overrides(load_scenario(args.config), args)
    written = run_report(config, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "round": _cmd_round,
    "oracle": _cmd_oracle,
    "check": _cmd_check,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s %(levelname)s %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"ehwsn-error: category=config {exc}", file=sys.stderr)
        return 2
    except InfeasibleProblemError as exc:
        print(f"ehwsn-error: category=infeasible {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"ehwsn-error: category=solver {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"ehwsn-error: category=io {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
