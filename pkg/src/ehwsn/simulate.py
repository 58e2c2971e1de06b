"""Scenario runner: per-slot problems, full rounds, CSV export.

Randomness is split into three independent streams (gains, flows, energy) so
ablations change exactly one factor: flows are drawn once per round from the
flows seed, while gains and arrivals are drawn per slot from [seed, slot].
Orthogonal-channel runs draw the same gain matrix as interference runs and
then zero the off-diagonal, keeping the primary gains matched.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ChannelState, sample_gains
from .config import ConfigError, ScenarioConfig
from .energy import EnergyState, sample_arrivals
from .problem import SlotProblem
from .solver import (
    InfeasibleProblemError,
    KktReport,
    Solution,
    kkt_report,
    solve_no_transfer,
    solve_with_transfer,
)
from .topology import build_incidence

__all__ = [
    "SlotResult",
    "RoundResult",
    "sample_flows",
    "build_slot_problem",
    "run_slot",
    "run_round",
    "export_results",
    "solution_to_dict",
    "solution_from_dict",
]


@dataclass(frozen=True, eq=False)
class SlotResult:
    slot_index: int
    problem: SlotProblem
    solution: Solution | None
    report: KktReport | None
    feasible: bool
    delay: float
    low_sinr_links: tuple[str, ...]
    infeasible_reasons: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class RoundResult:
    slots: tuple[SlotResult, ...]
    cumulative_delay: np.ndarray
    flows: np.ndarray

    @property
    def all_feasible(self) -> bool:
        return all(s.feasible for s in self.slots)


def sample_flows(config: ScenarioConfig) -> np.ndarray:
    """Per-link data flows for one round: U(0,1] draws overridden by any
    explicit entries. Drawn once per round so every slot of a matched pair
    sees identical traffic."""
    n = len(config.topology.data_links)
    if config.seed_flows is not None:
        rng = np.random.default_rng([config.seed_flows])
        flows = 1.0 - rng.random(n)
    else:
        flows = np.zeros(n)
    if config.explicit_flows:
        labels = [config.topology.link_label(i) for i in range(n)]
        for i, label in enumerate(labels):
            if label in config.explicit_flows:
                flows[i] = config.explicit_flows[label]
    return flows


def _slot_gains(config: ScenarioConfig, slot_index: int, n: int) -> np.ndarray:
    if config.explicit_gains is not None:
        if config.explicit_gains.shape != (n, n):
            raise ConfigError(
                f"explicit gains are {config.explicit_gains.shape}, slot {slot_index} "
                f"has {n} links"
            )
        gains = config.explicit_gains.copy()
    else:
        rng = np.random.default_rng([config.seed_gains, slot_index])
        gains = sample_gains(rng, n, gain_high=config.gain_high).gains
    if config.channel_mode == "orthogonal":
        gains = np.diag(np.diag(gains))
    return gains


def _slot_energy(config: ScenarioConfig, slot_index: int) -> EnergyState:
    topo = config.topology
    if config.explicit_energy is not None and config.seed_energy is None:
        values = np.zeros(len(topo.nodes))
        for i, node in enumerate(topo.nodes):
            if node != topo.sink:
                values[i] = config.explicit_energy[node]
        return EnergyState(values=values, cap=config.battery_cap)
    rng = np.random.default_rng([config.seed_energy, slot_index])
    state = sample_arrivals(rng, topo, rate=config.arrival_rate, cap=config.battery_cap)
    if config.explicit_energy:
        values = state.values.copy()
        for i, node in enumerate(topo.nodes):
            if node in config.explicit_energy:
                values[i] = config.explicit_energy[node]
        state = EnergyState(values=values, cap=config.battery_cap)
    return state


def build_slot_problem(
    config: ScenarioConfig,
    slot_index: int,
    *,
    flows: np.ndarray | None = None,
    energy: EnergyState | None = None,
) -> SlotProblem:
    """Assemble the optimization problem for one schedule slot.

    slot_index beyond the schedule wraps around (a round may cycle the
    schedule); gains and arrivals are still drawn from the absolute index so
    repeated visits to a slot see fresh randomness.
    """
    topo = config.topology
    plan = config.schedule.slots[slot_index % len(config.schedule)]
    if flows is None:
        flows = sample_flows(config)
    if energy is None:
        energy = _slot_energy(config, slot_index)

    link_ids = tuple(topo.link_label(i) for i in plan.data_links)
    link_sources = tuple(topo.data_links[i][0] for i in plan.data_links)
    slot_flows = np.array([flows[i] for i in plan.data_links])
    channel = ChannelState(
        gains=_slot_gains(config, slot_index, len(plan.data_links)),
        noise=np.full(len(plan.data_links), config.noise),
    )
    energy_links = (
        tuple(topo.energy_links[q] for q in plan.energy_links)
        if config.transfer_on
        else ()
    )
    involved = set(link_sources) | {el.donor for el in energy_links} | {
        el.recipient for el in energy_links
    }
    node_index = {n: i for i, n in enumerate(topo.nodes)}
    node_energy = {
        n: float(energy.values[node_index[n]]) for n in involved if n != topo.sink
    }
    return SlotProblem(
        link_ids=link_ids,
        link_sources=link_sources,
        flows=slot_flows,
        channel=channel,
        node_energy=node_energy,
        energy_links=energy_links,
    )


def run_slot(
    config: ScenarioConfig,
    slot_index: int,
    *,
    flows: np.ndarray | None = None,
    energy: EnergyState | None = None,
) -> SlotResult:
    """Solve one slot; an infeasible draw is reported, not raised."""
    problem = build_slot_problem(config, slot_index, flows=flows, energy=energy)
    try:
        if config.transfer_on and problem.n_transfers:
            solution = solve_with_transfer(problem, tol=config.gap_tol)
        else:
            solution = solve_no_transfer(problem, tol=config.gap_tol)
    except InfeasibleProblemError as exc:
        return SlotResult(
            slot_index=slot_index,
            problem=problem,
            solution=None,
            report=None,
            feasible=False,
            delay=math.nan,
            low_sinr_links=(),
            infeasible_reasons=tuple(exc.report.reasons),
        )
    report = kkt_report(problem, solution)
    low = tuple(
        problem.link_ids[l]
        for l in range(problem.n_links)
        if solution.sinr[l] < config.high_sinr_threshold
    )
    return SlotResult(
        slot_index=slot_index,
        problem=problem,
        solution=solution,
        report=report,
        feasible=True,
        delay=solution.objective,
        low_sinr_links=low,
    )


def _leftover_energy(
    config: ScenarioConfig, state: EnergyState, result: SlotResult
) -> np.ndarray:
    """Per-node unspent energy after a slot, for carry-over accounting."""
    topo = config.topology
    if result.solution is None:
        return state.values.copy()
    matrices = build_incidence(topo)
    p_full = np.zeros(len(topo.data_links))
    plan = config.schedule.slots[result.slot_index % len(config.schedule)]
    for pos, link_idx in enumerate(plan.data_links):
        p_full[link_idx] = result.solution.power.p[pos]
    x_full = np.zeros(len(topo.energy_links))
    for pos, q in enumerate(plan.energy_links):
        if pos < result.solution.transfers.size:
            x_full[q] = result.solution.transfers[pos]
    slack = state.values - matrices.K @ p_full
    if matrices.B.size:
        slack = slack - matrices.B @ x_full
    return np.clip(slack, 0.0, config.battery_cap)


def run_round(config: ScenarioConfig) -> RoundResult:
    """Run config.slots consecutive slots, accumulating total delay.

    Infeasible slots keep their NaN delay in the per-slot record but add zero
    to the cumulative series, so the series stays finite and non-decreasing.
    """
    flows = sample_flows(config)
    results: list[SlotResult] = []
    cumulative: list[float] = []
    running = 0.0
    leftover: np.ndarray | None = None
    for slot_index in range(config.slots):
        state = _slot_energy(config, slot_index)
        if config.carry_over and leftover is not None:
            state = EnergyState(
                values=np.minimum(state.values + leftover, config.battery_cap),
                cap=config.battery_cap,
            )
        result = run_slot(config, slot_index, flows=flows, energy=state)
        if config.carry_over:
            leftover = _leftover_energy(config, state, result)
        results.append(result)
        if result.feasible:
            running += result.delay
        cumulative.append(running)
    return RoundResult(
        slots=tuple(results),
        cumulative_delay=np.array(cumulative),
        flows=flows,
    )


def solution_to_dict(result: SlotResult) -> dict:
    """JSON-serializable snapshot of a solved slot, complete enough to rebuild
    the problem and re-audit the solution later."""
    if result.solution is None:
        raise ValueError("cannot serialize an infeasible slot")
    problem, sol = result.problem, result.solution
    return {
        "schema_version": 1,
        "slot": result.slot_index,
        "link_ids": list(problem.link_ids),
        "link_sources": list(problem.link_sources),
        "flows": problem.flows.tolist(),
        "gains": problem.channel.gains.tolist(),
        "noise": problem.channel.noise.tolist(),
        "node_energy": {str(k): v for k, v in problem.node_energy.items()},
        "energy_links": [
            [el.donor, el.recipient, el.efficiency] for el in problem.energy_links
        ],
        "power": sol.power.p.tolist(),
        "transfers": sol.transfers.tolist(),
        "objective": sol.objective,
        "lambda_nodes": {str(k): v for k, v in sol.lambda_nodes.items()},
        "gamma": sol.gamma.tolist(),
        "mu_final": sol.mu_final,
        "duality_gap": sol.duality_gap,
    }


def solution_from_dict(raw: dict) -> tuple[SlotProblem, Solution]:
    """Rebuild a (problem, solution) pair saved by solution_to_dict.

    Derived quantities (SINR, capacities, delays, budget slack) are recomputed
    from the stored powers rather than trusted from the file."""
    from .channel import (
        PowerVector,
        capacity_approx_vector,
        capacity_exact_vector,
        delay_vector,
        sinr_vector,
    )
    from .topology import EnergyLink

    if raw.get("schema_version") != 1:
        raise ValueError("unsupported solution schema_version")
    channel = ChannelState(
        gains=np.asarray(raw["gains"], dtype=float),
        noise=np.asarray(raw["noise"], dtype=float),
    )
    problem = SlotProblem(
        link_ids=tuple(raw["link_ids"]),
        link_sources=tuple(int(s) for s in raw["link_sources"]),
        flows=np.asarray(raw["flows"], dtype=float),
        channel=channel,
        node_energy={int(k): float(v) for k, v in raw["node_energy"].items()},
        energy_links=tuple(
            EnergyLink(int(d), int(r), float(eta)) for d, r, eta in raw["energy_links"]
        ),
    )
    power = PowerVector.from_powers(np.asarray(raw["power"], dtype=float))
    transfers = np.asarray(raw["transfers"], dtype=float)
    sinr = sinr_vector(channel, power.p)
    cap_approx = capacity_approx_vector(channel, power.ptilde)
    cap_exact = capacity_exact_vector(channel, power.p)
    delays = delay_vector(problem.flows, cap_approx)
    slack = {}
    for node in problem.budget_nodes():
        spent = sum(
            power.p[l] for l, src in enumerate(problem.link_sources) if src == node
        )
        for q, el in enumerate(problem.energy_links):
            if el.donor == node:
                spent += transfers[q]
            if el.recipient == node:
                spent -= el.efficiency * transfers[q]
        slack[node] = problem.node_energy[node] - spent
    solution = Solution(
        problem=problem,
        power=power,
        transfers=transfers,
        objective=float(raw["objective"]),
        sinr=sinr,
        capacity_approx=cap_approx,
        capacity_exact=cap_exact,
        delays=delays,
        lambda_nodes={int(k): float(v) for k, v in raw["lambda_nodes"].items()},
        beta=np.zeros(problem.n_links),
        gamma=np.asarray(raw["gamma"], dtype=float),
        slack_budget=slack,
        mu_final=float(raw["mu_final"]),
        duality_gap=float(raw["duality_gap"]),
        newton_iterations=0,
        outer_iterations=0,
        termination="loaded",
    )
    return problem, solution


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _received_by_source(problem: SlotProblem, transfers: np.ndarray) -> dict[int, float]:
    received: dict[int, float] = {}
    for q, el in enumerate(problem.energy_links):
        received[el.recipient] = received.get(el.recipient, 0.0) + el.efficiency * float(
            transfers[q]
        )
    return received


def export_results(result: RoundResult, path: str | Path) -> tuple[Path, Path]:
    """Write the per-link CSV and a <stem>_summary.csv cumulative series.

    Rows are ordered by (slot, link position); floats carry 6 significant
    digits, so identical results export byte-identically.
    """
    path = Path(path)
    summary_path = path.with_name(path.stem + "_summary" + path.suffix)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "slot", "link", "flow", "power", "sinr", "capacity_approx",
                    "capacity_exact", "delay", "transferred_in", "lambda_node",
                    "feasible",
                ]
            )
            for slot in result.slots:
                problem = slot.problem
                sol = slot.solution
                received = (
                    _received_by_source(problem, sol.transfers) if sol else {}
                )
                for l in range(problem.n_links):
                    src = problem.link_sources[l]
                    if sol is None:
                        row = [
                            slot.slot_index, problem.link_ids[l],
                            _fmt(problem.flows[l]),
                            "nan", "nan", "nan", "nan", "nan", "nan", "nan", 0,
                        ]
                    else:
                        row = [
                            slot.slot_index,
                            problem.link_ids[l],
                            _fmt(problem.flows[l]),
                            _fmt(sol.power.p[l]),
                            _fmt(sol.sinr[l]),
                            _fmt(sol.capacity_approx[l]),
                            _fmt(sol.capacity_exact[l]),
                            _fmt(sol.delays[l]),
                            _fmt(received.get(src, 0.0)),
                            _fmt(sol.lambda_nodes.get(src, 0.0)),
                            1,
                        ]
                    writer.writerow(row)
        with summary_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slot", "delay", "cumulative_delay"])
            for slot, cum in zip(result.slots, result.cumulative_delay):
                writer.writerow(
                    [slot.slot_index, _fmt(slot.delay), _fmt(float(cum))]
                )
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path, summary_path
