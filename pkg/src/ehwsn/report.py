"""Figure rendering for experiment runs.

Renders to files only (Agg backend): a cumulative-delay comparison across the
four matched-seed scenarios (channel x transfer), and a per-link allocation
chart for a single solved slot. CSV export stays the contract of record; the
figures sit next to it for quick reading.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .config import ScenarioConfig
from .simulate import RoundResult, SlotResult, export_results, run_round

__all__ = [
    "scenario_matrix",
    "render_round_curves",
    "render_slot_allocation",
    "run_report",
]

_LABELS = {
    "ifc_off": "interference, no transfer",
    "ifc_on": "interference, transfer",
    "oc_off": "orthogonal, no transfer",
    "oc_on": "orthogonal, transfer",
}
_STYLES = {
    "ifc_off": dict(color="#c0392b", linestyle="--", marker="s"),
    "ifc_on": dict(color="#c0392b", linestyle="-", marker="o"),
    "oc_off": dict(color="#2471a3", linestyle="--", marker="s"),
    "oc_on": dict(color="#2471a3", linestyle="-", marker="o"),
}


def scenario_matrix(config: ScenarioConfig) -> dict[str, ScenarioConfig]:
    """The four ablations of a scenario with identical seeds: channel mode
    crossed with transfer mode. Keys: ifc_off, ifc_on, oc_off, oc_on."""
    out = {}
    for key, (mode, transfer) in {
        "ifc_off": ("interference", False),
        "ifc_on": ("interference", True),
        "oc_off": ("orthogonal", False),
        "oc_on": ("orthogonal", True),
    }.items():
        out[key] = dataclasses.replace(
            config, channel_mode=mode, transfer_on=transfer
        )
    return out


def render_round_curves(rounds: dict[str, RoundResult], path: str | Path) -> Path:
    """Cumulative total delay against slot index, one curve per scenario."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key, result in rounds.items():
        slots = [s.slot_index for s in result.slots]
        ax.plot(
            slots,
            result.cumulative_delay,
            label=_LABELS.get(key, key),
            **_STYLES.get(key, {}),
        )
    ax.set_xlabel("time slot")
    ax.set_ylabel("cumulative total delay")
    ax.set_title("Delay accumulation over one data collection round")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_slot_allocation(result: SlotResult, path: str | Path) -> Path:
    """Per-link transmit powers and delays for one solved slot."""
    if result.solution is None:
        raise ValueError("cannot render an infeasible slot")
    path = Path(path)
    problem, sol = result.problem, result.solution
    labels = list(problem.link_ids)
    fig, (ax_p, ax_d) = plt.subplots(1, 2, figsize=(9, 4))
    ax_p.bar(labels, sol.power.p, color="#2471a3")
    ax_p.set_ylabel("transmit power")
    ax_p.set_title(f"slot {result.slot_index}: power allocation")
    ax_p.tick_params(axis="x", rotation=45)
    ax_d.bar(labels, sol.delays, color="#c0392b")
    ax_d.set_ylabel("link delay")
    ax_d.set_title(f"slot {result.slot_index}: per-link delay")
    ax_d.tick_params(axis="x", rotation=45)
    for ax in (ax_p, ax_d):
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def run_report(config: ScenarioConfig, out_dir: str | Path) -> list[Path]:
    """Run the four matched-seed rounds, export their CSVs, and render the
    comparison figure plus a slot-0 allocation chart. Returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    rounds: dict[str, RoundResult] = {}
    for key, scenario in scenario_matrix(config).items():
        result = run_round(scenario)
        rounds[key] = result
        links_path, summary_path = export_results(result, out_dir / f"round_{key}.csv")
        written.extend([links_path, summary_path])
    written.append(render_round_curves(rounds, out_dir / "cumulative_delay.png"))
    first = rounds["ifc_on"].slots[0]
    if first.feasible:
        written.append(
            render_slot_allocation(first, out_dir / "slot0_allocation.png")
        )
    return written
