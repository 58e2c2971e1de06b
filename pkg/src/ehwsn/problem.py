"""One slot's optimization instance: active links, flows, channel, budgets.

The decision variables are the active links' log powers plus, when transfer is
enabled, the joules sent over each permitted energy link. Budgets couple them:
for every node, powers of its outgoing links plus donated joules must not
exceed banked energy plus efficiency-discounted received joules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState
from .topology import EnergyLink

__all__ = ["SlotProblem", "validate_slot_problem"]


@dataclass(frozen=True, eq=False)
class SlotProblem:
    """Inputs of a single-slot solve.

    link_ids are display labels ("tx->rx"); link_sources maps each active link
    to the node paying for its power; node_energy carries the slot budget of
    every node that transmits, donates, or receives energy.
    """

    link_ids: tuple[str, ...]
    link_sources: tuple[int, ...]
    flows: np.ndarray
    channel: ChannelState
    node_energy: dict[int, float]
    energy_links: tuple[EnergyLink, ...] = ()

    def __post_init__(self):
        flows = np.asarray(self.flows, dtype=float)
        object.__setattr__(self, "flows", flows)
        object.__setattr__(self, "link_ids", tuple(self.link_ids))
        object.__setattr__(self, "link_sources", tuple(self.link_sources))
        object.__setattr__(self, "energy_links", tuple(self.energy_links))

    @property
    def n_links(self) -> int:
        return len(self.link_ids)

    @property
    def n_transfers(self) -> int:
        return len(self.energy_links)

    def budget_nodes(self) -> tuple[int, ...]:
        """Nodes whose budget can bind: power spenders and donors, in first
        appearance order (recipients that do neither can never run out)."""
        seen: list[int] = []
        for node in self.link_sources:
            if node not in seen:
                seen.append(node)
        for el in self.energy_links:
            if el.donor not in seen:
                seen.append(el.donor)
        return tuple(seen)

    def without_transfer(self) -> "SlotProblem":
        if not self.energy_links:
            return self
        return SlotProblem(
            link_ids=self.link_ids,
            link_sources=self.link_sources,
            flows=self.flows,
            channel=self.channel,
            node_energy=self.node_energy,
            energy_links=(),
        )


def validate_slot_problem(problem: SlotProblem, *, half_duplex: bool = True) -> None:
    """Check dimensions, positivity, and budget ownership.

    half_duplex additionally requires pairwise-distinct transmitters and idle
    donors; synthetic fixtures that share a transmitter pass half_duplex=False.
    """
    n = problem.n_links
    if n == 0:
        raise ValueError("a slot problem needs at least one active link")
    if len(problem.link_sources) != n or len(problem.link_ids) != n:
        raise ValueError("link ids, sources, and flows must have equal length")
    if problem.flows.shape != (n,):
        raise ValueError("flow vector length must match the active links")
    if np.any(problem.flows <= 0):
        raise ValueError("flows must be positive")
    if problem.channel.n_links != n:
        raise ValueError("channel dimension must match the active links")
    for node in problem.link_sources:
        if node not in problem.node_energy:
            raise ValueError(f"active link transmitter {node} has no energy budget")
    for el in problem.energy_links:
        if el.donor not in problem.node_energy:
            raise ValueError(f"donor {el.donor} has no energy budget")
        if el.recipient not in problem.node_energy:
            raise ValueError(f"recipient {el.recipient} has no energy budget")
        if not (0.0 < el.efficiency <= 1.0):
            raise ValueError("transfer efficiency must lie in (0, 1]")
    for node, e in problem.node_energy.items():
        if e <= 0:
            raise ValueError(f"node {node} has nonpositive energy {e}")
    if half_duplex:
        if len(set(problem.link_sources)) != n:
            raise ValueError("half-duplex slot has a node transmitting twice")
        transmitters = set(problem.link_sources)
        for el in problem.energy_links:
            if el.donor in transmitters:
                raise ValueError(f"donor {el.donor} transmits in the same slot")
