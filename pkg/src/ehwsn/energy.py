"""Harvested energy: Poisson arrivals, battery caps, transfer accounting.

Each non-sink node banks an integer energy arrival per slot, never zero and
never above the battery cap. Transfers move x_q joules from a donor, of which
efficiency * x_q land at the recipient, so the network budget reads
K p + B x <= E.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import IncidenceMatrices, Topology

__all__ = [
    "DEFAULT_ARRIVAL_RATE",
    "DEFAULT_BATTERY_CAP",
    "EnergyState",
    "TransferVector",
    "sample_arrivals",
    "available_energy",
    "check_energy_budget",
]

DEFAULT_ARRIVAL_RATE = 8.0
DEFAULT_BATTERY_CAP = 20.0


@dataclass(frozen=True, eq=False)
class EnergyState:
    """Per-node energy for one slot, ordered like Topology.nodes.

    Non-sink entries are positive and at most `cap`; the sink needs no energy
    and its entry is zero.
    """

    values: np.ndarray
    cap: float = DEFAULT_BATTERY_CAP

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("energy must be a 1-d vector over nodes")
        if self.cap <= 0:
            raise ValueError("battery cap must be positive")
        if np.any(values < 0) or np.any(values > self.cap):
            raise ValueError("energy entries must lie in [0, cap]")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class TransferVector:
    """Joules sent per energy link (nonnegative), ordered like
    Topology.energy_links."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or np.any(values < 0):
            raise ValueError("transfers must be a 1-d vector of nonnegative amounts")
        object.__setattr__(self, "values", values)


def sample_arrivals(
    rng: np.random.Generator,
    topology: Topology,
    *,
    rate: float = DEFAULT_ARRIVAL_RATE,
    cap: float = DEFAULT_BATTERY_CAP,
) -> EnergyState:
    """Poisson(rate) arrival per non-sink node, zeros resampled, clamped to cap."""
    if rate <= 0:
        raise ValueError("arrival rate must be positive")
    values = np.zeros(len(topology.nodes))
    for i, node in enumerate(topology.nodes):
        if node == topology.sink:
            continue
        draw = 0
        while draw == 0:
            draw = int(rng.poisson(rate))
        values[i] = min(float(draw), cap)
    return EnergyState(values=values, cap=cap)


def available_energy(
    node: int,
    energy: EnergyState,
    transfers: TransferVector,
    topology: Topology,
) -> float:
    """Energy node can spend on transmission this slot: its own bank, plus
    efficiency-discounted incoming transfers, minus what it donates."""
    idx = topology.nodes.index(node)
    total = float(energy.values[idx])
    for q, el in enumerate(topology.energy_links):
        if el.recipient == node:
            total += el.efficiency * float(transfers.values[q])
        if el.donor == node:
            total -= float(transfers.values[q])
    return total


def check_energy_budget(
    matrices: IncidenceMatrices,
    p: np.ndarray,
    x: np.ndarray,
    energy: EnergyState,
) -> np.ndarray:
    """Per-node budget slack E - K p - B x; nonnegative everywhere iff the
    allocation is affordable."""
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    slack = energy.values - matrices.K @ p
    if matrices.B.size:
        slack = slack - matrices.B @ x
    return slack
