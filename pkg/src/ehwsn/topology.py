"""Data-collection tree topology, incidence matrices, and half-duplex scheduling.

A network is a tree of sensor nodes rooted at a sink. Every non-sink node owns
exactly one outgoing data link (towards its parent); directed energy links let
idle nodes donate harvested energy to busy ones at an efficiency in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TopologyError",
    "EnergyLink",
    "Topology",
    "IncidenceMatrices",
    "FlowAssignment",
    "SlotPlan",
    "Schedule",
    "validate_topology",
    "build_incidence",
    "check_flow_conservation",
    "flows_from_injections",
    "node_depths",
    "half_duplex_schedule",
]


class TopologyError(ValueError):
    """Structural validation failure; names the offending node or link."""

    def __init__(self, message: str, *, node=None, link=None):
        detail = message
        if node is not None:
            detail += f" (node {node})"
        if link is not None:
            detail += f" (link {link})"
        super().__init__(detail)
        self.node = node
        self.link = link


@dataclass(frozen=True, eq=False)
class EnergyLink:
    """Directed energy-transfer link: `donor` sends, `recipient` banks eta * sent."""

    donor: int
    recipient: int
    efficiency: float


@dataclass(frozen=True, eq=False)
class Topology:
    """Node list with a designated sink, data links (transmitter -> receiver),
    and directed energy links.

    Ordering matters: matrix rows follow `nodes`, columns follow the link tuples.
    """

    nodes: tuple[int, ...]
    sink: int
    data_links: tuple[tuple[int, int], ...]
    energy_links: tuple[EnergyLink, ...] = ()

    def link_label(self, index: int) -> str:
        tx, rx = self.data_links[index]
        return f"{tx}->{rx}"

    def parent_of(self, node: int) -> int | None:
        for tx, rx in self.data_links:
            if tx == node:
                return rx
        return None


def validate_topology(topology: Topology) -> None:
    """Raise TopologyError unless the data links form a spanning tree rooted at
    the sink and every energy link is well formed."""
    nodes = topology.nodes
    if len(set(nodes)) != len(nodes):
        raise TopologyError("duplicate node ids")
    node_set = set(nodes)
    if topology.sink not in node_set:
        raise TopologyError("sink is not a listed node", node=topology.sink)

    parent: dict[int, int] = {}
    for tx, rx in topology.data_links:
        if tx not in node_set or rx not in node_set:
            raise TopologyError("data link endpoint not a listed node", link=(tx, rx))
        if tx == rx:
            raise TopologyError("data link is a self-loop", link=(tx, rx))
        if tx == topology.sink:
            raise TopologyError("sink has an outgoing data link", link=(tx, rx))
        if tx in parent:
            raise TopologyError("node has multiple outgoing data links", node=tx)
        parent[tx] = rx
    for n in nodes:
        if n != topology.sink and n not in parent:
            raise TopologyError("non-sink node has no outgoing data link", node=n)

    # Parent-walk must reach the sink; a walk longer than N nodes means a cycle.
    for n in nodes:
        hops = 0
        cur = n
        while cur != topology.sink:
            cur = parent[cur]
            hops += 1
            if hops > len(nodes):
                raise TopologyError("data links contain a cycle", node=n)

    for el in topology.energy_links:
        if el.donor not in node_set or el.recipient not in node_set:
            raise TopologyError(
                "energy link endpoint not a listed node", link=(el.donor, el.recipient)
            )
        if el.donor == el.recipient:
            raise TopologyError("energy link is a self-loop", link=(el.donor, el.recipient))
        if el.donor == topology.sink:
            raise TopologyError(
                "energy link originates at the sink", link=(el.donor, el.recipient)
            )
        if not (0.0 < el.efficiency <= 1.0):
            raise TopologyError(
                f"transfer efficiency {el.efficiency} outside (0, 1]",
                link=(el.donor, el.recipient),
            )


@dataclass(frozen=True, eq=False)
class IncidenceMatrices:
    """Node-link incidence of the network.

    A: N x L data incidence, +1 at the transmitter and -1 at the receiver.
    B: N x Q energy incidence, +1 at the donor and -efficiency at the recipient.
    K: max(A, 0), picking out each link's energy-budget owner.
    """

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    node_index: dict[int, int]


def build_incidence(topology: Topology) -> IncidenceMatrices:
    """Build A, B, K for a validated topology (validates first)."""
    validate_topology(topology)
    node_index = {n: i for i, n in enumerate(topology.nodes)}
    n_nodes = len(topology.nodes)
    A = np.zeros((n_nodes, len(topology.data_links)))
    for j, (tx, rx) in enumerate(topology.data_links):
        A[node_index[tx], j] = 1.0
        A[node_index[rx], j] = -1.0
    B = np.zeros((n_nodes, len(topology.energy_links)))
    for q, el in enumerate(topology.energy_links):
        B[node_index[el.donor], q] = 1.0
        B[node_index[el.recipient], q] = -el.efficiency
    K = np.maximum(A, 0.0)
    return IncidenceMatrices(A=A, B=B, K=K, node_index=node_index)


@dataclass(frozen=True, eq=False)
class FlowAssignment:
    """Per-link data flow rates, ordered like Topology.data_links; all positive."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or not np.all(vals > 0):
            raise ValueError("flows must be a 1-d vector of positive rates")
        object.__setattr__(self, "values", vals)


def check_flow_conservation(matrices: IncidenceMatrices, d: np.ndarray) -> np.ndarray:
    """Divergence vector s = A d: net data injected at each node (rows follow
    the topology's node order; the sink's entry is the negated total sink inflow)."""
    return matrices.A @ np.asarray(d, dtype=float)


def flows_from_injections(topology: Topology, injections: dict[int, float]) -> np.ndarray:
    """Aggregate per-node injected rates down the tree into per-link flows.

    Each node forwards its own injection plus everything its children forward,
    so the resulting divergence is positive exactly at the sensing nodes and
    negative only at the sink.
    """
    validate_topology(topology)
    order = _links_deepest_first(topology)
    flows = np.zeros(len(topology.data_links))
    for j in order:
        tx, _ = topology.data_links[j]
        inflow = sum(
            flows[k] for k, (_, rx) in enumerate(topology.data_links) if rx == tx
        )
        flows[j] = float(injections.get(tx, 0.0)) + inflow
    return flows


def node_depths(topology: Topology) -> dict[int, int]:
    """Hop distance from the sink (sink = 0)."""
    depth = {topology.sink: 0}
    parent = {tx: rx for tx, rx in topology.data_links}
    for n in topology.nodes:
        chain = []
        cur = n
        while cur not in depth:
            chain.append(cur)
            cur = parent[cur]
        base = depth[cur]
        for back, m in enumerate(reversed(chain), start=1):
            depth[m] = base + back
    return depth


def _links_deepest_first(topology: Topology) -> list[int]:
    depth = node_depths(topology)
    return sorted(
        range(len(topology.data_links)),
        key=lambda j: (-depth[topology.data_links[j][0]], j),
    )


@dataclass(frozen=True, eq=False)
class SlotPlan:
    """One time slot: indices of simultaneously active data links (node-disjoint)
    and of the energy links whose donor is idle during the slot."""

    data_links: tuple[int, ...]
    energy_links: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Schedule:
    """Ordered slots covering every data link exactly once per round."""

    slots: tuple[SlotPlan, ...]

    def __len__(self) -> int:
        return len(self.slots)


def half_duplex_schedule(topology: Topology) -> Schedule:
    """Partition the data links into half-duplex slots by greedy edge coloring.

    A DFS from the sink assigns each child link the smallest color unused at the
    shared node; a tree needs exactly max-degree colors. Color classes become
    slots, ordered deepest-links-first (leaf-to-root aggregation): sort key is
    (max transmitter depth, class size) descending, first-color first on ties.
    An energy link is permitted in a slot iff its donor is not one of the slot's
    transmitters.
    """
    validate_topology(topology)
    children: dict[int, list[int]] = {n: [] for n in topology.nodes}
    for j, (_, rx) in enumerate(topology.data_links):
        children[rx].append(j)

    color: dict[int, int] = {}
    # Iterative DFS; each stack entry is (node, color of the node's parent link).
    stack: list[tuple[int, int | None]] = [(topology.sink, None)]
    while stack:
        node, parent_color = stack.pop()
        used = {parent_color} if parent_color is not None else set()
        assigned = []
        for j in children[node]:
            c = 0
            while c in used:
                c += 1
            used.add(c)
            color[j] = c
            assigned.append((topology.data_links[j][0], c))
        # Reverse keeps DFS visiting children in their listed order.
        stack.extend(reversed(assigned))

    classes: dict[int, list[int]] = {}
    for j, c in color.items():
        classes.setdefault(c, []).append(j)
    depth = node_depths(topology)
    ordered = sorted(
        classes.items(),
        key=lambda item: (
            -max(depth[topology.data_links[j][0]] for j in item[1]),
            -len(item[1]),
            item[0],
        ),
    )

    slots = []
    for _, links in ordered:
        links = tuple(sorted(links))
        transmitters = {topology.data_links[j][0] for j in links}
        permitted = tuple(
            q
            for q, el in enumerate(topology.energy_links)
            if el.donor not in transmitters
        )
        slots.append(SlotPlan(data_links=links, energy_links=permitted))
    return Schedule(slots=tuple(slots))
