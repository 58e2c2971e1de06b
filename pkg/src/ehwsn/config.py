"""Scenario configuration: JSON schema, validation, defaults.

Schema (version 1, all floats unless noted):

    {
      "schema_version": 1,
      "topology": {
        "nodes": [0, 1, ...],
        "sink": 0,
        "data_links": [[child, parent], ...],
        "energy_links": [[donor, recipient, efficiency], ...]
      },
      "channel": {
        "mode": "interference" | "orthogonal",
        "noise": 1e-5,
        "gain_high": 0.01,
        "gains": [[...], ...],          # optional explicit matrix for one slot
        "high_sinr_threshold": 5.0
      },
      "flows":   {"explicit": {"tx->rx": value, ...}},   # else sampled U(0,1]
      "energy":  {"arrival_rate": 8.0, "battery_cap": 20.0,
                  "explicit": {"node": value, ...}, "carry_over": false},
      "transfer": {"mode": "on" | "off"},
      "seeds":   {"gains": int, "flows": int, "energy": int},
      "solver":  {"gap_tol": 1e-10},
      "round":   {"slots": int}                          # default: schedule length
    }

Explicit vectors override sampling; a seed is mandatory for any quantity that
is not fully explicit. Unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .solver import DEFAULT_GAP_TOL
from .topology import EnergyLink, Schedule, Topology, half_duplex_schedule, validate_topology

__all__ = ["ConfigError", "ScenarioConfig", "scenario_from_dict", "load_scenario"]

DEFAULT_HIGH_SINR = 5.0
DEFAULT_ARRIVAL_RATE = 8.0
DEFAULT_BATTERY_CAP = 20.0
DEFAULT_NOISE_POWER = 1e-5
DEFAULT_GAIN_UPPER = 0.01


class ConfigError(ValueError):
    """Raised for malformed, incomplete, or contradictory scenario files."""


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    topology: Topology
    schedule: Schedule
    channel_mode: str = "interference"
    transfer_on: bool = True
    noise: float = DEFAULT_NOISE_POWER
    gain_high: float = DEFAULT_GAIN_UPPER
    explicit_gains: np.ndarray | None = None
    high_sinr_threshold: float = DEFAULT_HIGH_SINR
    explicit_flows: dict[str, float] | None = None
    arrival_rate: float = DEFAULT_ARRIVAL_RATE
    battery_cap: float = DEFAULT_BATTERY_CAP
    explicit_energy: dict[int, float] | None = None
    carry_over: bool = False
    seed_gains: int | None = None
    seed_flows: int | None = None
    seed_energy: int | None = None
    gap_tol: float = DEFAULT_GAP_TOL
    slots: int = field(default=0)  # 0 -> one pass over the schedule

    def __post_init__(self):
        if self.channel_mode not in ("interference", "orthogonal"):
            raise ConfigError(f"channel mode must be interference|orthogonal, got {self.channel_mode!r}")
        if self.slots < 0:
            raise ConfigError("round slots must be positive")
        object.__setattr__(
            self, "slots", self.slots if self.slots else len(self.schedule)
        )
        labels = {
            self.topology.link_label(i) for i in range(len(self.topology.data_links))
        }
        if self.explicit_flows is not None:
            unknown = set(self.explicit_flows) - labels
            if unknown:
                raise ConfigError(f"explicit flows name unknown links: {sorted(unknown)}")
            bad = {k: v for k, v in self.explicit_flows.items() if not v > 0}
            if bad:
                raise ConfigError(f"explicit flows must be positive: {bad}")
        if self.explicit_energy is not None:
            nodes = set(self.topology.nodes) - {self.topology.sink}
            unknown = set(self.explicit_energy) - nodes
            if unknown:
                raise ConfigError(f"explicit energy names unknown nodes: {sorted(unknown)}")
            bad = {k: v for k, v in self.explicit_energy.items() if v < 0 or v > self.battery_cap}
            if bad:
                raise ConfigError(f"explicit energy outside [0, battery_cap]: {bad}")
        if self.explicit_gains is not None:
            arr = np.asarray(self.explicit_gains, dtype=float)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ConfigError("explicit gains must be a square matrix")
            object.__setattr__(self, "explicit_gains", arr)
        # sampling without a seed would be irreproducible; refuse it
        if self.explicit_gains is None and self.seed_gains is None:
            raise ConfigError("seeds.gains required when gains are sampled")
        if self.seed_flows is None and not (
            self.explicit_flows is not None and set(self.explicit_flows) == labels
        ):
            raise ConfigError("seeds.flows required unless every link flow is explicit")
        non_sink = set(self.topology.nodes) - {self.topology.sink}
        if self.seed_energy is None and not (
            self.explicit_energy is not None and set(self.explicit_energy) == non_sink
        ):
            raise ConfigError("seeds.energy required unless every node energy is explicit")
        if not self.gap_tol > 0:
            raise ConfigError("solver gap_tol must be positive")
        if not 0 < self.gain_high:
            raise ConfigError("gain_high must be positive")
        if not self.noise > 0:
            raise ConfigError("noise must be positive")


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return mapping[key]


def _check_keys(mapping: dict, allowed: set[str], where: str):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _parse_topology(raw: dict) -> Topology:
    _check_keys(raw, {"nodes", "sink", "data_links", "energy_links"}, "topology")
    nodes = tuple(int(n) for n in _require(raw, "nodes", "topology"))
    sink = int(_require(raw, "sink", "topology"))
    data_links = tuple(
        (int(a), int(b)) for a, b in _require(raw, "data_links", "topology")
    )
    energy_links = tuple(
        EnergyLink(int(d), int(r), float(eta))
        for d, r, eta in raw.get("energy_links", [])
    )
    topo = Topology(nodes=nodes, sink=sink, data_links=data_links, energy_links=energy_links)
    validate_topology(topo)
    return topo


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object")
    _check_keys(
        raw,
        {"schema_version", "topology", "channel", "flows", "energy", "transfer",
         "seeds", "solver", "round"},
        "scenario",
    )
    version = _require(raw, "schema_version", "scenario")
    if version != 1:
        raise ConfigError(f"unsupported schema_version {version!r} (expected 1)")
    topology = _parse_topology(_require(raw, "topology", "scenario"))
    schedule = half_duplex_schedule(topology)

    channel = raw.get("channel", {})
    _check_keys(channel, {"mode", "noise", "gain_high", "gains", "high_sinr_threshold"}, "channel")
    flows = raw.get("flows", {})
    _check_keys(flows, {"explicit"}, "flows")
    energy = raw.get("energy", {})
    _check_keys(energy, {"arrival_rate", "battery_cap", "explicit", "carry_over"}, "energy")
    transfer = raw.get("transfer", {})
    _check_keys(transfer, {"mode"}, "transfer")
    seeds = raw.get("seeds", {})
    _check_keys(seeds, {"gains", "flows", "energy"}, "seeds")
    solver = raw.get("solver", {})
    _check_keys(solver, {"gap_tol"}, "solver")
    round_section = raw.get("round", {})
    _check_keys(round_section, {"slots"}, "round")

    transfer_mode = transfer.get("mode", "on")
    if transfer_mode not in ("on", "off"):
        raise ConfigError(f"transfer mode must be on|off, got {transfer_mode!r}")

    explicit_flows = flows.get("explicit")
    if explicit_flows is not None:
        explicit_flows = {str(k): float(v) for k, v in explicit_flows.items()}
    explicit_energy = energy.get("explicit")
    if explicit_energy is not None:
        try:
            explicit_energy = {int(k): float(v) for k, v in explicit_energy.items()}
        except ValueError as exc:
            raise ConfigError(f"energy.explicit keys must be node ids: {exc}") from None

    def _seed(name: str):
        value = seeds.get(name)
        if value is None:
            return None
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise ConfigError(f"seeds.{name} must be a non-negative integer")
        return value

    return ScenarioConfig(
        topology=topology,
        schedule=schedule,
        channel_mode=channel.get("mode", "interference"),
        transfer_on=transfer_mode == "on",
        noise=float(channel.get("noise", DEFAULT_NOISE_POWER)),
        gain_high=float(channel.get("gain_high", DEFAULT_GAIN_UPPER)),
        explicit_gains=channel.get("gains"),
        high_sinr_threshold=float(channel.get("high_sinr_threshold", DEFAULT_HIGH_SINR)),
        explicit_flows=explicit_flows,
        arrival_rate=float(energy.get("arrival_rate", DEFAULT_ARRIVAL_RATE)),
        battery_cap=float(energy.get("battery_cap", DEFAULT_BATTERY_CAP)),
        explicit_energy=explicit_energy,
        carry_over=bool(energy.get("carry_over", False)),
        seed_gains=_seed("gains"),
        seed_flows=_seed("flows"),
        seed_energy=_seed("energy"),
        gap_tol=float(solver.get("gap_tol", DEFAULT_GAP_TOL)),
        slots=int(round_section.get("slots", 0)),
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(raw)
