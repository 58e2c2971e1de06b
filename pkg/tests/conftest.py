import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from ehwsn.channel import ChannelState, sample_gains
from ehwsn.config import load_scenario, scenario_from_dict
from ehwsn.problem import SlotProblem
from ehwsn.topology import EnergyLink


def _data_path(name: str) -> Path:
    return Path(resources.files("ehwsn.data") / name)


@pytest.fixture(scope="session")
def pinned_slot_path() -> Path:
    return _data_path("pinned_slot.json")


@pytest.fixture(scope="session")
def tree14_path() -> Path:
    return _data_path("tree14.json")


@pytest.fixture(scope="session")
def pinned_slot_config(pinned_slot_path):
    return load_scenario(pinned_slot_path)


@pytest.fixture(scope="session")
def tree14_config(tree14_path):
    return load_scenario(tree14_path)


def small_scenario_dict() -> dict:
    """4-node scenario whose first slot has two node-disjoint links and one
    idle-donor energy link; small enough for the grid oracle."""
    return {
        "schema_version": 1,
        "topology": {
            "nodes": [0, 1, 2, 3],
            "sink": 0,
            "data_links": [[1, 0], [2, 0], [3, 2]],
            "energy_links": [[2, 3, 0.6]],
        },
        "channel": {"mode": "interference", "noise": 1e-5, "gain_high": 0.01},
        "flows": {},
        "energy": {"arrival_rate": 8.0, "battery_cap": 20.0},
        "transfer": {"mode": "on"},
        "seeds": {"gains": 5, "flows": 6, "energy": 7},
        "solver": {"gap_tol": 1e-10},
        "round": {"slots": 2},
    }


@pytest.fixture()
def small_config():
    return scenario_from_dict(small_scenario_dict())


@pytest.fixture()
def small_config_path(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_scenario_dict()), encoding="utf-8")
    return path


def random_slot_problem(
    rng: np.random.Generator,
    n_links: int,
    *,
    with_transfer: bool = False,
    gain_high: float = 0.01,
    flow_high: float = 0.9,
) -> SlotProblem:
    """Random star instance: links i+1 -> 0, optional idle donor feeding the
    first transmitter. Flows kept small enough to stay in the high-SINR belt."""
    channel = sample_gains(rng, n_links, gain_high=gain_high)
    flows = 0.1 + (flow_high - 0.1) * rng.random(n_links)
    sources = tuple(range(1, n_links + 1))
    energy = {n: float(rng.uniform(4.0, 15.0)) for n in sources}
    energy_links = ()
    if with_transfer:
        donor = n_links + 1
        energy[donor] = float(rng.uniform(4.0, 15.0))
        energy_links = (EnergyLink(donor, 1, 0.6),)
    return SlotProblem(
        link_ids=tuple(f"{s}->0" for s in sources),
        link_sources=sources,
        flows=flows,
        channel=channel,
        node_energy=energy,
        energy_links=energy_links,
    )


def interior_point(problem: SlotProblem, rng: np.random.Generator, spread=0.5):
    """Random strictly feasible log-power vector for a star instance."""
    from ehwsn.solver import objective_logdomain

    base = np.log([0.5 * problem.node_energy[s] for s in problem.link_sources])
    for _ in range(200):
        cand = base + spread * rng.standard_normal(problem.n_links)
        if not np.isfinite(objective_logdomain(problem, cand)):
            continue
        spend: dict[int, float] = {}
        for l, src in enumerate(problem.link_sources):
            spend[src] = spend.get(src, 0.0) + np.exp(cand[l])
        if all(v < 0.95 * problem.node_energy[n] for n, v in spend.items()):
            return cand
    raise AssertionError("no interior point found")


@pytest.fixture()
def rng():
    return np.random.default_rng(2026)
