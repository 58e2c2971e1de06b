import json

import numpy as np
import pytest

from conftest import small_scenario_dict
from ehwsn.config import ConfigError, load_scenario, scenario_from_dict


def test_bundled_scenarios_load(pinned_slot_config, tree14_config):
    assert pinned_slot_config.slots == 1
    assert tree14_config.slots == 6
    assert pinned_slot_config.transfer_on
    assert tree14_config.channel_mode == "interference"
    assert len(tree14_config.topology.energy_links) == 20
    assert len(pinned_slot_config.topology.energy_links) == 5


def test_pinned_slot_explicit_vectors(pinned_slot_config):
    assert pinned_slot_config.explicit_flows["8->3"] == pytest.approx(0.8752)
    assert pinned_slot_config.explicit_energy[4] == pytest.approx(11.0)
    assert all(el.efficiency == 0.6 for el in pinned_slot_config.topology.energy_links)


def test_schema_version_required():
    raw = small_scenario_dict()
    del raw["schema_version"]
    with pytest.raises(ConfigError, match="schema_version"):
        scenario_from_dict(raw)
    raw["schema_version"] = 2
    with pytest.raises(ConfigError, match="schema_version"):
        scenario_from_dict(raw)


def test_unknown_keys_rejected():
    raw = small_scenario_dict()
    raw["extra"] = True
    with pytest.raises(ConfigError, match="unknown keys"):
        scenario_from_dict(raw)
    raw = small_scenario_dict()
    raw["channel"]["color"] = "blue"
    with pytest.raises(ConfigError, match="unknown keys"):
        scenario_from_dict(raw)


def test_bad_channel_mode_rejected():
    raw = small_scenario_dict()
    raw["channel"]["mode"] = "duplex"
    with pytest.raises(ConfigError):
        scenario_from_dict(raw)


def test_explicit_flow_keys_validated():
    raw = small_scenario_dict()
    raw["flows"] = {"explicit": {"9->9": 0.5}}
    with pytest.raises(ConfigError, match="unknown links"):
        scenario_from_dict(raw)
    raw["flows"] = {"explicit": {"1->0": -0.5}}
    with pytest.raises(ConfigError, match="positive"):
        scenario_from_dict(raw)


def test_explicit_energy_keys_validated():
    raw = small_scenario_dict()
    raw["energy"]["explicit"] = {"42": 5.0}
    with pytest.raises(ConfigError, match="unknown nodes"):
        scenario_from_dict(raw)
    raw["energy"]["explicit"] = {"1": 99.0}  # above battery cap
    with pytest.raises(ConfigError):
        scenario_from_dict(raw)


def test_seeds_required_for_sampled_quantities():
    raw = small_scenario_dict()
    del raw["seeds"]["gains"]
    with pytest.raises(ConfigError, match="seeds.gains"):
        scenario_from_dict(raw)

    raw = small_scenario_dict()
    del raw["seeds"]["flows"]
    with pytest.raises(ConfigError, match="seeds.flows"):
        scenario_from_dict(raw)
    # fully explicit flows lift the requirement
    raw["flows"] = {"explicit": {"1->0": 0.3, "2->0": 0.4, "3->2": 0.5}}
    scenario_from_dict(raw)

    raw = small_scenario_dict()
    del raw["seeds"]["energy"]
    with pytest.raises(ConfigError, match="seeds.energy"):
        scenario_from_dict(raw)
    raw["energy"]["explicit"] = {"1": 5.0, "2": 5.0, "3": 5.0}
    scenario_from_dict(raw)


def test_seed_type_validated():
    raw = small_scenario_dict()
    raw["seeds"]["gains"] = -1
    with pytest.raises(ConfigError):
        scenario_from_dict(raw)
    raw["seeds"]["gains"] = 1.5
    with pytest.raises(ConfigError):
        scenario_from_dict(raw)


def test_explicit_gains_shape_checked():
    raw = small_scenario_dict()
    raw["channel"]["gains"] = [[1.0, 0.01], [0.01, 1.0], [0.01, 0.01]]
    with pytest.raises(ConfigError, match="square"):
        scenario_from_dict(raw)


def test_topology_errors_surface_as_config_errors():
    raw = small_scenario_dict()
    raw["topology"]["data_links"] = [[1, 0], [2, 0], [3, 2], [3, 0]]  # two parents
    with pytest.raises(ValueError):
        scenario_from_dict(raw)


def test_load_scenario_io_and_json_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_scenario(bad)


def test_defaults_applied():
    raw = small_scenario_dict()
    del raw["channel"]
    del raw["solver"]
    del raw["round"]
    cfg = scenario_from_dict(raw)
    assert cfg.noise == pytest.approx(1e-5)
    assert cfg.gain_high == pytest.approx(0.01)
    assert cfg.high_sinr_threshold == pytest.approx(5.0)
    assert cfg.gap_tol == pytest.approx(1e-10)
    assert cfg.slots == len(cfg.schedule)
    assert not cfg.carry_over
