import json

import pytest

from ehwsn.cli import main


def test_solve_prints_allocation(pinned_slot_path, capsys):
    code = main(["solve", "--config", str(pinned_slot_path), "--channel", "oc"])
    out = capsys.readouterr().out
    assert code == 0
    assert "objective" in out
    assert "8->3" in out
    assert "transfers:" in out


def test_solve_writes_solution_and_check_accepts_it(pinned_slot_path, tmp_path, capsys):
    sol_path = tmp_path / "sol.json"
    assert main(["solve", "--config", str(pinned_slot_path), "--out", str(sol_path)]) == 0
    assert sol_path.exists()
    capsys.readouterr()
    code = main(["check", "--solution", str(sol_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "PASS" in out and "FAIL" not in out


def test_check_rejects_tampered_solution(pinned_slot_path, tmp_path, capsys):
    sol_path = tmp_path / "sol.json"
    main(["solve", "--config", str(pinned_slot_path), "--out", str(sol_path)])
    raw = json.loads(sol_path.read_text())
    raw["power"] = [p * 0.7 for p in raw["power"]]
    sol_path.write_text(json.dumps(raw))
    capsys.readouterr()
    code = main(["check", "--solution", str(sol_path)])
    captured = capsys.readouterr()
    assert code == 4
    assert "FAIL" in captured.out
    assert "category=solver" in captured.err


def test_round_writes_csvs(tree14_path, tmp_path, capsys):
    out = tmp_path / "round.csv"
    code = main(["round", "--config", str(tree14_path), "--out", str(out)])
    assert code == 0
    assert out.exists()
    assert (tmp_path / "round_summary.csv").exists()
    assert "final cumulative delay" in capsys.readouterr().out


def test_round_slots_override(tree14_path, tmp_path):
    out = tmp_path / "r.csv"
    assert main(
        ["round", "--config", str(tree14_path), "--slots", "2", "--out", str(out)]
    ) == 0
    summary = (tmp_path / "r_summary.csv").read_text().strip().splitlines()
    assert len(summary) == 1 + 2


def test_oracle_agreement(small_config_path, capsys):
    code = main(["oracle", "--config", str(small_config_path), "--slot", "0"])
    out = capsys.readouterr().out
    assert code == 0
    assert "agreement: ok" in out


def test_oracle_rejects_wide_slots(pinned_slot_path, capsys):
    code = main(["oracle", "--config", str(pinned_slot_path)])
    assert code == 2
    assert "category=config" in capsys.readouterr().err


def test_report_writes_figures(small_config_path, tmp_path, capsys):
    out_dir = tmp_path / "rep"
    code = main(["report", "--config", str(small_config_path), "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "cumulative_delay.png").exists()
    assert (out_dir / "slot0_allocation.png").exists()
    csvs = sorted(p.name for p in out_dir.glob("round_*.csv"))
    assert len(csvs) == 8  # 4 scenarios x (links, summary)


def test_missing_config_is_config_error(capsys):
    code = main(["solve", "--config", "/does/not/exist.json"])
    assert code == 2
    assert "category=config" in capsys.readouterr().err


def test_malformed_solution_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    code = main(["check", "--solution", str(bad)])
    assert code == 2
    assert "category=config" in capsys.readouterr().err


def test_infeasible_slot_exit_code(tmp_path, capsys):
    from conftest import small_scenario_dict

    raw = small_scenario_dict()
    raw["flows"] = {"explicit": {"1->0": 2.0, "2->0": 2.0, "3->2": 2.0}}
    raw["energy"]["explicit"] = {"1": 1e-4, "2": 1e-4, "3": 1e-4}
    del raw["seeds"]["flows"]
    del raw["seeds"]["energy"]
    path = tmp_path / "infeasible.json"
    path.write_text(json.dumps(raw))
    code = main(["solve", "--config", str(path)])
    assert code == 3
    assert "category=infeasible" in capsys.readouterr().err


def test_unwritable_output_is_io_error(tree14_path, capsys):
    code = main(
        ["round", "--config", str(tree14_path), "--out", "/nonexistent/dir/r.csv"]
    )
    assert code == 5
    assert "category=io" in capsys.readouterr().err


def test_channel_override_changes_solution(pinned_slot_path, capsys):
    main(["solve", "--config", str(pinned_slot_path), "--channel", "oc"])
    oc_out = capsys.readouterr().out
    main(["solve", "--config", str(pinned_slot_path), "--channel", "ifc"])
    ifc_out = capsys.readouterr().out
    assert oc_out != ifc_out


def test_seed_override_changes_gains(small_config_path, capsys):
    main(["solve", "--config", str(small_config_path), "--seed-gains", "5"])
    first = capsys.readouterr().out
    main(["solve", "--config", str(small_config_path), "--seed-gains", "99"])
    second = capsys.readouterr().out
    assert first != second
