import json

import pytest

from chemospread import cli
from chemospread.io import read_config
from chemospread.stepper import BlowUp


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_zero_horizon_echoes_initial_condition(tmp_path, capsys):
    code, out, _ = run_cli(["simulate", "--T", "0", "--out", str(tmp_path / "r")], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert summary["steps"] == 0
    lines = (tmp_path / "r" / "snapshots.csv").read_text().splitlines()
    assert lines[0] == "step,t,x,u,v" and len(lines) == 402


def test_unstable_step_is_config_error(tmp_path, capsys):
    code, _, err = run_cli(["simulate", "--dt", "0.005", "--h", "0.1", "--out", str(tmp_path)], capsys)
    assert code == 2
    assert "stability" in err


def test_config_round_trip(tmp_path, capsys):
    out = tmp_path / "r"
    assert run_cli(["simulate", "--T", "0.5", "--chi", "1.25", "--stride", "50", "--out", str(out)], capsys)[0] == 0
    first = read_config(out / "config.txt")
    assert first["chi"] == "1.25" and first["stride"] == "50"
    assert run_cli(["simulate", "--config", str(out / "config.txt")], capsys)[0] == 0
    assert read_config(out / "config.txt") == first


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("chi=2\nT=0\n# comment\n")
    out = tmp_path / "r"
    run_cli(["simulate", "--config", str(cfg), "--chi", "3", "--out", str(out)], capsys)
    vals = read_config(out / "config.txt")
    assert vals["chi"] == "3.0" and vals["T"] == "0.0"


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("gamma=2\n")
    assert run_cli(["simulate", "--config", str(cfg)], capsys)[0] == 2


def test_eigen_command(capsys):
    code, out, _ = run_cli(["eigen", "--c", "0", "--delta0", "0.5", "--a", "1"], capsys)
    assert code == 0
    assert json.loads(out)["lambda_closed"] == 0.09375


def test_verify_on_decayed_run(tmp_path, capsys):
    run_dir = tmp_path / "r"
    assert run_cli(["simulate", "--c", "3", "--T", "50", "--out", str(run_dir)], capsys)[0] == 0
    code, out, _ = run_cli(["verify", "--run", str(run_dir)], capsys)
    doc = json.loads(out)
    status = {r["name"]: r["status"] for r in doc["reports"]}
    assert status["equilibrium"] == "precondition not met"
    assert status["envelope"] in ("pass", "fail")
    assert (run_dir / "verify.json").exists()
    assert code == (0 if doc["pass"] else 1)


def test_bracket_invalid_exit_code(tmp_path, capsys):
    code, _, err = run_cli(["find-speed", "--T", "20", "--c-lo", "2.8", "--c-hi", "3.0",
                            "--out", str(tmp_path)], capsys)
    assert code == 4
    assert "need Persisted" in err


def test_blowup_exit_code(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise BlowUp(3, 0.006)

    monkeypatch.setattr(cli, "simulate", boom)
    code, _, _ = run_cli(["simulate", "--T", "1", "--out", str(tmp_path)], capsys)
    assert code == 3
    assert json.loads((tmp_path / "summary.json").read_text())["status"] == "blowup"


def test_sweep_command(tmp_path, capsys):
    code, out, _ = run_cli(["sweep", "--T", "10", "--chis", "1", "--cs", "1,3", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "records.csv").exists() and (tmp_path / "phase.txt").exists()
    assert read_config(tmp_path / "config.txt")["cs"] == "1,3"


def test_classify_command_echoes_inputs(capsys):
    code, out, _ = run_cli(["classify", "--c", "3", "--T", "40"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "Decayed"
    assert doc["params"]["c"] == 3.0 and doc["grid"]["T"] == 40.0


@pytest.mark.parametrize("command", ["simulate", "find-speed", "find-chi-star", "sweep", "verify", "eigen"])
def test_help_lists_defaults(command, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([command, "--help"])
    assert exc.value.code == 0
    assert "default" in capsys.readouterr().out
