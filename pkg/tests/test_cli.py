import json
import subprocess
import sys

import pytest

from cknlab.cli import RunConfig, main, parse_args, parse_config
from cknlab.errors import ParseError
from cknlab.io import read_csv


def test_parse_config_values():
    cfg = parse_config("# comment\ncommand = constants\ngamma = 0.3\nb-list = 0, 0.5\nnewton = false\n")
    assert cfg.command == "constants" and cfg.gamma == 0.3
    assert cfg.b_list == (0.0, 0.5) and cfg.newton is False


def test_parse_config_unknown_key_names_line():
    with pytest.raises(ParseError, match="unknown key 'gama' on line 2"):
        parse_config("gamma = 0.3\ngama = 0.2\n")


def test_parse_config_bad_value():
    with pytest.raises(ParseError, match="line 1"):
        parse_config("per_decade = many\n")


def test_run_config_validation():
    with pytest.raises(ParseError):
        RunConfig(command="nope")
    with pytest.raises(ParseError):
        RunConfig(window=0.0)


def test_flags_override_file(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("command = constants\ngamma = 0.3\n")
    cfg = parse_args(["--config", str(conf), "--gamma", "0.25"])
    assert cfg.command == "constants" and cfg.gamma == 0.25
    assert parse_args(["liouville-check", "--config", str(conf)]).command == "liouville-check"


def test_unknown_key_exit_code(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("gama = 0.3\n")
    assert main(["--config", str(conf), "--out-dir", str(tmp_path)]) == 2


def test_domain_error_exit_code(tmp_path):
    # the counterexample needs -1 < b < 0
    assert main(["counterexample", "--out-dir", str(tmp_path), "--b", "0"]) == 2
    err = json.loads((tmp_path / "errors.json").read_text())
    assert err["error_type"] == "DomainError" and err["status"] == 2


def test_liouville_check(tmp_path):
    assert main(["liouville-check", "--out-dir", str(tmp_path), "--b-list", "0,0.5", "--rho-list", "1"]) == 0
    rows = read_csv(tmp_path / "liouville.csv")
    assert len(rows) == 2
    assert all(float(r["rel_err"]) < 1e-6 for r in rows)


def test_constants_command(tmp_path):
    assert main(["constants", "--out-dir", str(tmp_path), "--gammas", "0.3", "--alpha-points", "3"]) == 0
    doc = json.loads((tmp_path / "constants.json").read_text())
    assert doc["window_violations"] == []


def test_counterexample_command(tmp_path):
    assert main(["counterexample", "--out-dir", str(tmp_path), "--b", "-0.5", "--t-list", "0.01,0.001"]) == 0
    rows = read_csv(tmp_path / "counterexample.csv")
    assert [r["v_id"] for r in rows] == ["t=1e-02", "t=1e-03"]
    assert all(float(r["gap"]) < 0 for r in rows)


def test_limit_ladder_command(tmp_path):
    assert main(["limit-ladder", "--out-dir", str(tmp_path), "--eps-list", "0.2,0.1"]) == 0
    rows = read_csv(tmp_path / "ladder.csv")
    assert list(rows[0]) == ["epsilon", "ratio", "el_residual", "sup_diff", "rho_fit", "fit_err", "mass_fit"]
    assert len(rows) == 2
    assert "rungs" in json.loads((tmp_path / "ladder.json").read_text())


def test_minimize_command(tmp_path):
    assert main(["minimize", "--out-dir", str(tmp_path), "--epsilon", "0.2", "--per-decade", "8"]) == 0
    doc = json.loads((tmp_path / "minimize.json").read_text())
    assert doc["converged"] is True


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "cknlab", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "selftest" in out.stdout
