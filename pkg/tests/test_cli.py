import json
import subprocess
import sys

import pytest

from stieltjes import scenarios
from stieltjes.cli import main


def test_list(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert "allee_train" in out and "cyanobacteria" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stieltjes", "list-scenarios"], capture_output=True, text=True)
    assert res.returncode == 0 and "plateau_linear" in res.stdout


def test_simulate_writes_files(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["simulate", "allee_train", "--x0", "45", "--x0", "30", "--horizon", "48", "--out", str(out),
               "--step", "0.002", "--record-every", "5", "--no-certificate"])
    assert rc == 0
    assert "traj_001 Horizon" in capsys.readouterr().out
    assert sorted(p.name for p in out.iterdir()) == ["scenario.json", "summary.txt", "traj_000.csv",
                                                     "traj_000.meta", "traj_001.csv", "traj_001.meta"]
    meta = (out / "traj_000.meta").read_text()
    assert "x0=45" in meta and "step=0.002" in meta


def test_saved_scenario_reproduces_run(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "rational_decay", "--horizon", "3", "--out", str(first), "--no-certificate"]) == 0
    assert main(["simulate", str(first / "scenario.json"), "--out", str(second), "--no-certificate"]) == 0
    assert (first / "traj_000.csv").read_bytes() == (second / "traj_000.csv").read_bytes()


def test_check_stability(tmp_path, capsys):
    rc = main(["check-stability", "plateau_linear", "--eps", "0.05", "--t0-grid", "0,0.5", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "verdict: UniformlyStable" in out
    assert "divergence:fixed-t0" in out
    kv = (tmp_path / "certificate.txt").read_text()
    assert "verdict=UniformlyStable" in kv
    assert "none" in (tmp_path / "probe.txt").read_text()


def test_integrate_and_gexp(capsys):
    assert main(["integrate", "linear_jumps", "--expr", "1", "--from", "0", "--to", "2.5"]) == 0
    assert capsys.readouterr().out.strip() == "4.5"
    assert main(["gexp", "linear_jumps", "--p", "c", "--p-jump", "nu", "--from", "0", "--to", "2"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.224664, abs=1e-6)
    assert main(["integrate", "rational_decay", "--expr", "2*t/(1+t^2)", "--expr-jump", "0.75",
                 "--from", "0", "--to", "3"]) == 0
    assert capsys.readouterr().out.strip() == "3.80258509299405"


@pytest.mark.parametrize("argv, code", [
    (["simulate", "no_such_scenario"], 2),
    (["integrate", "linear_jumps", "--expr", "1 +", "--from", "0", "--to", "1"], 2),
    (["integrate", "linear_jumps", "--expr", "1", "--from", "2", "--to", "1"], 2),
    (["gexp", "linear_jumps", "--p", "0", "--p-jump", "-1", "--from", "0", "--to", "3"], 3),
    (["integrate", "linear_jumps", "--expr", "log(t-1)", "--from", "0", "--to", "3"], 3),
])
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code
    assert capsys.readouterr().err


def test_config_file(tmp_path, capsys):
    raw = json.loads(scenarios.dump_scenario(scenarios.load_scenario("linear_jumps")))
    raw["domain"]["horizn"] = 4
    path = tmp_path / "s.json"
    path.write_text(json.dumps(raw))
    assert main(["simulate", str(path)]) == 2
    assert "domain.horizn" in capsys.readouterr().err
