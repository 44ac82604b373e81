import json
import math

import numpy as np
import pytest

from stieltjes import scenarios
from stieltjes.errors import ConfigError
from stieltjes.solver import Termination

BUILTINS = [bid for bid, _ in scenarios.list_scenarios()]


def test_builtin_ids():
    assert set(BUILTINS) >= {"linear_jumps", "arctan_impulse", "rational_decay", "allee_train",
                             "cyanobacteria", "plateau_linear"}


def test_builtin_parameters():
    allee = scenarios.load_scenario("allee_train")
    assert allee.system.params == {"rho": 0.001, "K": 100.0, "M": 50.0, "d": 0.03, "trains_per_day": 24.0}
    d = scenarios.build_derivator(allee)
    assert [e.time for e in d.jumps_in(0, 3.5)] == [0.0, 1.0, 2.0, 3.0]
    assert all(e.gap == 1.0 for e in d.jumps_in(0, 48))
    cy = scenarios.load_scenario("cyanobacteria")
    assert cy.system.params == {"rho": 1.0, "K": 10.0, "alpha": 0.001, "beta": 0.01}
    assert cy.domain.center == [10.0, 0.1]
    rd = scenarios.load_scenario("rational_decay")
    assert rd.system.params["nu"] == -1.5
    f = scenarios.build_field(rd)
    assert 1 + f.at_jump(1.0, [1.0])[0] == -0.5
    assert scenarios.load_scenario("arctan_impulse").system.params["kappa"] == 2.0


def test_horizon_defaults():
    assert scenarios.load_scenario("linear_jumps").domain.horizon == 20.0
    assert scenarios.load_scenario("allee_train").domain.horizon == 300.0
    assert scenarios.load_scenario("cyanobacteria").domain.horizon == 200.0


@pytest.mark.parametrize("bid", BUILTINS)
def test_round_trip(bid, tmp_path):
    cfg = scenarios.load_scenario(bid)
    path = tmp_path / f"{bid}.json"
    path.write_text(scenarios.dump_scenario(cfg))
    assert scenarios.load_scenario(path) == cfg


def _raw(bid="linear_jumps"):
    return json.loads(scenarios.dump_scenario(scenarios.load_scenario(bid)))


def test_unknown_key_has_path():
    raw = _raw()
    raw["domain"]["rO"] = 3.0
    with pytest.raises(ConfigError) as exc:
        scenarios.validate_config(raw)
    assert exc.value.path == "domain.rO"
    raw = _raw()
    raw["system"]["params"]["rh0"] = 1.0
    with pytest.raises(ConfigError) as exc:
        scenarios.validate_config(raw)
    assert "rh0" in str(exc.value)
    raw = _raw()
    raw["derivator"]["pieces"][0]["slope"] = "fast"
    with pytest.raises(ConfigError) as exc:
        scenarios.validate_config(raw)
    assert exc.value.path == "derivator.pieces.0.slope"


def test_dimension_mismatch():
    raw = _raw()
    raw["domain"]["center"] = [0.0, 0.0]
    with pytest.raises(ConfigError):
        scenarios.validate_config(raw)
    raw = _raw()
    raw["initial"]["states"] = [[1.0, 2.0]]
    with pytest.raises(ConfigError):
        scenarios.validate_config(raw)


def test_bad_step_and_files(tmp_path):
    raw = _raw()
    raw["step"] = 0.0
    with pytest.raises(ConfigError):
        scenarios.validate_config(raw)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        scenarios.load_scenario(bad)
    with pytest.raises(ConfigError):
        scenarios.load_scenario(tmp_path / "missing.json")


def expr_scenario(**extra):
    raw = {
        "name": "damped",
        "derivator": {"pieces": [{"start": 0, "end": 2, "kind": "smooth", "value": "t^2/4", "derivative": "t/2"},
                                 {"start": 2, "end": "inf", "kind": "linear", "slope": 1}],
                      "jumps": {"kind": "list", "events": [[1.5, 0.5], [3.0, 1.0]]}},
        "system": {"continuous": ["-k*x1 + x2", "-x2"], "jump": ["-0.5*x1", "-0.5*x2"], "constants": {"k": 2}},
        "domain": {"horizon": 5, "center": [0, 0], "r0": 10},
        "initial": {"states": [[1, 1]], "radial": {"radii": [0.5]}},
        "candidate": {"V": "x1^2 + x2^2", "grad": ["2*x1", "2*x2"], "a": "s^2", "b": "2*s^2"},
    }
    raw.update(extra)
    return raw


def test_expression_scenario(tmp_path):
    cfg = scenarios.validate_config(expr_scenario())
    assert cfg.dimension == 2
    assert len(scenarios.initial_states(cfg)) == 5
    res = scenarios.run_scenario(cfg, tmp_path)
    assert all(tr.termination is Termination.HORIZON for tr in res.trajectories)
    header = (tmp_path / "traj_000.csv").read_text().splitlines()[0]
    assert header == "t,g,x1,x2,x1_plus,x2_plus,V,Vdot_g"
    summary = (tmp_path / "summary.txt").read_text()
    assert "traj_004.termination=Horizon" in summary
    assert "certificate.verdict=UniformlyStable" in summary
    assert (tmp_path / "certificate.txt").exists()


def test_expression_errors_have_paths():
    raw = expr_scenario()
    raw["system"]["continuous"][1] = "-x2 +"
    with pytest.raises(ConfigError) as exc:
        scenarios.build_field(scenarios.validate_config(raw))
    assert exc.value.path == "system"
    raw = expr_scenario()
    raw["candidate"]["V"] = "x3"
    with pytest.raises(ConfigError):
        scenarios.validate_config(raw)


def test_batch_isolation(tmp_path):
    raw = expr_scenario(system={"continuous": ["-x1*log(x1)", "-x2"]})
    raw["initial"] = {"states": [[2.0, 1.0], [-1.0, 1.0], [0.5, 2.0]]}
    raw.pop("candidate")
    cfg = scenarios.validate_config(raw)
    res = scenarios.run_scenario(cfg, tmp_path / "batch")
    assert res.trajectories[1] is None and "EvaluationError" in res.errors[1]
    assert res.trajectories[0] is not None and res.trajectories[2] is not None
    solo = scenarios.run_scenario(scenarios.with_overrides(cfg, states=[[0.5, 2.0]]), tmp_path / "solo")
    assert (tmp_path / "batch" / "traj_002.csv").read_bytes() == (tmp_path / "solo" / "traj_000.csv").read_bytes()
    assert "error=" in (tmp_path / "batch" / "traj_001.meta").read_text()


def test_reproducible_bytes(tmp_path):
    cfg = scenarios.with_overrides(scenarios.load_scenario("linear_jumps"), horizon=6.0)
    scenarios.run_scenario(cfg, tmp_path / "a", workers=1)
    scenarios.run_scenario(cfg, tmp_path / "b", workers=3)
    for name in ("traj_000.csv", "traj_001.csv", "summary.txt", "certificate.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_allee_x0_45(tmp_path):
    cfg = scenarios.with_overrides(scenarios.load_scenario("allee_train"), states=[[45.0]])
    res = scenarios.run_scenario(cfg, tmp_path, certificate=False)
    tr = res.trajectories[0]
    assert tr.termination is Termination.HORIZON
    path = []
    for xl, xr, jumped in zip(tr.x_left[:, 0], tr.x_right[:, 0], tr.is_jump):
        path.append(xl)
        if jumped:
            path.append(xr)
    assert tr.is_jump.sum() == 301
    assert np.all(np.diff(path) < 0)


def test_cyanobacteria_converges(tmp_path):
    cfg = scenarios.with_overrides(scenarios.load_scenario("cyanobacteria"), states=[[9.5, 0.12]])
    tr = scenarios.run_scenario(cfg, tmp_path, certificate=False).trajectories[0]
    assert tr.times[-1] == 200.0
    assert np.max(np.abs(tr.final_state - [10.0, 0.1])) <= 1e-2


def test_plateau_frozen(tmp_path):
    cfg = scenarios.load_scenario("plateau_linear")
    res = scenarios.run_scenario(cfg, tmp_path, certificate=False)
    for tr in res.trajectories:
        after = tr.times >= 1.0
        assert np.all(tr.x_left[after] == tr.x_left[after][0])


@pytest.mark.parametrize("bid", BUILTINS)
def test_dsl_twin_matches_builtin(bid):
    cfg = scenarios.load_scenario(bid)
    d = scenarios.build_derivator(cfg)
    compiled, dsl = scenarios.build_field(cfg), scenarios.build_dsl_field(cfg)
    for t in np.linspace(cfg.domain.t0 + 0.1, cfg.domain.horizon, 37):
        for x0 in scenarios.initial_states(cfg):
            a = compiled(float(t), x0)
            b = dsl(float(t), x0)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
    for ev in d.jumps_in(cfg.domain.t0, min(cfg.domain.horizon, 50.0)):
        for x0 in scenarios.initial_states(cfg):
            assert np.allclose(compiled.at_jump(ev.time, x0), dsl.at_jump(ev.time, x0), rtol=1e-12, atol=1e-15)


def test_overrides():
    cfg = scenarios.with_overrides(scenarios.load_scenario("allee_train"), step=0.01, horizon=50.0,
                                   states=[[20.0]], out="somewhere", record_every=3)
    assert cfg.step == 0.01 and cfg.domain.horizon == 50.0
    assert scenarios.initial_states(cfg) == [[20.0]]
    assert cfg.outputs.directory == "somewhere" and cfg.outputs.record_every == 3
    assert math.isinf(scenarios.load_scenario("linear_jumps").domain.r0)


def test_fd_fallback_flagged(tmp_path):
    raw = expr_scenario()
    del raw["candidate"]["grad"]
    cfg = scenarios.validate_config(raw)
    rep = scenarios.run_certificate(cfg)
    assert rep.sampling["gradient"].startswith("central finite difference")
    assert rep.verdict.value == "UniformlyStable"
