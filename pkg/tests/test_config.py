import json

import pytest

from mfpd.config import ConfigViolations, load_config, parse_config

BASE = {"holes": [{"center": [0.2, 0.1], "alpha": 3}], "eps": 1e-2}


def cfg_text(**over):
    d = dict(BASE)
    d.update(over)
    return json.dumps(d)


def paths(text):
    with pytest.raises(ConfigViolations) as exc:
        parse_config(text)
    return [p for p, _ in exc.value.violations]


def test_minimal_one_hole_config():
    cfg = parse_config(cfg_text())
    assert cfg.problem.m == 1
    assert cfg.eps == (1e-2,)
    assert cfg.route == "lifted"
    assert cfg.plots is False


def test_negative_tau_reports_its_pointer():
    assert paths(cfg_text(tau=-1)) == ["/tau"]


def test_all_violations_are_collected():
    got = paths(cfg_text(tau=0, route="fast", extra=1, V1="-1", mesh={"bogus": 2}, seed=-3))
    for p in ("/tau", "/route", "/extra", "/V1", "/mesh/bogus", "/seed"):
        assert p in got


def test_eps_logspace_descending():
    cfg = parse_config(cfg_text(eps={"start": 1e-2, "end": 1e-4, "points": 3}))
    assert cfg.eps == pytest.approx((1e-2, 1e-3, 1e-4))
    assert "/eps" in paths(cfg_text(eps={"start": 1e-4, "end": 1e-2, "points": 3}))
    assert "/eps/points" in paths(cfg_text(eps={"start": 1e-2, "end": 1e-4, "points": 0}))


def test_missing_eps_is_reported():
    d = dict(BASE)
    del d["eps"]
    assert paths(json.dumps(d)) == ["/eps"]


@pytest.mark.parametrize("holes,where", [
    ([{"center": [1.2, 0.0], "alpha": 3}], "/holes/0/center"),
    ([{"center": [0.1, 0.0], "alpha": 2}], "/holes/0/alpha"),
    ([{"center": [0.1, 0.0], "alpha": 3, "sign": "up"}], "/holes/0/sign"),
    ([{"center": [0.1, 0.0], "alpha": 3, "sign": "negative"}, {"center": [0.3, 0.0], "alpha": 3}], "/holes/1/sign"),
    ([{"center": [0.1, 0.0], "alpha": 3}, {"center": [0.1, 0.0], "alpha": 4, "sign": "negative"}], "/holes/1/center"),
    ([], "/holes"),
])
def test_hole_violations(holes, where):
    assert where in paths(cfg_text(holes=holes))


@pytest.mark.parametrize("V", ["x", "exp(", "1/(x-x)", 3])
def test_bad_potentials(V):
    assert "/V1" in paths(cfg_text(V1=V))


def test_potential_text_kept():
    cfg = parse_config(cfg_text(V1="exp(0.5*x)"))
    assert cfg.problem.V1_text == "exp(0.5*x)"
    assert cfg.as_dict()["V1"] == "exp(0.5*x)"


def test_infeasible_eps_reported():
    assert "/eps" in paths(cfg_text(eps=0.9))


def test_invalid_json_and_top_level():
    assert paths("{") == [""]
    assert paths("[1]") == [""]


def test_mesh_and_solver_sections_apply():
    cfg = parse_config(cfg_text(mesh={"target_h_far": 0.08, "n_theta": 40}, solver={"max_iter": 5}))
    assert cfg.grading.target_h_far == 0.08
    assert cfg.grading.n_theta == 40
    assert cfg.solver.max_iter == 5
    assert "/solver/max_iter" in paths(cfg_text(solver={"max_iter": "many"}))


def test_shipped_configs_load():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    for path in sorted(root.glob("*.json")):
        load_config(path)
