import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvedflats.cli import (
    ConfigError,
    RunConfig,
    _Run,
    apply_overrides,
    cmd_plot,
    load_config,
    load_generated,
    main,
)
from curvedflats.report import CheckReport, DefectReport


def test_config_defaults_and_validation():
    cfg = RunConfig.from_dict({})
    assert cfg.m == 1.0 and cfg.grids == [17, 33, 65] and cfg.seed == 0
    with pytest.raises(ConfigError, match="nonzero"):
        RunConfig.from_dict({"m": 0})
    with pytest.raises(ConfigError, match="strictly"):
        RunConfig.from_dict({"grids": [33, 17]})
    with pytest.raises(ConfigError, match="preset"):
        RunConfig.from_dict({"spec": {"preset": "nope"}})
    with pytest.raises(ConfigError, match="invalid spec"):
        RunConfig.from_dict({"spec": {"n": 2}})


def test_malformed_json_reports_location(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "m": 1,\n  "seed": \n}')
    with pytest.raises(ConfigError, match=r"c\.json:4:1"):
        load_config(str(p))
    assert main(["gen", "--config", str(p), "--out", str(tmp_path / "w.json")]) == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(-1000, 1000), st.floats(0.1, 5.0))
def test_overrides_parse_json_values(seed, m):
    d = apply_overrides({"spec": {"preset": "default"}}, [f"seed={seed}", f"m={m!r}", "spec.N=17", "spec.preset=perturbed"])
    assert d["seed"] == seed and d["m"] == m
    assert d["spec"] == {"preset": "perturbed", "N": 17}


def test_override_needs_equals():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["seed"])


def test_gen_round_trip(tmp_path):
    out = tmp_path / "w.json"
    assert main(["gen", "--set", "spec.N=33", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["regular"] and doc["commuting"]
    spec, values, check = load_generated(out)
    assert values.shape == (33, 33, 6, 4)
    assert check["bad_signature_nodes"] == 0 and check["max_regeneration_diff"] < 1e-12


def test_gen_flags_degenerate(tmp_path):
    out = tmp_path / "w.json"
    main(["gen", "--set", 'spec={"preset": "degenerate", "N": 33}', "--out", str(out)])
    assert json.loads(out.read_text())["regular"] is False


def test_checks_catch_errors_and_apply_tolerances():
    run = _Run(RunConfig.from_dict({"tolerances": {"x": 5.0}}))

    def boom():
        raise RuntimeError("broken")

    rep = run.run("broken", boom)
    assert not rep.passed and "broken" in rep.notes[0]

    def fine():
        r = CheckReport("fine")
        r.add(DefectReport("x", [2.0], 1.0))
        return r

    assert run.run("fine", fine).passed


def test_convergence_sampled_two_grids(tmp_path, capsys):
    rep = tmp_path / "cv.json"
    code = main(["convergence", "--grids", "17,33", "--sampled-only", "--report", str(rep)])
    assert code == 0
    doc = json.loads(rep.read_text())
    assert all("order" not in e for e in doc["convergence"].values())
    assert "fewer than three grids" in doc["checks"][0]["notes"][0]


def test_report_shape(verify_report):
    names = [c["check"] for c in verify_report["checks"]]
    assert names[:3] == ["curved_flat", "demoulin", "gcr"]
    assert set(verify_report["fields"]) == {"q_det", "g_det", "gcr_max", "eta_closed", "legendre", "DW_plaquette"}
    assert {"numpy", "scipy", "jax", "timestamp"} <= set(verify_report["environment"])


def test_plot_writes_csv(verify_report, tmp_path):
    written = cmd_plot(verify_report, tmp_path)
    assert len(written) == 6
    lines = (tmp_path / "q_det.csv").read_text().splitlines()
    assert lines[0] == "i,j,q_det" and len(lines) == 1 + 33 * 33


def test_plot_empty_report(tmp_path, caplog):
    assert cmd_plot({"checks": []}, tmp_path / "out") == []
    assert not (tmp_path / "out").exists()
    assert "nothing written" in caplog.text
