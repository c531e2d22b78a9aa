import json

import pytest

from cylperc.cli import ConfigError, DEFAULTS, _merge, run, selftest_checks


def _report(out, name):
    return json.loads((out / f"{name}.json").read_text())


def test_selftest_passes(tmp_path, capsys):
    assert run(["selftest", "--out", str(tmp_path)]) == 0
    rep = _report(tmp_path, "selftest")
    assert rep["ok"] and all(rep["results"]["checks"].values())
    assert all(ok for _, ok in selftest_checks())


def test_seed_is_mandatory(tmp_path, capsys):
    assert run(["sample", "--out", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err


def test_invalid_value_names_its_field(tmp_path, capsys):
    assert run(["walk", "--seed", "1", "--R", "0", "--out", str(tmp_path)]) == 2
    assert "walk.R" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 5\n[sample]\nu = 0.02\nR = 9.0\n')
    assert run(["sample", "--config", str(cfg), "--R", "7", "--out", str(tmp_path)]) == 0
    rep = _report(tmp_path, "sample")
    assert rep["seed"] == 5
    assert rep["config"]["sample"] == {"u": 0.02, "R": 7.0}


def test_unknown_config_key_is_reported(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("seed = 1\n[walk]\nradius = 3\n")
    assert run(["walk", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "walk.radius" in capsys.readouterr().err


def test_merge_rejects_scalar_for_table():
    with pytest.raises(ConfigError, match="walk"):
        _merge(DEFAULTS, {"walk": 3})


def test_reports_are_byte_identical_on_rerun(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["walk", "--seed", "3", "--R", "4", "--walks", "300", "--radii", "2", "4"]
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    ra, rb = (a / "walk.json").read_bytes(), (b / "walk.json").read_bytes()
    assert ra.replace(str(a).encode(), b"") == rb.replace(str(b).encode(), b"")
    rep = json.loads(ra)
    for key in ("schema_version", "git_describe", "seed", "config", "results"):
        assert key in rep


def test_sample_then_render(tmp_path):
    assert run(["sample", "--seed", "2", "--u", "0.05", "--R", "10", "--out", str(tmp_path)]) == 0
    assert run(["render", "--seed", "2", "--pixels", "32", "--rho", "0.8", "--out", str(tmp_path)]) == 0
    svg = (tmp_path / "slice.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    rows = (tmp_path / "cylinders.csv").read_text().splitlines()
    rep = _report(tmp_path, "render")
    assert len(rows) - 1 == rep["results"]["cylinders_in_view"]
    obj = (tmp_path / "mesh.obj").read_text().splitlines()
    assert sum(line.startswith("v ") for line in obj) == 2 * 12 * rep["results"]["cylinders_in_view"]


def test_sample_csv_round_trip(tmp_path):
    from cylperc.lineproc import read_csv

    assert run(["sample", "--seed", "9", "--u", "0.1", "--R", "6", "--out", str(tmp_path)]) == 0
    smp = read_csv(tmp_path / "sample.csv")
    assert len(smp) == _report(tmp_path, "sample")["results"]["lines"]


def test_flow_clean_report(tmp_path):
    assert run(["flow", "--seed", "0", "--format", "csv", "--out", str(tmp_path)]) == 0
    res = _report(tmp_path, "flow")["results"]
    assert res["divergence_error"] < 1e-12
    assert res["event"]["holds"]
    assert (tmp_path / "flow.csv").exists()


def test_renorm_ladder_report(tmp_path):
    assert run(["renorm", "--seed", "0", "--what", "ladder", "--out", str(tmp_path)]) == 0
    res = _report(tmp_path, "renorm")["results"]
    assert res["ladder"]["L"][:2] == [17, 167331]


def test_decouple_cap_report(tmp_path):
    assert run(["decouple", "--seed", "0", "--check", "cap", "--out", str(tmp_path)]) == 0
    cap = _report(tmp_path, "decouple")["results"]["cap"]
    assert cap["closed_form"] == pytest.approx(cap["quadrature"], abs=1e-8)


def test_structured_failure_exits_nonzero(tmp_path):
    # a render without a sample file fails inside the command, not in validation
    assert run(["render", "--seed", "1", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 1
    assert _report(tmp_path, "render")["results"]["error"]


def test_report_reruns_from_its_embedded_config(tmp_path):
    assert run(["walk", "--seed", "4", "--R", "3", "--walks", "200", "--radii", "3", "--out", str(tmp_path)]) == 0
    first = (tmp_path / "walk.json").read_bytes()
    saved = tmp_path / "saved.json"
    saved.write_bytes(first)
    assert run(["walk", "--config", str(saved)]) == 0
    assert (tmp_path / "walk.json").read_bytes() == first
