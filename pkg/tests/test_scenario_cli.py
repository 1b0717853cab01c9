import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from linefields.cli import Report, main
from linefields.linear import LinearPLF, monstar_alpha_window, normal_form
from linefields.scenario import ScenarioError, load_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def run(tmp_path, command, name, *extra):
    out = tmp_path / "out"
    code = main([command, "--config", str(SCENARIOS / f"{name}.json"), "--out", str(out), *extra])
    return code, out


def report(out, name, command):
    return Report.from_json((out / f"{name}_{command}.json").read_text())


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def write(tmp_path, data):
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(data))
    return str(p)


# ---------------------------------------------------------------------------
# scenario parsing


def test_every_checked_in_scenario_parses():
    files = sorted(SCENARIOS.glob("*.json"))
    assert len(files) >= 15
    for f in files:
        sc = load_scenario(f)
        assert sc.name == f.stem


@pytest.mark.parametrize("data, fragment", [
    ({"X": ["x", "y"]}, "missing 'Y'"),
    ({"X": ["x", "y"], "Y": ["1", "0"], "colour": 1}, "unknown"),
    ({"X": ["x +", "y"], "Y": ["1", "0"]}, "bad expression"),
    ({"X": ["x", "y"], "Y": ["1", "0"], "domain": {"box": [1, -1, 0, 1]}}, "box"),
    ({"X": ["x", "y"], "Y": ["1", "0"], "portrait": {"step": -1}}, "positive"),
    ({"X": ["x*{a}", "y"], "Y": ["1", "0"]}, "unbound"),
    ({"X": ["x", "y"], "Y": ["1", "0"], "domain": {"torus": [0, 1]}}, "positive"),
])
def test_invalid_scenarios_raise(data, fragment):
    with pytest.raises(ScenarioError, match=fragment):
        parse_scenario(data)


def test_parameter_substitution():
    sc = parse_scenario({"X": ["{a}*x", "y"], "Y": ["1", "0"], "params": {"a": 2.5}})
    assert sc.expressions()[0] == ("(2.5)*x", "y")
    assert sc.build({"a": -1}).X(1.0, 0.0) == (-1.0, 0.0)


# ---------------------------------------------------------------------------
# exit codes


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["classify", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["classify", "--config", str(bad)]) == 2
    assert main(["classify", "--config", write(tmp_path, {"X": ["x", "y"], "Y": ["1", "0"], "oops": 0})]) == 2
    assert main(["metric", "--config", str(SCENARIOS / "lemon.json"), "--format", "svg"]) == 2
    assert main(["scan", "--config", str(SCENARIOS / "lemon.json")]) == 2
    assert main(["torus-check", "--config", str(SCENARIOS / "lemon.json")]) == 2
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exit_3_names_check(tmp_path, capsys):
    # both fields vanish at the origin: the linearization is undefined
    path = write(tmp_path, {"X": ["x", "y"], "Y": ["x", "-y"], "point": [0, 0],
                            "sweep": {"param": "a", "values": [1]}})
    assert main(["scan", "--config", path]) == 3
    assert "numerical failure in check 'linearization'" in capsys.readouterr().err


@pytest.mark.parametrize("name, cls, index", [
    ("lemon", "Lemon", "1/2"), ("monstar", "Monstar", "1/2"), ("star", "Star", "-1/2"),
])
def test_classify_canonical(tmp_path, name, cls, index):
    code, out = run(tmp_path, "classify", name)
    assert code == 0
    r = report(out, name, "classify")
    assert len(r.records) == 1
    assert r.records[0]["class"] == cls and r.records[0]["index"] == index
    assert r.summary["index_identity_ok"]


def test_degenerate_scenario_exit_4(tmp_path):
    # the checked-in angle is the lower edge of the window computed here
    lo = monstar_alpha_window(normal_form(LinearPLF(np.diag([1.0, 3.0]), [1, 0])))[0][0]
    assert load_scenario(SCENARIOS / "degenerate.json").params["alpha"] == pytest.approx(lo, abs=1e-12)
    code, out = run(tmp_path, "classify", "degenerate")
    assert code == 4
    rec = report(out, "degenerate", "classify").records[0]
    assert rec["class"] == "Degenerate" and "marginal" in rec["flags"]


@pytest.mark.parametrize("name, case", [
    ("fig4-case1", "Case1"), ("fig4-case2", "Case2"), ("fig4-case3", "Case3"),
    ("fig7-case1", "Case1"), ("fig7-case2", "Case2"), ("fig7-case3", "Case3"),
])
def test_case_example_scenarios(tmp_path, name, case):
    code, out = run(tmp_path, "classify", name)
    assert code == 0
    assert report(out, name, "classify").records[0]["case"] == case


# ---------------------------------------------------------------------------
# reports


def test_report_round_trip(tmp_path):
    code, out = run(tmp_path, "classify", "torus-sine")
    text = (out / "torus-sine_classify.json").read_text()
    r = Report.from_json(text)
    assert r.to_json() == text
    assert r == Report.from_json(r.to_json())
    assert r.summary["index_sum"] == "0"


def test_stdout_when_no_out(capsys):
    assert main(["classify", "--config", str(SCENARIOS / "star.json")]) == 0
    r = Report.from_json(capsys.readouterr().out)
    assert r.command == "classify" and r.records[0]["class"] == "Star"


def test_classify_csv_columns(capsys):
    assert main(["classify", "--config", str(SCENARIOS / "star.json"), "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == [
        "id", "x", "y", "field", "zero_type", "hyperbolic", "field_index", "index", "case", "class",
        "kappa", "Phi", "fixed_points", "slopes", "stabilities", "flags",
    ]
    assert rows[1][9] == "Star" and len(rows[1][12].split(";")) == 3


def test_index_and_torus_check(tmp_path):
    code, out = run(tmp_path, "index", "lemon")
    assert code == 0
    rec = report(out, "lemon", "index").records[0]
    assert rec["twice_index"] == 1 and rec["identity_ok"]
    code, out = run(tmp_path, "torus-check", "torus-sine")
    assert code == 0
    r = report(out, "torus-sine", "torus-check")
    assert r.summary["index_sum"] == "0" and len(r.records) == 4


def test_blowup_checks_pass(tmp_path):
    code, out = run(tmp_path, "blowup", "star", "--seed", "3")
    assert code == 0
    rec = report(out, "star", "blowup").records[0]
    assert len(rec["zeros"]) == 6 and all(z["kind"] == "saddle" for z in rec["zeros"])
    assert rec["dictionary_ok"] and rec["jumps_ok"]
    assert all(abs(j - math.pi / 2) < 1e-3 for j in rec["jumps"])


# ---------------------------------------------------------------------------
# portraits


def test_portrait_outputs(tmp_path):
    code, out = run(tmp_path, "portrait", "lemon")
    assert code == 0
    svg = (out / "lemon.svg").read_text()
    assert svg.count('id="singularity-0"') == 1 and 'id="singularity-1"' not in svg
    assert "Lemon" in svg
    assert svg.count('id="curve-') >= 20
    rows = list(csv.reader(io.StringIO((out / "lemon_streamlines.csv").read_text())))
    assert rows[0] == ["curve_id", "point_index", "x", "y"]
    assert read_csv(out / "lemon_singularities.csv")[0]["class"] == "Lemon"


def test_portrait_is_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    cfg = str(SCENARIOS / "fig4-case2.json")
    assert main(["portrait", "--config", cfg, "--out", str(a)]) == 0
    assert main(["portrait", "--config", cfg, "--out", str(b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    r = report(a, "fig4-case2", "portrait")
    dirs = r.summary["skeleton_directions"]
    assert len(dirs) == 3
    # three separatrix directions in an open half-plane
    assert max(dirs) - min(dirs) < math.pi


def test_bifurcation_portraits_differ(tmp_path):
    run(tmp_path, "portrait", "bifurcation-lam1", "--format", "csv")
    code, out = run(tmp_path, "portrait", "bifurcation-lam3", "--format", "csv")
    assert code == 0
    assert not (out / "bifurcation-lam1.svg").exists()
    a = (out / "bifurcation-lam1_streamlines.csv").read_bytes()
    b = (out / "bifurcation-lam3_streamlines.csv").read_bytes()
    assert a != b


# ---------------------------------------------------------------------------
# scans


def test_bifurcation_scan_marks_lambda_two(tmp_path):
    code, out = run(tmp_path, "scan", "bifurcation")
    assert code == 0
    rows = read_csv(out / "bifurcation_scan.csv")
    assert [float(r["value"]) for r in rows] == [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5]
    for r in rows:
        lam = float(r["value"])
        assert float(r["ray_slope0"]) == pytest.approx(lam / 2, abs=1e-6)
        assert (r["marginal"] == "true") == (lam == 2.0)
        assert r["ray_class"] == ("Lemon" if lam < 2 else "Degenerate" if lam == 2 else "Monstar")
        # normalized pipeline: the metric is an isometry away from the Euclidean pair
        assert r["class"] == "Lemon"
    assert [r["transition"] for r in rows].count("true") == 2


def test_alpha_sweep_matches_window(tmp_path):
    code, out = run(tmp_path, "scan", "alpha-sweep")
    assert code == 0
    windows = monstar_alpha_window(normal_form(LinearPLF(np.diag([1.0, 3.0]), [1, 0])))

    def inside(a):
        return any(lo < a < hi or lo < a + 2 * math.pi < hi for lo, hi in windows)

    rows = read_csv(out / "alpha-sweep_scan.csv")
    assert len(rows) == 73
    for r in rows:
        a = float(r["value"])
        assert r["class"] == ("Monstar" if inside(a) else "Lemon")
        assert int(r["fixed_points"]) == (3 if inside(a) else 1)


def test_kappa_family_constant_case1(tmp_path):
    code, out = run(tmp_path, "scan", "kappa-family")
    assert code == 0
    rows = read_csv(out / "kappa-family_scan.csv")
    assert rows and all(r["case"] == "Case1" and float(r["kappa"]) > 1 for r in rows)
    assert all(r["transition"] == "false" for r in rows)


# ---------------------------------------------------------------------------
# metric


def test_metric_worked_pair(tmp_path):
    code, out = run(tmp_path, "metric", "metric-worked")
    assert code == 0
    rows = read_csv(out / "metric-worked_metric.csv")
    assert list(rows[0]) == ["x", "y", "g11", "g12", "g22", "degenerate"]
    origin = [r for r in rows if float(r["x"]) == 0 and float(r["y"]) == 0]
    assert len(origin) == 1
    assert float(origin[0]["g11"]) == pytest.approx(1, abs=1e-12)
    assert float(origin[0]["g12"]) == pytest.approx(0, abs=1e-12)
    assert float(origin[0]["g22"]) == pytest.approx(0.5, abs=1e-12)
    s = report(out, "metric-worked", "metric").summary
    assert s["spd_ok"] and s["parallelogram_residual"] <= 1e-10


def test_metric_equal_fields_exit_3(tmp_path, capsys):
    code, out = run(tmp_path, "metric", "metric-equal")
    assert code == 3
    s = report(out, "metric-equal", "metric").summary
    assert s["degenerate_points"] == s["points"] and s["degenerate_locations"]
    assert "bracket span" in capsys.readouterr().err


def test_metric_random_pair_mostly_spd(tmp_path):
    code, out = run(tmp_path, "metric", "metric-random", "--grid", "31")
    assert code == 0
    s = report(out, "metric-random", "metric").summary
    assert s["spd_fraction"] >= 0.99 and s["points"] == 31 * 31
