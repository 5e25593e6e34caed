import json

import numpy as np
import pytest

from zermelo.cli import main
from zermelo.io import read_trajectory_csv
from zermelo.scenario import (
    PRESETS,
    ScenarioError,
    load_scenario,
    parse_scenario,
    run_scenario,
    scenario_from_dict,
    serialize_scenario,
)

CHEAP = {
    "preset": "constant-table2",
    "n_tacks": [1, 2],
    "solver": {"T": 20},
    "optimizer": {"max_outer": 40, "patience": 10},
    "straight_steps": 100,
}


def test_minimal_preset_document():
    s = parse_scenario('{"preset": "constant-table2"}')
    assert s.A_vec.tolist() == [0, 0] and s.B_vec.tolist() == [2, 8]
    specs = s.metric_specs()
    assert specs["beta"]["c1"] == "3/4" and specs["alpha"]["theta"] == "pi"
    assert s.solver.T == 1000 and s.n_tacks == (1, 2, 3, 4)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_validates_and_round_trips(name):
    s = load_scenario(name)
    again = parse_scenario(serialize_scenario(s))
    assert again == s
    assert serialize_scenario(again) == serialize_scenario(s)


def test_strong_wind_is_rejected_with_expression():
    doc = {"metrics": {"alpha": {"family": "elliptic", "a": "1", "b": "1", "c1": "2", "c2": "0"}},
           "A": [0, 0], "B": [1, 0]}
    with pytest.raises(ScenarioError, match=r"\(c1/a\)\^2 \+ \(c2/b\)\^2 < 1.*'2'"):
        scenario_from_dict(doc)


@pytest.mark.parametrize("doc,pattern", [
    ({"preset": "constant-table2", "colour": 1}, "unknown key"),
    ({"preset": "constant-table2", "solver": {"TT": 5}}, "unknown key"),
    ({"preset": "nope"}, "unknown preset"),
    ({"metrics": {"m": {"family": "spline"}}, "A": [0, 0], "B": [1, 0]}, "unknown metric family"),
    ({"metrics": {"m": {"family": "elliptic", "a": "1", "b": "1", "c1": "0", "c2": "0", "k": 1}},
      "A": [0, 0], "B": [1, 0]}, "unknown key"),
    ({"metrics": {"m": {"family": "elliptic", "a": "1", "b": "1", "c1": "exp(x)", "c2": "0"}},
      "A": [0, 0], "B": [1, 0]}, "field c1"),
    ({"preset": "constant-table2", "B": [0, 0]}, "must differ"),
    ({"preset": "constant-table2", "order": ["gamma"]}, "unknown metric"),
    ({"preset": "constant-table2", "n_tacks": [-1]}, "n_tacks"),
    ({"preset": "constant-table2", "seeds": [[[1, 1], [2, 2], [3, 3], [4, 4], [5, 5]]]}, "matches no entry"),
    ({"preset": "constant-table2", "solver": {"rho": 2}}, "rho"),
])
def test_invalid_documents(doc, pattern):
    with pytest.raises(ScenarioError, match=pattern):
        scenario_from_dict(doc)


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ScenarioError, match="line 2, column 3"):
        parse_scenario('{\n  preset: 1}')


def test_reversed_family_and_expression_coordinates():
    s = scenario_from_dict({
        "metrics": {"alpha": {"family": "elliptic", "a": "1", "b": "1", "c1": "1/2", "c2": "0"},
                    "back": {"family": "reversed", "metric": "alpha"}},
        "A": [0, 0], "B": ["2*pi", 0], "order": ["alpha", "back"]})
    m = s.build_metrics()
    assert s.B_vec[0] == pytest.approx(2 * np.pi)
    assert float(m["back"].F(0, [0, 0], [1, 0])) == pytest.approx(float(m["alpha"].F(0, [0, 0], [-1, 0])))
    assert s.sequence(3) == ["alpha", "back", "alpha", "back"]


@pytest.fixture(scope="module")
def cheap_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cheap")
    s = scenario_from_dict(CHEAP)
    return s, out, run_scenario(s, str(out))


def test_run_writes_report_and_files(cheap_run):
    s, out, report = cheap_run
    on_disk = json.loads((out / "report.json").read_text())
    assert set(on_disk) >= {"version", "scenario", "baselines", "runs", "files"}
    assert [r["n_tacks"] for r in on_disk["runs"]] == [1, 2]
    assert all(r["status"] == "ok" for r in on_disk["runs"])
    straight = on_disk["baselines"]["straight"]
    assert straight["alpha"]["time"] != straight["beta"]["time"]
    for fn in on_disk["files"]:
        assert (out / fn).exists()


def test_csv_trajectories_revalidate_on_reload(cheap_run):
    s, out, report = cheap_run
    metrics = s.build_metrics()
    for run in report["runs"]:
        segs = read_trajectory_csv(out / run["csv"], [metrics[k] for k in run["sequence"]])
        assert len(segs) == run["n_tacks"] + 1
        assert segs[-1].t[-1] == pytest.approx(run["total_time"], rel=1e-15)
    header = (out / "tacks_1.csv").read_text().splitlines()[0]
    assert header == "segment,s,t,x,y,vx,vy"


def test_svg_is_deterministic(cheap_run, tmp_path):
    s, out, _ = cheap_run
    run_scenario(s, str(tmp_path))
    for name in ("tacks_1.svg", "tacks_2.svg"):
        first = (out / name).read_bytes()
        assert first == (tmp_path / name).read_bytes()
        assert first.startswith(b"<?xml") and b'version="1.1"' in first


def test_csv_reader_rejects_tampering(cheap_run, tmp_path):
    s, out, _ = cheap_run
    m = s.build_metrics()
    lines = (out / "tacks_1.csv").read_text().splitlines()
    cols = lines[3].split(",")
    cols[2] = repr(float(cols[2]) + 1e-3)
    lines[3] = ",".join(cols)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        read_trajectory_csv(bad, [m["alpha"], m["beta"]])


def test_cli_verbs(tmp_path, capsys):
    assert main(["presets"]) == 0
    listed = capsys.readouterr().out
    assert all(name in listed for name in PRESETS)
    assert main(["validate", "position-only"]) == 0
    assert main(["validate", "constant-table2", "--print"]) == 0
    printed = capsys.readouterr().out
    assert parse_scenario(printed[printed.index("{"):]).name == "constant-table2"
    bad = tmp_path / "bad.json"
    bad.write_text('{"preset": "constant-table2", "extra": 1}')
    assert main(["validate", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_cli_run_and_flags(tmp_path, capsys):
    cfg = tmp_path / "cheap.json"
    cfg.write_text(json.dumps({**CHEAP, "n_tacks": [1]}))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out), "--seed", "7", "--threads", "2"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["scenario"]["seed"] == 7 and report["scenario"]["threads"] == 2
    assert "wrote" in capsys.readouterr().out


def test_cli_bench(capsys):
    assert main(["bench"]) == 0
    assert "GEORCE-H" in capsys.readouterr().out
