import json
from pathlib import Path

import numpy as np
import pytest

from powerstab import PowerTrace, UtilitySpec, check, load_csv, save_csv
from powerstab.cli import main
from powerstab.scenario import Scenario, ScenarioError, run_scenario

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj))
    return str(path)


def small_scenario(tmp_path, mitigations=(), **over):
    doc = {
        "workload": {"compute_phase_s": 1.5, "comm_phase_s": 1.0, "duration_s": 30.0, "dt_s": 0.01},
        "device": {"tdp_w": 1000, "idle_w": 100},
        "fleet": {"gpus_per_server": 8, "servers_per_rack": 2, "racks": 3, "host_overhead_w": 6000},
        "mitigations": list(mitigations),
        "spec": {"ramp_up_limit_w_per_s": 1e5, "ramp_down_limit_w_per_s": 1e5, "dynamic_range_w": 1e5,
                 "bands": [[0.1, 20, 0.2]]},
        "seed": 1,
    }
    doc.update(over)
    return write_json(tmp_path / "sc.json", doc)


def test_gen_square_row_count(workdir, capsys):
    code = main(["gen", "--kind", "square", "--period", "20", "--duty", "0.5", "--high", "1000", "--low", "300",
                 "--duration", "60", "--dt", "0.001", "--out", "t.csv"])
    assert code == 0
    lines = Path("t.csv").read_text().splitlines()
    assert lines[0] == "time_s,power_w" and len(lines) - 1 == 60000


def test_gen_training_with_seed(workdir):
    write_json("wl.json", {"jitter_frac": 0.1, "edp_spikes": True})
    args = ["gen", "--kind", "training", "--workload", "wl.json", "--duration", "10", "--seed", "4"]
    assert main(args + ["--out", "a.csv", "--svg", "a.svg"]) == 0
    assert main(args + ["--out", "b.csv"]) == 0
    assert Path("a.csv").read_bytes() == Path("b.csv").read_bytes()
    assert Path("a.svg").exists()


def test_check_constant_passes(workdir, capsys):
    save_csv(PowerTrace(0.01, [5e7] * 3000), "constant.csv")
    write_json("spec.json", {"ramp_up_limit_w_per_s": 1e6, "ramp_down_limit_w_per_s": 1e6, "dynamic_range_w": 1e6,
                             "bands": [[0.1, 20, 0.2]]})
    assert main(["check", "--trace", "constant.csv", "--spec", "spec.json", "--report", "r.json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is True and all(r["pass"] for r in report["records"])
    assert json.loads(Path("r.json").read_text()) == report


def test_check_failure_exit_one(workdir):
    t = np.arange(3000) * 0.01
    save_csv(PowerTrace(0.01, 5e7 + 1e7 * np.sin(2 * np.pi * t)), "osc.csv")
    write_json("spec.json", {"ramp_up_limit_w_per_s": 1e9, "ramp_down_limit_w_per_s": 1e9, "dynamic_range_w": 1e9,
                             "bands": [[0.1, 20, 0.2]]})
    assert main(["check", "--trace", "osc.csv", "--spec", "spec.json"]) == 1


@pytest.mark.parametrize("argv", [["bogus"], ["check", "--trace", "missing.csv", "--spec", "x.json"],
                                  ["gen", "--kind", "square", "--duration", "1", "--out", "x.csv"],
                                  ["analyze", "--trace", "t.csv", "--frobnicate"], []])
def test_usage_errors_exit_two(workdir, capsys, argv):
    assert main(argv) == 2
    err = capsys.readouterr().err
    assert err.startswith("powerstab:") and err.count("\n") == 1


def test_bad_csv_exit_two(workdir, capsys):
    Path("bad.csv").write_text("time_s,power_w\n0,1\n0.1,-5\n")
    assert main(["analyze", "--trace", "bad.csv"]) == 2
    assert "line 3" in capsys.readouterr().err


def test_device_subcommands(workdir, capsys):
    main(["gen", "--kind", "square", "--period", "2", "--duty", "0.5", "--high", "1000", "--low", "300",
          "--duration", "30", "--dt", "0.001", "--out", "sq.csv"])
    write_json("prof.json", {"mpf_frac": 0.9})
    write_json("ff.json", {"telemetry_period_s": 0.001})
    write_json("st.json", {"capacity_j": 5000, "target_policy": {"kind": "moving-average", "tau_s": 5}})
    write_json("bs.json", {"window_s": 4, "hop_s": 1})
    capsys.readouterr()
    assert main(["smooth", "--trace", "sq.csv", "--profile", "prof.json", "--out", "sm.csv",
                 "--timeline", "tl.csv", "--svg", "sm.svg"]) == 0
    assert json.loads(capsys.readouterr().out)["overhead_frac"] == pytest.approx(0.3 / 0.65, abs=1e-3)
    assert main(["firefly", "--trace", "sq.csv", "--config", "ff.json", "--out", "ff.csv", "--svg", "ff.svg"]) == 0
    assert json.loads(capsys.readouterr().out)["max_detection_latency_s"] <= 0.002
    assert main(["storage", "--trace", "sq.csv", "--config", "st.json", "--out", "g.csv", "--soc", "soc.csv",
                 "--svg", "st.svg"]) == 0
    capsys.readouterr()
    assert main(["analyze", "--trace", "sq.csv", "--out", "spec.csv", "--band", "0.2", "3", "--svg", "sp.svg"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert abs(summary["dominant_hz"] - 0.5) <= 1 / 32.768 and summary["bands"]["0.2-3Hz"] > 0.5
    assert main(["backstop", "--trace", "sq.csv", "--config", "bs.json", "--out", "ev.csv"]) == 0
    assert Path("ev.csv").read_text().splitlines()[1].endswith("Alert")
    for f in ("sm.csv", "tl.csv", "ff.csv", "g.csv", "soc.csv", "spec.csv", "sm.svg", "ff.svg", "st.svg", "sp.svg"):
        assert Path(f).stat().st_size > 0


def test_empty_mitigations_equals_check_on_raw_aggregate(tmp_path):
    sc = Scenario.load(small_scenario(tmp_path))
    res = run_scenario(sc)
    assert res.report.to_json() == check(res.raw_aggregate, sc.spec).to_json()
    np.testing.assert_array_equal(res.grid.samples, res.raw_aggregate.samples)
    assert res.raw_aggregate.samples.max() == pytest.approx(3 * 2 * (8000 + 6000))


def test_scenario_artifacts(tmp_path, capsys):
    path = small_scenario(tmp_path, [{"kind": "smoothing", "profile": {"mpf_frac": 0.9}},
                                     {"kind": "storage", "config": {"capacity_j": 1e5}}],
                          backstop={"window_s": 4, "hop_s": 1})
    code = main(["scenario", "--config", path, "--outdir", str(tmp_path / "out")])
    assert code in (0, 1)
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert {"raw_aggregate.csv", "grid.csv", "report.json", "summary.json", "spectrum.csv", "power.svg",
            "spectrum.svg", "soc.csv", "storage.svg", "backstop_events.csv"} <= names
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["energy_overheads"]["smoothing"] > 0
    grid = load_csv(tmp_path / "out" / "grid.csv")
    assert grid.dt == pytest.approx(0.01)


def test_scenario_rejects_device_mitigation_after_storage(tmp_path):
    path = small_scenario(tmp_path, [{"kind": "storage", "config": {"capacity_j": 1e5}},
                                     {"kind": "smoothing", "profile": {"mpf_frac": 0.9}}])
    with pytest.raises(ScenarioError, match="cannot follow"):
        Scenario.load(path)
    assert main(["scenario", "--config", path]) == 2


@pytest.mark.parametrize("bad", [{"mitigations": [{"kind": "ups", "config": {}}]}, {"spec": None}])
def test_scenario_schema_errors(tmp_path, bad):
    doc = json.loads(Path(small_scenario(tmp_path)).read_text())
    doc.update(bad)
    if doc["spec"] is None:
        del doc["spec"]
    with pytest.raises(ValueError):
        Scenario.from_dict(doc)


def test_scenario_seed_override_changes_output(tmp_path):
    path = small_scenario(tmp_path, workload={"compute_phase_s": 1.5, "comm_phase_s": 1.0, "jitter_frac": 0.2,
                                              "duration_s": 30.0, "dt_s": 0.01})
    main(["scenario", "--config", path, "--outdir", str(tmp_path / "a"), "--seed", "1"])
    main(["scenario", "--config", path, "--outdir", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "grid.csv").read_bytes() != (tmp_path / "b" / "grid.csv").read_bytes()


def test_shipped_configs_load():
    for p in sorted(CONFIGS.glob("scenario_*.json")):
        sc = Scenario.load(p)
        assert sc.spec == UtilitySpec.load(CONFIGS / "stringent_spec.json")
