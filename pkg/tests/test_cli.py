import json
from pathlib import Path

import pytest

from resilient_dgd.cli import main
from resilient_dgd.config import RunConfig, load_manifest

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_config_round_trip():
    for p in CONFIGS.glob("thm*.json"):
        cfg = RunConfig.load(p)
        assert RunConfig.from_json(cfg.to_json()) == cfg
        assert RunConfig.from_dict(cfg.to_dict()).config_hash() == cfg.config_hash()


def test_config_hash_ignores_execution_only_fields():
    cfg = RunConfig.load(CONFIGS / "thm1_line3.json")
    other = RunConfig.from_dict({**cfg.to_dict(), "workers": 4, "name": "elsewhere"})
    assert other.config_hash() == cfg.config_hash()
    assert RunConfig.from_dict({**cfg.to_dict(), "seed": 1}).config_hash() != cfg.config_hash()


@pytest.mark.parametrize("doc", [
    {"bogus": 1},
    {"mode": "warp"},
    {"mode": "stochastic"},
    {"mode": "stale", "filter": "cge"},
    {"roles": ["reverse", "honest", "honest"]},
    {"schedule": {"kind": "constant"}},
])
def test_invalid_configs_are_rejected(doc):
    with pytest.raises(ValueError):
        RunConfig.from_dict(doc)


def test_manifest_resolves_config_paths():
    entries = load_manifest(CONFIGS / "quick_manifest.json")
    assert [name for name, _ in entries] == ["thm1_line3", "thm2_line3_stale", "thm3_cge", "infeasible_cge"]
    assert entries[0][1]["r"] == 1


def test_generate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["generate", "--seed", "3", "--n", "4", "--d", "2", "--out", str(a)]) == 0
    assert main(["generate", "--seed", "3", "--n", "4", "--d", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    cert = json.loads(capsys.readouterr().out.split("\n}\n")[0] + "\n}")
    assert cert["certificate"]["gamma"] <= cert["certificate"]["mu"]


def test_zero_spread_family_has_zero_epsilon(tmp_path, capsys):
    fam = tmp_path / "fam.json"
    main(["generate", "--seed", "1", "--n", "5", "--spread", "0", "--out", str(fam)])
    capsys.readouterr()
    assert main(["analyze", str(fam), "--f", "1", "--r", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["epsilon"] == 0.0


def test_analyze_line3(capsys):
    assert main(["analyze", "preset:line3", "--f", "1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["epsilon"] == 1.0
    assert report["witness_pair"] == {"S": [0, 2], "S_hat": [0]}


def test_analyze_grid(tmp_path):
    out = tmp_path / "grid.csv"
    assert main(["analyze", "preset:line3", "--grid", "--csv", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "f,r,epsilon,pairs_examined"
    assert "0,1,0.5,3" in rows and "1,0,1.0,6" in rows


def test_analyze_infeasible_budget(capsys):
    assert main(["analyze", "preset:line3", "--f", "2"]) == 2
    assert "f < (n - r)/2" in capsys.readouterr().err


def test_bounds_command(capsys):
    assert main(["bounds", str(CONFIGS / "thm1_line3.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["bounds"]["variant"] == "thm1"
    assert doc["bounds"]["radius"] == pytest.approx(1.5, abs=1e-12)


def test_run_theorem1_instance(tmp_path):
    out = tmp_path / "run"
    assert main(["run", str(CONFIGS / "thm1_line3.json"), "--out", str(out), "--trace-json"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["satisfied"] is True
    assert summary["tail_window"] == 2000
    assert summary["bound_value"] == pytest.approx(1.5, abs=1e-12)
    assert summary["tail_max_distance"] <= summary["bound_value"]
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == "# seed=0" and lines[1].startswith("# config_hash=")
    assert len(lines) == 3 + 20001
    assert json.loads((out / "trace.json").read_text())["provenance"]["seed"] == 0


def test_run_zero_iterations(tmp_path):
    out = tmp_path / "run"
    assert main(["run", str(CONFIGS / "thm1_line3.json"), "--iterations", "0", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["checks"] == [] and summary["satisfied"] is None
    assert len((out / "trace.csv").read_text().splitlines()) == 4


def test_run_stochastic_reports_curve(tmp_path):
    out = tmp_path / "run"
    rc = main(["run", str(CONFIGS / "thm4_cs.json"), "--replications", "5", "--iterations", "100", "--out", str(out)])
    assert rc == 0
    mc = json.loads((out / "summary.json").read_text())["monte_carlo"]
    assert len(mc["mean_sq"]) == len(mc["bound"]) == 101
    assert (out / "mc_curve.csv").read_text().startswith("# seed=0\n")


def test_run_uses_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RESDGD_OUTPUT_DIR", str(tmp_path))
    assert main(["run", str(CONFIGS / "thm1_line3.json"), "--iterations", "10"]) == 0
    assert (tmp_path / "thm1_line3" / "summary.json").exists()


def test_failed_check_exits_one(tmp_path):
    cfg = _write(tmp_path / "c.json", {
        "family": {"generate": {"seed": 1, "n": 5, "d": 2}}, "f": 1, "filter": "cwtm",
        "roles": ["large:20"] + ["honest"] * 4, "iterations": 300, "dstar": 1e-9, "box": {"half_width": 5.0},
    })
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["satisfied"] is False


def test_config_errors_exit_two(tmp_path, capsys):
    assert main(["run", _write(tmp_path / "bad.json", {"bogus": True})]) == 2
    cfg = _write(tmp_path / "out.json", {"family": {"preset": "line3"}, "box": {"half_width": 0.1}})
    assert main(["run", cfg]) == 2
    assert "outside the feasible box" in capsys.readouterr().err


def test_empty_suite(tmp_path, capsys):
    manifest = _write(tmp_path / "m.json", {"experiments": []})
    report = tmp_path / "report.json"
    assert main(["suite", manifest, "--report", str(report)]) == 0
    assert json.loads(report.read_text()) == {"results": []}


def test_suite_reports_infeasible_as_skipped(tmp_path, capsys):
    manifest = _write(tmp_path / "m.json", {"experiments": [
        {"name": "infeasible", "config_path": str(CONFIGS / "infeasible_cge.json")},
        {"name": "short", "config": {"family": {"preset": "line3"}, "iterations": 50}},
    ]})
    assert main(["suite", manifest, "--out", str(tmp_path / "runs")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "SKIP  infeasible: skipped: infeasible"
    assert lines[1].startswith("PASS  short")
    assert (tmp_path / "runs" / "short" / "trace.csv").exists()


def test_suite_flags_broken_entries(tmp_path, capsys):
    manifest = _write(tmp_path / "m.json", {"experiments": [{"name": "broken", "config": {"r": 5}}]})
    assert main(["suite", manifest]) == 2
    assert capsys.readouterr().out.startswith("ERROR broken")
