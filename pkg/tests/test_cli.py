import json
import subprocess
import sys

import pytest

from nullforge import __version__
from nullforge.cli import EXIT_CERT, EXIT_OK, EXIT_SCHEMA, EXIT_SOLVER, demo_scenarios, main, run_scenario

RING = {"outer": {"c": [0, 0], "r": 2.0}, "holes": [{"c": [0, 0], "r": 0.5}]}


def write(tmp_path, scenario, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(scenario))
    return p


def test_catenoid_pipeline(tmp_path):
    scenario = demo_scenarios()["catenoid"]
    code, summary = run_scenario(scenario, "certify", tmp_path)
    assert code == EXIT_OK
    assert summary["residuals"]["period_residual"] < 1e-10
    assert summary["version"] == __version__ and len(summary["scenario_sha256"]) == 64
    for name in summary["artifacts"]:
        assert (tmp_path / name).exists()
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc == json.loads(json.dumps(summary))


def test_degenerate_seed_exits_3(tmp_path):
    scenario = {"domain": RING, "seed": {"generator": "line"}}
    code, summary = run_scenario(scenario, "build", tmp_path)
    assert code == EXIT_SOLVER
    assert "degenerate" in summary["error"]


def test_malformed_json_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, summary = run_scenario(bad, "build", tmp_path / "out")
    assert code == EXIT_SCHEMA
    assert summary["scenario_sha256"] is not None
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["exit_code"] == 2


def test_schema_violation_exits_2(tmp_path):
    code, summary = run_scenario({"domain": RING, "seed": {"generator": "helicoid"}}, "build", tmp_path)
    assert code == EXIT_SCHEMA
    assert "seed" in summary["error"]


def test_failed_certification_exits_4(tmp_path):
    scenario = {"domain": RING, "seed": {"generator": "even-selfcross"},
                "certify": {"embedding": {"min_gap": 1e-3}}}
    code, summary = run_scenario(scenario, "certify", tmp_path)
    assert code == EXIT_CERT
    assert summary["residuals"]["embedding_gap"] < 1e-8
    assert (tmp_path / "curve.json").exists()


def test_summary_is_deterministic(tmp_path):
    path = write(tmp_path, demo_scenarios()["catenoid"])
    blobs = []
    for k in range(2):
        code, _ = run_scenario(path, "build", tmp_path / f"run{k}", seed=7)
        assert code == EXIT_OK
        blobs.append((tmp_path / f"run{k}" / "summary.json").read_bytes())
    assert blobs[0] == blobs[1]


@pytest.mark.parametrize("command, artifact", [("mesh", "mesh.obj"), ("sl2", "sl2.csv"),
                                                ("growth", "growth.csv")])
def test_subcommands(tmp_path, command, artifact):
    scenario = demo_scenarios()["catenoid"]
    code, summary = run_scenario(scenario, command, tmp_path)
    assert code == EXIT_OK
    assert artifact in summary["artifacts"]


def test_main_entry(tmp_path, capsys):
    path = write(tmp_path, {"domain": {"outer": {"c": 0, "r": 1}}, "seed": {"generator": "enneper"}})
    assert main(["build", "--config", str(path), "--out-dir", str(tmp_path / "o")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "ok"


def test_module_invocation(tmp_path):
    path = write(tmp_path, {"domain": RING, "seed": {"generator": "line"}})
    proc = subprocess.run([sys.executable, "-m", "nullforge", "build", "--config", str(path),
                           "--out-dir", str(tmp_path / "o"), "--quiet"],
                          capture_output=True, text=True, env={"NULLFORGE_THREADS": "1", "PATH": ""})
    assert proc.returncode == 3
    assert "degenerate" in proc.stderr
