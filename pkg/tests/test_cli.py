import json
import subprocess
import sys

import numpy as np
import pytest

from levymaps import io as lio
from levymaps.cli import ExperimentConfig, main
from levymaps.errors import ValidationError
from levymaps.paths import LukasiewiczPath


def run(*argv):
    return main([str(a) for a in argv])


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(n=0).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig(n=10, sample_points=20).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig(replicas=0).validate()


def test_pipeline_is_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("sample", "--seed", 5, "--n", 2048, "--replicas", 2, "--out", out) == 0
        assert run("build", "--out", out) == 0
        assert run("dimension", "--out", out, "--sample-points", 128) == 0
        outs.append(tree(out))
    assert outs[0].keys() == outs[1].keys()
    assert all(outs[0][k] == outs[1][k] for k in outs[0])
    report = json.loads(outs[0]["dimension/estimates.json"])
    for key in ("looptree_dim", "map_dim", "holder_looptree", "holder_map"):
        assert key in report["summary"] and key in report["replicas"][0]
        assert {"slope", "stderr", "replicas"} <= set(report["replicas"][0][key])
    svg = outs[0]["dimension/looptree_covering.svg"].decode()
    assert "log(1/eps)" in svg and "log N" in svg
    csv = outs[0]["dimension/replica_0000_map_covering.csv"].decode()
    assert csv.startswith("log_inv_eps,log_N")


def test_sample_stable_theta_zero(tmp_path):
    out = tmp_path / "s"
    assert run("sample", "--alpha", 1.5, "--theta", 0, "--laziness", 0.1, "--n", 1024,
               "--replicas", 4, "--out", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    streams = [rec["stream"] for rec in manifest["replicas"]]
    assert len(set(streams)) == 4
    assert set(manifest["stage_versions"]) >= {"sample", "build", "dimension"}
    for rec in manifest["replicas"]:
        p = lio.read_path(out / rec["file"])
        assert p.kind == "excursion" and p.n == 1024
        assert p.num_vertices == rec["K"]
        w = p.walk
        assert w[-1] == -1 and w[1:-1].min() >= 0


def test_build_single_edge(tmp_path):
    out = tmp_path / "one"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": {"law": "pmf", "pmf": {"-1": 0.5, "0": 0.5}}}))
    assert run("sample", "--config", cfg, "--n", 1, "--out", out) == 0
    assert lio.read_path(out / "paths" / "replica_0000.luka") == LukasiewiczPath([0, -1], "excursion")
    assert run("build", "--out", out) == 0
    d = out / "build" / "replica_0000"
    meta = json.loads((d / "map.json").read_text())
    assert (meta["V"], meta["E"], meta["F"]) == (2, 1, 1)
    assert meta["face_degree_histogram"] == {"2": 1}
    audit = json.loads((d / "audit.json").read_text())
    assert audit["face_degrees_twice_cycles"] and not audit["quadrangulation"]


def test_build_simple_walk_is_quadrangulation(tmp_path):
    out = tmp_path / "q"
    assert run("sample", "--law", "simple", "--n", 2000, "--out", out) == 0
    assert run("build", "--out", out) == 0
    audit = json.loads((out / "build" / "replica_0000" / "audit.json").read_text())
    assert all(audit.values())


def test_fixture(tmp_path):
    assert run("dimension", "--fixture", "segment", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "dimension" / "fixture_segment.json").read_text())
    assert rep["estimate"]["slope"] == pytest.approx(1.0, abs=0.1)
    assert (tmp_path / "dimension" / "fixture_segment_covering.svg").exists()


def test_exit_codes(tmp_path, capsys):
    assert run("sample", "--n", 3, "--law", "simple", "--out", tmp_path / "x") == 3
    assert run("sample", "--n", 0, "--out", tmp_path / "x") == 2
    assert run("build", "--out", tmp_path / "missing") == 2
    assert run("sample", "--alpha", 1.5, "--theta", 0, "--n", 2048, "--law", "boltzmann",
               "--out", tmp_path / "x") == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("sample", "--config", bad, "--out", tmp_path / "x") == 2
    err = capsys.readouterr().err
    assert "infeasible model" in err and "validation failure" in err


def test_spine_check(tmp_path):
    assert run("spine-check", "--replicas", 20000, "--x-min", 0.01, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "spine_check.json").read_text())
    assert rep["pass"] and len(rep["rows"]) == 12


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "levymaps.cli", "dimension", "--fixture",
                          "circle", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("circle: slope")


@pytest.mark.slow
def test_experiment_battery(tmp_path):
    assert run("experiment", "--alpha", 1.5, "--thetas", -2, 0, 2, "--n", 1024,
               "--replicas", 2, "--sample-points", 128, "--seed", 3, "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["per_theta"]) == {"-2", "+0", "+2"}
    rows = (tmp_path / "summary.csv").read_text().splitlines()
    assert rows[0].startswith("theta,replica,K,looptree_dim") and len(rows) == 7
    first = (tmp_path / "summary.csv").read_bytes()
    assert run("experiment", "--alpha", 1.5, "--thetas", -2, 0, 2, "--n", 1024,
               "--replicas", 2, "--sample-points", 128, "--seed", 3, "--out", tmp_path) == 0
    assert (tmp_path / "summary.csv").read_bytes() == first
    assert np.isfinite(list(summary["max_difference_in_pooled_stderr"].values())).all()
