import pytest

from hsmor.cli import main
from hsmor.io import read_label_csv

OBJECTS = "[objects]\nA = 1,1,0\nB = 0,0,1\nDr = 0.5,0.5,0.5\n[metric]\nkind = ed\n"
TASKS = {
    "scan": "x = -3,4\ny = -3,4\nz = 0.5\nsteps = 24\n",
    "refine": "x = -3,4\ny = -3,4\nz = 0.5\nsteps = 24\nmax_points = 10\n",
    "aura": "growth = 1.2\n",
    "omega-profile": "direction = 1,2,3\nsamples = 16\n",
    "trajectory": "waypoints = -4,-3.9,0.5; 5,5.1,0.5\nsamples_per_unit = 5\n",
}
OUTPUTS = {
    "scan": ["labels.csv", "labels.ppm"], "refine": ["membrane.csv"], "aura": ["aura.txt"],
    "omega-profile": ["profile.csv"], "trajectory": ["crossings.csv"],
}


def write_cfg(tmp_path, task, body=None):
    path = tmp_path / f"{task}.cfg"
    path.write_text(OBJECTS + f"[task]\ntype = {task}\n" + (TASKS[task] if body is None else body))
    return str(path)


@pytest.mark.parametrize("task", list(TASKS))
def test_task_runs_and_writes_manifest(tmp_path, task, capsys):
    out = tmp_path / "out"
    assert main([task, "--config", write_cfg(tmp_path, task), "--out", str(out)]) == 0
    for name in OUTPUTS[task]:
        assert (out / name).stat().st_size > 0
    manifest = (out / "manifest.txt").read_text(encoding="utf-8")
    for section in ("[versions]", "[run]", "[outputs]", "[config]"):
        assert section in manifest
    assert "wall_seconds" in manifest and "numpy =" in manifest
    assert f"type = {task}" in manifest


def test_scan_csv_matches_grid(tmp_path):
    out = tmp_path / "o"
    main(["scan", "--config", write_cfg(tmp_path, "scan"), "--out", str(out)])
    recs = read_label_csv(out / "labels.csv")
    assert len(recs) == 24 * 24
    assert {r.signature for r in recs} >= {"AB - Dr", "A - BDr", "B - ADr"}


def test_aura_report_is_key_value(tmp_path):
    out = tmp_path / "o"
    main(["aura", "--config", write_cfg(tmp_path, "aura"), "--out", str(out)])
    lines = (out / "aura.txt").read_text().splitlines()
    assert all(" = " in ln for ln in lines)
    assert "outside_signature = AB - Dr" in lines


def test_usage_and_config_errors(tmp_path, capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err
    assert main(["bogus", "--config", "x"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main(["scan", "--config", str(tmp_path / "missing.cfg")]) == 1
    bad = write_cfg(tmp_path, "scan", "x = -3,4\ny = -3,4\nz = 0.5\nsteps = 1\n")
    assert main(["scan", "--config", bad]) == 1
    assert "line" in capsys.readouterr().err
    assert main(["aura", "--config", write_cfg(tmp_path, "scan")]) == 1
    assert main(["scan", "--config", write_cfg(tmp_path, "scan"), "--workers", "0"]) == 1


def test_runtime_errors_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "aura", "r_max = 1.8\n")
    assert main(["aura", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "not enclosed" in capsys.readouterr().err
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["scan", "--config", write_cfg(tmp_path, "scan"), "--out", str(blocker / "x")]) == 2
