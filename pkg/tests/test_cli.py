import json
import subprocess
import sys

import numpy as np
import pytest

from georecon import io
from georecon.cli import main

from helpers import run_all


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "scene"
    assert main(["gen-synthetic", "--out", str(out), "--frames", "24", "--width", "112", "--height", "84",
                 "--seed", "3"]) == 0
    return out


def test_outputs_identical_across_runs_and_threads(scene, tmp_path):
    runs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 4)):
        (tmp_path / name).mkdir()
        files = run_all(scene, tmp_path / name, threads)
        runs.append({p.relative_to(tmp_path / name): p.read_bytes() for p in files})
    assert len(runs[0]) >= 12
    assert runs[0] == runs[1] == runs[2]


def test_loss_identity(scene, tmp_path):
    run_all(scene, tmp_path, 1)
    assert main(["loss", "--target", str(tmp_path / "target.rgf"), "--recon", str(tmp_path / "target.rgf"),
                 "--mask", str(tmp_path / "m.rgm"), "--gt-depth", f"{scene}/depth", "--pred-depth",
                 f"{scene}/depth", "--frame-mask", str(tmp_path / "fm.json"), "--alpha", "0.3",
                 "--text-loss", "1.25", "--out", str(tmp_path / "l.json")]) == 0
    rep = io.read_json(tmp_path / "l.json")
    assert rep["g_masked_patches"] > 0
    assert rep["l_object"] == -0.3 and rep["l_frame"] == 0.0
    assert rep["l_total"] == 1.25 - 0.3 and rep["k_masked_frames"] == 2


def test_coverage_report_matches_selection(scene, tmp_path, capsys):
    run_all(scene, tmp_path, 1)
    sel = io.read_json(tmp_path / "sel.json")
    capsys.readouterr()
    main(["coverage-report", "--scene", str(scene), "--selection", str(tmp_path / "sel.json"),
          "--out", str(tmp_path / "again.svg")])
    printed = json.loads(capsys.readouterr().out)
    assert printed["covered_points"] == sel["covered_points"]
    assert f"covered_points: {sel['covered_points']}" in (tmp_path / "again.svg").read_text()


def test_coverage_report_rejects_foreign_selection(scene, tmp_path, capsys):
    run_all(scene, tmp_path, 1)
    sel = io.read_json(tmp_path / "sel.json")
    sel["covered_points"] += 1
    io.write_json(tmp_path / "bad.json", sel)
    assert main(["coverage-report", "--scene", str(scene), "--selection", str(tmp_path / "bad.json"),
                 "--out", str(tmp_path / "x.svg")]) == 1
    assert capsys.readouterr().err.startswith("error: input:")


def test_mask_frames_sidecar(scene, tmp_path):
    run_all(scene, tmp_path, 1)
    doc = io.read_json(tmp_path / "fm.json")
    sel = io.read_json(tmp_path / "sel.json")
    assert doc["frames"] == sorted(sel["selected_ids"])
    assert doc["masked_frame_ids"] == [doc["frames"][i] for i in doc["masked_views"]]
    mask = io.read_mask(tmp_path / "m.rgm")
    side = io.read_json(tmp_path / "m.rgm.json")
    assert mask.bits.shape == (4, 3, 4)
    assert side["masked_patches"] == int((~mask.bits).sum())


def test_warp_output(scene, tmp_path):
    run_all(scene, tmp_path, 1)
    w = io.read_depth(tmp_path / "w.rgd")
    truth = io.read_depth(scene / "depth" / "0008.rgd").values
    ok = w.valid
    assert ok.mean() > 0.5
    assert (np.abs(w.values - truth)[ok] <= 1e-3).mean() >= 0.99


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "georecon", *args], capture_output=True, text=True)


@pytest.mark.parametrize(
    "args",
    [
        ["sample", "--scene", "x", "--candidates", "4"],
        ["sample", "--scene", "x", "--candidates", "four", "--select", "2", "--seed", "1", "--out", "y"],
        ["mask-frames", "--frames", "f", "--k", "1", "--out", "o"],
        ["no-such-command"],
        ["--threads", "0", "mask-frames", "--frames", "f", "--k", "1", "--seed", "1", "--out", "o"],
    ],
)
def test_usage_errors_exit_2(args):
    res = _cli(*args)
    assert res.returncode == 2
    lines = res.stderr.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("error: usage:")


def test_runtime_error_is_one_line(tmp_path):
    res = _cli("sample", "--scene", str(tmp_path), "--candidates", "4", "--select", "2", "--seed", "1",
               "--out", str(tmp_path / "o.json"))
    assert res.returncode == 1
    assert res.stderr.count("\n") == 1 and res.stderr.startswith("error: input: missing file")


def test_parameter_error(scene, tmp_path, capsys):
    assert main(["sample", "--scene", str(scene), "--candidates", "4", "--select", "5", "--seed", "1",
                 "--out", str(tmp_path / "o.json")]) == 1
    assert capsys.readouterr().err.startswith("error: parameter:")
