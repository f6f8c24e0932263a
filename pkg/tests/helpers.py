"""Shared drivers for the CLI and acceptance tests."""
from georecon.cli import main


def run_all(scene, out, threads):
    """Every subcommand once; returns the written files."""
    t = ["--threads", str(threads)]
    s = str(scene)
    o = lambda name: str(out / name)  # noqa: E731
    calls = [
        ["sample", "--scene", s, "--candidates", "12", "--select", "4", "--seed", "1", "--out", o("sel.json")],
        ["mask-objects", "--scene", s, "--frames", o("sel.json"), "--background", "0", "--seed", "2",
         "--out", o("m.rgm")],
        ["mask-frames", "--frames", o("sel.json"), "--k", "2", "--seed", "5", "--out", o("fm.json")],
        ["fuse", "--feat2d", f"{s}/feat/2d.rgf", "--feat3d", f"{s}/feat/3d.rgf", "--projector",
         f"{s}/feat/projector.rgw", "--mask", o("m.rgm"), "--frames", o("sel.json"), "--out", o("fused.rgf"),
         "--target-out", o("target.rgf")],
        ["loss", "--target", o("target.rgf"), "--recon", o("fused.rgf"), "--mask", o("m.rgm"),
         "--gt-depth", f"{s}/depth", "--pred-depth", f"{s}/depth", "--frame-mask", o("fm.json"),
         "--alpha", "0.5", "--out", o("loss.json")],
        ["warp-depth", "--scene", s, "--target", "8", "--sources", "7,9", "--out", o("w.rgd")],
        ["coverage-report", "--scene", s, "--selection", o("sel.json"), "--out", o("fig.svg")],
        ["gen-synthetic", "--out", o("gen"), "--frames", "3", "--width", "56", "--height", "28", "--seed", "9"],
    ]
    for c in calls:
        assert main(t + c) == 0, c
    return sorted(p for p in out.rglob("*") if p.is_file())
