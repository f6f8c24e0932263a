"""Acceptance suite: one check per criterion, each reporting a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py`` to print them directly.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from georecon import (
    FrameMask,
    LossConfig,
    MaskRng,
    PatchMask,
    RenderConfig,
    SamplerConfig,
    adaptive_sample,
    coverage_of,
    cosine_distance,
    exhaustive_max_coverage,
    frame_recon_loss,
    fuse_tokens,
    fusion_target,
    greedy_max_coverage,
    merge_patches_2x2,
    object_level_mask,
    object_recon_loss,
    render_visibility,
    warp_depth,
)
from georecon.cli import main as cli_main
from georecon.losses import ProjectorWeights
from georecon.scene import DepthMap, FeatureGrid, PointCloud
from georecon.synthetic import SyntheticSceneSpec, build_synthetic

sys.path.insert(0, str(Path(__file__).parent))
from conftest import ACCEPTANCE_LINES  # noqa: E402
from helpers import run_all  # noqa: E402
from oracles import (  # noqa: E402
    cosine_oracle,
    merge_oracle,
    patch_overlap_oracle,
    points_in_view,
    random_camera,
    zbuffer_oracle,
)

BOUND = 1 - 1 / math.e
pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def report(num, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {num}. {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_1_greedy_guarantee():
    t0 = time.perf_counter()
    below, optimal = 0, 0
    for seed in range(200):
        rng = np.random.default_rng([1, seed])
        m = int(rng.integers(1, 9))
        n = int(rng.integers(1, 51))
        sets = [set(rng.choice(n, int(rng.integers(0, n + 1)), replace=False).tolist()) for _ in range(m)]
        k = int(rng.integers(1, min(3, m) + 1))
        got = coverage_of(sets, greedy_max_coverage(sets, k)[0])
        _, best = exhaustive_max_coverage(sets, k)
        below += got < BOUND * best
        optimal += got == best
    dt = time.perf_counter() - t0
    ok = below == 0 and optimal >= 120 and dt < 5.0
    report(1, "greedy >= (1-1/e) opt", ok, f"violations={below}/200, optimal={optimal}/200, time={dt:.2f}s")


def test_2_zbuffer_exact():
    render_time, mismatches, total_pts = 0.0, 0, 0
    for seed in range(100):
        rng = np.random.default_rng([2, seed])
        intr, extr = random_camera(rng, int(rng.integers(16, 257)), int(rng.integers(16, 257)))
        n = 10_000 if seed % 10 == 0 else int(rng.integers(100, 4001))
        pts = points_in_view(rng, intr, extr, n)
        if seed % 3 == 0:
            pts[n // 2:] = pts[: n - n // 2]
        d = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        t0 = time.perf_counter()
        buf = render_visibility(PointCloud(pts), intr, extr, RenderConfig(d))
        render_time += time.perf_counter() - t0
        zbuf, win = zbuffer_oracle(pts, intr, extr, d)
        mismatches += not (np.array_equal(buf.winner, win) and np.array_equal(buf.zbuf, zbuf))
        total_pts += n
    ok = mismatches == 0 and render_time < 30.0
    report(2, "z-buffer equals brute force", ok,
           f"mismatched scenes={mismatches}/100, points={total_pts}, render time={render_time:.2f}s")


def test_3_adaptive_beats_uniform():
    wins, below_bound, ratios = 0, 0, []
    for seed in range(100):
        spec = SyntheticSceneSpec(seed=1000 + seed, n_frames=128, width=112, height=84)
        sc = build_synthetic(spec)
        rep = adaptive_sample(sc.manifest, dict(enumerate(sc.depths)), SamplerConfig(128, 8))
        wins += rep.covered_points >= rep.uniform_baseline_covered
        below_bound += rep.covered_points < BOUND * rep.uniform_baseline_covered
        ratios.append(rep.covered_points / max(rep.uniform_baseline_covered, 1))
    ok = wins >= 95 and below_bound == 0
    report(3, "adaptive >= uniform (M=128, K=8)", ok,
           f"wins={wins}/100, below (1-1/e) bound={below_bound}, min ratio={min(ratios):.3f}, "
           f"median ratio={float(np.median(ratios)):.3f}")


def _kernel_cosine(rng):
    a, b = rng.standard_normal((2, int(rng.integers(1, 65))))
    return abs(cosine_distance(a, b) - cosine_oracle(a, b)) <= 1e-12


def _kernel_object_loss(rng):
    shape = tuple(int(x) for x in rng.integers(1, 5, 3)) + (int(rng.integers(1, 17)),)
    t, r = rng.standard_normal((2,) + shape)
    bits = rng.random(shape[:3]) < 0.6
    alpha = float(rng.uniform(0, 5))
    idx = list(zip(*np.nonzero(~bits)))
    want = alpha / len(idx) * sum(cosine_oracle(t[i], r[i]) for i in idx) if idx else 0.0
    got = object_recon_loss(FeatureGrid(t), FeatureGrid(r), PatchMask(bits), alpha)
    return abs(got - want) <= 1e-12


def _kernel_frame_loss(rng):
    n = int(rng.integers(2, 6))
    views = set(rng.choice(n, int(rng.integers(1, n)), replace=False).tolist())
    h, w = (int(x) for x in rng.integers(1, 17, 2))
    gt = [np.where(rng.random((h, w)) < 0.1, np.nan, rng.uniform(0.2, 8, (h, w))) for _ in range(n)]
    pred = [rng.uniform(0.2, 8, (h, w)) for _ in range(n)]
    beta = float(rng.uniform(0.1, 5))
    total = 0.0
    for i in sorted(views):
        for y in range(h):
            for x in range(w):
                if math.isfinite(gt[i][y, x]):
                    total += (gt[i][y, x] - pred[i][y, x]) ** 2
    want = beta * total / len(views)
    got = frame_recon_loss([DepthMap(g) for g in gt], [DepthMap(p) for p in pred], FrameMask(n, views), beta)
    return abs(got - want) <= 1e-9 * max(abs(want), 1e-300)


def _kernel_merge(rng):
    n, ph, pw, d, out = (int(x) for x in rng.integers(1, 4, 5))
    f = rng.standard_normal((n, 2 * ph, 2 * pw, d))
    mat = rng.standard_normal((4 * d, out))
    bias = rng.standard_normal(out) if rng.random() < 0.5 else None
    got = merge_patches_2x2(FeatureGrid(f), ProjectorWeights(mat, bias)).data
    return np.abs(got - merge_oracle(f, mat, bias)).max() <= 1e-12


def _kernel_fuse(rng):
    shape = tuple(int(x) for x in rng.integers(1, 5, 3)) + (int(rng.integers(1, 9)),)
    a, b = rng.standard_normal((2,) + shape)
    bits = rng.random(shape[:3]) < 0.5
    got = fuse_tokens(FeatureGrid(a), FeatureGrid(b), PatchMask(bits)).data
    worst = 0.0
    for idx in np.ndindex(bits.shape):
        want = a[idx] + b[idx] if bits[idx] else a[idx]
        worst = max(worst, float(np.abs(got[idx] - want).max()))
    return worst <= 1e-12


KERNELS = {
    "cosine_distance": _kernel_cosine,
    "object_recon_loss": _kernel_object_loss,
    "frame_recon_loss": _kernel_frame_loss,
    "merge_patches_2x2": _kernel_merge,
    "fuse_tokens": _kernel_fuse,
}


def test_4_kernel_oracles():
    fails = {}
    for k, (name, check) in enumerate(KERNELS.items()):
        fails[name] = sum(not check(np.random.default_rng([4, k, i])) for i in range(1000))
    ok = not any(fails.values())
    report(4, "loss kernels match loop oracles (1000 each)", ok,
           ", ".join(f"{n}: {1000 - f}/1000" for n, f in fails.items()))


def test_5_perfect_recon_is_minus_alpha():
    exact = 0
    for seed in range(50):
        rng = np.random.default_rng([5, seed])
        n, ph, pw = (int(x) for x in rng.integers(1, 5, 3))
        d2, d3 = int(rng.integers(1, 33)), int(rng.integers(1, 9))
        f2 = FeatureGrid(rng.standard_normal((n, ph, pw, d2)))
        f3 = FeatureGrid(rng.standard_normal((n, 2 * ph, 2 * pw, d3)))
        w = ProjectorWeights(rng.standard_normal((4 * d3, d2)), rng.standard_normal(d2))
        merged = merge_patches_2x2(f3, w)
        bits = rng.random((n, ph, pw)) < 0.5
        bits.flat[int(rng.integers(bits.size))] = False
        target = fusion_target(f2, merged)
        recon = np.where(bits[..., None], rng.standard_normal(target.data.shape), target.data)
        alpha = float(rng.uniform(0.01, 10))
        exact += object_recon_loss(target, FeatureGrid(recon), PatchMask(bits), alpha) == -alpha
    report(5, "recon == target gives exactly -alpha", exact == 50, f"exact={exact}/50")


def test_6_masking_exact():
    bad_union, bad_kept, objects = 0, 0, 0
    for seed in range(100):
        sc = build_synthetic(SyntheticSceneSpec(seed=600 + seed, n_frames=8, width=112, height=84, n_objects=8))
        p = sc.manifest.patch_size_2d
        mask, records = object_level_mask(sc.segs, sc.manifest, 3, {0}, MaskRng(seed))
        want = set()
        for rec in records:
            counts = {}
            for f, s in enumerate(sc.segs):
                patches = patch_overlap_oracle(s.labels, rec.object_id, p)
                if patches:
                    counts[f] = len(patches)
                if patches and f != rec.kept_view:
                    want |= {(f, r, c) for r, c in patches}
            bad_kept += counts.get(rec.kept_view, -1) != max(counts.values())
        objects += len(records)
        bad_union += mask.masked() != want
    ok = bad_union == 0 and bad_kept == 0
    report(6, "object mask equals overlap-union oracle", ok,
           f"mismatched scenes={bad_union}/100, non-maximal kept views={bad_kept}/{objects}")


def test_7_warp_consistency():
    fracs, coverage, good, total = [], [], 0, 0
    for seed in range(50):
        sc = build_synthetic(SyntheticSceneSpec(seed=700 + seed, n_frames=24))
        fr = sc.manifest.frames
        srcs = [(sc.depths[i], fr[i].intrinsics, fr[i].extrinsics) for i in (11, 13)]
        warped, covered = warp_depth(srcs, fr[12].intrinsics, fr[12].extrinsics)
        err = np.abs(warped.values - sc.depths[12].values)[covered]
        fracs.append(float((err <= 1e-3).mean()) if err.size else 0.0)
        coverage.append(float(covered.mean()))
        good += int((err <= 1e-3).sum())
        total += err.size
    # every scene must pass on its own; the pooled figure is reported for context
    ok = min(fracs) >= 0.99
    report(7, "warped depth within 1e-3 m on >= 99% of covered pixels", ok,
           f"worst scene={min(fracs):.4f} (seed {700 + int(np.argmin(fracs))}), "
           f"scenes passing={sum(f >= 0.99 for f in fracs)}/50, pooled={good / total:.4f}, mean coverage={np.mean(coverage):.3f}")


def test_8_cli_determinism(tmp_path):
    scene = tmp_path / "scene"
    cli_main(["gen-synthetic", "--out", str(scene), "--frames", "24", "--width", "112", "--height", "84",
              "--seed", "8"])
    runs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 4)):
        (tmp_path / name).mkdir()
        files = run_all(scene, tmp_path / name, threads)
        runs.append({p.relative_to(tmp_path / name): p.read_bytes() for p in files})
    same_runs = runs[0] == runs[1]
    same_threads = runs[0] == runs[2]
    report(8, "CLI outputs byte-identical", same_runs and same_threads,
           f"files={len(runs[0])}, repeat identical={same_runs}, 1 vs 4 threads identical={same_threads}")


def test_9_full_size_performance():
    spec = SyntheticSceneSpec(seed=9, n_frames=128, width=504, height=392)
    sc = build_synthetic(spec)
    depths = dict(enumerate(sc.depths))
    t0 = time.perf_counter()
    rep = adaptive_sample(sc.manifest, depths, SamplerConfig(128, 8, voxel_size=0.05))
    dt = time.perf_counter() - t0
    report(9, "adaptive_sample 128 x 504x392 under 60 s", dt < 60.0,
           f"time={dt:.2f}s, points={rep.total_points}, covered={rep.covered_points}")


if __name__ == "__main__":
    import tempfile

    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass
