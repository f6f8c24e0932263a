"""Command-line interface.

Every subcommand wraps one library pipeline. Failures print a single
``error: <kind>: <message>`` line to stderr; usage errors exit with 2,
everything else with 1.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


from . import io
from .coverage import SamplerConfig, SceneDepths, SelectionReport, run_adaptive
from .errors import GeoreconError, InputError
from .figure import emit_coverage_figure
from .geometry import RenderConfig, warp_depth
from .losses import LossConfig, fuse_tokens, fusion_target, frame_recon_loss, merge_patches_2x2, \
    object_recon_loss, total_loss
from .masking import FrameMask, MaskRng, frame_level_mask, object_level_mask
from .scene import FeatureGrid, validate_scene
from .synthetic import SyntheticSceneSpec, gen_synthetic


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: usage: {self.prog}: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def read_frame_list(path) -> list[int]:
    """Frame ids from a selection report, a ``{"frames": [...]}`` document or a bare list.

    Returned in ascending (temporal) order.
    """
    doc = io.read_json(path)
    if isinstance(doc, dict):
        ids = doc.get("selected_ids", doc.get("frames"))
    else:
        ids = doc
    if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
        raise InputError(f"{path}: no frame id list found")
    return sorted(set(ids))


# -- subcommands -------------------------------------------------------------

def cmd_gen_synthetic(args):
    spec = SyntheticSceneSpec(
        n_frames=args.frames, n_objects=args.objects, width=args.width, height=args.height,
        seed=args.seed, trajectory=args.trajectory, patch_size_3d=args.patch_3d,
    )
    manifest = gen_synthetic(spec, args.out)
    print(json.dumps({"scene": str(args.out), "frames": len(manifest.frames)}))


def cmd_validate(args):
    manifest = io.read_manifest(args.scene)
    report = validate_scene(manifest, args.scene)
    for v in report:
        print(v)
    return 1 if report else 0


def cmd_sample(args):
    manifest = io.read_manifest(args.scene)
    cfg = SamplerConfig(
        candidates=args.candidates, select=args.select, total_frames=len(manifest.frames),
        voxel_size=args.voxel_size, render=RenderConfig(args.splat), seed=args.seed, threads=args.threads,
    )
    run = run_adaptive(manifest, SceneDepths(args.scene, manifest), cfg)
    io.write_json(args.out, run.report.to_dict())


def _scene_segs(scene, manifest, frame_ids, background):
    segs = []
    for fid in frame_ids:
        f = manifest.frame(fid)
        if f.seg_ref is None or not (Path(scene) / f.seg_ref).exists():
            raise InputError(f"missing segmentation for frame {fid}")
        segs.append(io.read_seg(Path(scene) / f.seg_ref, background))
    return segs


def cmd_mask_objects(args):
    manifest = io.read_manifest(args.scene)
    frame_ids = read_frame_list(args.frames)
    segs = _scene_segs(args.scene, manifest, frame_ids, args.background)
    rng = MaskRng(args.seed)
    mask, records = object_level_mask(
        segs, manifest, args.num_objects, args.background, rng,
        min_pixels=args.min_pixels, patch_size=args.patch_size, mode=args.mode, retain_views=args.retain_views,
    )
    io.write_mask(args.out, mask)
    io.write_json(
        str(args.out) + ".json",
        {
            "frames": frame_ids,
            "patch_size": args.patch_size or manifest.patch_size_2d,
            "seed": args.seed,
            "masked_patches": int((~mask.bits).sum()),
            "objects": [r.to_dict() for r in records],
        },
    )


def cmd_mask_frames(args):
    frame_ids = read_frame_list(args.frames)
    fm = frame_level_mask(len(frame_ids), args.k, MaskRng(args.seed))
    views = sorted(fm.masked_views)
    io.write_json(
        args.out,
        {
            "frames": frame_ids,
            "n_frames": fm.n_frames,
            "masked_views": views,
            "masked_frame_ids": [frame_ids[i] for i in views],
            "seed": args.seed,
        },
    )


def _subset(grid: FeatureGrid, frame_ids):
    if frame_ids is None:
        return grid
    if max(frame_ids) >= grid.n_frames:
        raise InputError(f"feature file has {grid.n_frames} frames, frame {max(frame_ids)} requested")
    return FeatureGrid(grid.data[frame_ids])


def cmd_fuse(args):
    frame_ids = read_frame_list(args.frames) if args.frames else None
    f2d = _subset(io.read_features(args.feat2d), frame_ids)
    f3d = _subset(io.read_features(args.feat3d), frame_ids)
    merged = merge_patches_2x2(f3d, io.read_weights(args.projector))
    mask = io.read_mask(args.mask)
    io.write_features(args.out, fuse_tokens(f2d, merged, mask))
    if args.target_out:
        io.write_features(args.target_out, fusion_target(f2d, merged, args.target_mode))


def _depths_for(directory, frame_ids, masked):
    out = {}
    for i in masked:
        path = Path(directory) / io.depth_name(frame_ids[i])
        if path.exists():
            out[i] = io.read_depth(path)
    return out


def cmd_loss(args):
    cfg = LossConfig(args.alpha, args.beta, args.lambda1, args.lambda2)
    target = io.read_features(args.target)
    recon = io.read_features(args.recon)
    mask = io.read_mask(args.mask)
    l_obj = object_recon_loss(target, recon, mask, cfg.alpha)
    fdoc = io.read_json(args.frame_mask)
    try:
        frame_ids = list(fdoc["frames"])
        fmask = FrameMask(len(frame_ids), frozenset(fdoc["masked_views"]))
    except (KeyError, TypeError) as exc:
        raise InputError(f"{args.frame_mask}: malformed frame mask ({exc!r})") from None
    masked = sorted(fmask.masked_views)
    gt = _depths_for(args.gt_depth, frame_ids, masked)
    pred = _depths_for(args.pred_depth, frame_ids, masked)
    l_frame = frame_recon_loss(gt, pred, fmask, cfg.beta)
    report = total_loss(args.text_loss, l_obj, l_frame, cfg, int((~mask.bits).sum()), len(masked))
    io.write_json(args.out, report.to_dict())


def cmd_warp_depth(args):
    manifest = io.read_manifest(args.scene)
    depths = SceneDepths(args.scene, manifest)
    sources = []
    for fid in args.sources:
        f = manifest.frame(fid)
        sources.append((depths[fid], f.intrinsics, f.extrinsics))
    t = manifest.frame(args.target)
    warped, covered = warp_depth(sources, t.intrinsics, t.extrinsics, RenderConfig(args.splat))
    io.write_depth(args.out, warped)
    print(json.dumps({"covered_pixels": int(covered.sum()), "pixels": int(covered.size)}))


def cmd_coverage_report(args):
    manifest = io.read_manifest(args.scene)
    report = SelectionReport.from_dict(io.read_json(args.selection))
    c = report.config
    try:
        cfg = SamplerConfig(
            candidates=len(report.candidate_ids), select=len(report.selected_ids),
            total_frames=c.get("total_frames"), voxel_size=c["voxel_size"],
            render=RenderConfig(**c["render"]), seed=c.get("seed", 0), threads=args.threads,
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"{args.selection}: config echo incomplete ({exc!r})") from None
    run = run_adaptive(manifest, SceneDepths(args.scene, manifest), cfg)
    emit_coverage_figure(report, run, manifest, args.out)
    print(json.dumps({"covered_points": report.covered_points,
                      "uniform_baseline_covered": report.uniform_baseline_covered}))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="georecon", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=int(os.environ.get("GEORECON_THREADS", "1")),
                   help="worker threads for per-view rendering (output does not depend on it)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-synthetic", help="write a synthetic scene directory")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--frames", type=int, default=32)
    s.add_argument("--objects", type=int, default=6)
    s.add_argument("--width", type=int, default=224)
    s.add_argument("--height", type=int, default=168)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--trajectory", choices=("walk", "orbit", "random"), default="walk")
    s.add_argument("--patch-3d", type=int, default=14)
    s.set_defaults(func=cmd_gen_synthetic)

    s = sub.add_parser("validate", help="check a scene directory")
    s.add_argument("--scene", required=True, type=Path)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("sample", help="adaptive frame sampling")
    s.add_argument("--scene", required=True, type=Path)
    s.add_argument("--candidates", type=int, required=True)
    s.add_argument("--select", type=int, required=True)
    s.add_argument("--voxel-size", type=float, default=0.05)
    s.add_argument("--splat", type=float, default=2.0)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("mask-objects", help="object-level patch mask")
    s.add_argument("--scene", required=True, type=Path)
    s.add_argument("--frames", required=True, type=Path)
    s.add_argument("--num-objects", type=int, default=3)
    s.add_argument("--patch-size", type=int, default=None)
    s.add_argument("--background", type=_int_list, default=[])
    s.add_argument("--min-pixels", type=int, default=64)
    s.add_argument("--mode", choices=("best", "random"), default="best")
    s.add_argument("--retain-views", type=int, default=1)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_mask_objects)

    s = sub.add_parser("mask-frames", help="frame-level view mask")
    s.add_argument("--frames", required=True, type=Path)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_mask_frames)

    s = sub.add_parser("fuse", help="fuse 2D and projected 3D tokens under a patch mask")
    s.add_argument("--feat2d", required=True, type=Path)
    s.add_argument("--feat3d", required=True, type=Path)
    s.add_argument("--projector", required=True, type=Path)
    s.add_argument("--mask", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--frames", type=Path, default=None, help="select these frame rows from the feature files")
    s.add_argument("--target-out", type=Path, default=None, help="also write the reconstruction target")
    s.add_argument("--target-mode", choices=("fused", "geometry"), default="fused")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("loss", help="object, frame and total losses")
    s.add_argument("--target", required=True, type=Path)
    s.add_argument("--recon", required=True, type=Path)
    s.add_argument("--mask", required=True, type=Path)
    s.add_argument("--gt-depth", required=True, type=Path)
    s.add_argument("--pred-depth", required=True, type=Path)
    s.add_argument("--frame-mask", required=True, type=Path)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--lambda1", type=float, default=1.0)
    s.add_argument("--lambda2", type=float, default=1.0)
    s.add_argument("--text-loss", type=float, default=0.0)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_loss)

    s = sub.add_parser("warp-depth", help="reproject source depth maps into a target view")
    s.add_argument("--scene", required=True, type=Path)
    s.add_argument("--target", type=int, required=True)
    s.add_argument("--sources", type=_int_list, required=True)
    s.add_argument("--splat", type=float, default=2.0)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_warp_depth)

    s = sub.add_parser("coverage-report", help="SVG figure of adaptive vs uniform coverage")
    s.add_argument("--scene", required=True, type=Path)
    s.add_argument("--selection", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_coverage_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        rc = args.func(args)
    except GeoreconError as exc:
        print(f"error: {exc.kind}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
