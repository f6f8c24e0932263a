"""Synthetic indoor scenes with analytic depth and instance labels.

A scene is an axis-aligned room (label 0 for walls, floor and ceiling)
holding boxes standing on the floor and floating spheres (labels 1..J).
Depth is ray-cast exactly per pixel center, so every other module can be
checked against closed-form ground truth.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .errors import SceneSpecError
from .scene import (
    CameraExtrinsics,
    CameraIntrinsics,
    DepthMap,
    FeatureGrid,
    Frame,
    SceneManifest,
    SegmentationMap,
)

BACKGROUND_LABEL = 0
TRAJECTORIES = ("walk", "orbit", "random")


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple
    label: int


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    label: int


@dataclass(frozen=True)
class SyntheticSceneSpec:
    room: tuple = (6.0, 5.0, 2.8)
    n_objects: int = 6
    shapes: tuple = ("box", "sphere")
    trajectory: str = "walk"
    n_frames: int = 32
    width: int = 224
    height: int = 168
    seed: int = 0
    hfov_deg: float = 70.0
    patch_size_3d: int = 14
    feature_dims: tuple = (32, 8)  # (2D token dim, 3D token dim)
    poses: Optional[tuple] = None  # explicit (eye, target) pairs; overrides trajectory


@dataclass
class SyntheticScene:
    spec: SyntheticSceneSpec
    manifest: SceneManifest
    primitives: list
    depths: list = field(default_factory=list)
    segs: list = field(default_factory=list)

    @property
    def room(self):
        return self.spec.room


# -- ray casting -------------------------------------------------------------

def _ray_room(o, d, room):
    t = np.full(d.shape[0], np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(3):
            ta = np.where(d[:, a] > 0, (room[a] - o[a]) / d[:, a], np.where(d[:, a] < 0, -o[a] / d[:, a], np.inf))
            t = np.minimum(t, ta)
    return t


def _ray_box(o, d, box: Box):
    lo, hi = np.asarray(box.lo), np.asarray(box.hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    tn = np.nanmax(np.minimum(t1, t2), axis=1)
    tf = np.nanmin(np.maximum(t1, t2), axis=1)
    return np.where((tn <= tf) & (tn > 0), tn, np.inf)


def _ray_sphere(o, d, s: Sphere):
    oc = o - np.asarray(s.center)
    a = np.sum(d * d, axis=1)
    b = 2.0 * d @ oc
    c = float(oc @ oc) - s.radius * s.radius
    disc = b * b - 4.0 * a * c
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    # numerically stable roots
    q = -0.5 * (b + np.copysign(sq, b))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / a
        r2 = c / q
    lo_root = np.minimum(r1, r2)
    hi_root = np.maximum(r1, r2)
    t = np.where(lo_root > 0, lo_root, np.where(hi_root > 0, hi_root, np.inf))
    return np.where(hit, t, np.inf)


def raycast(room, primitives, intr: CameraIntrinsics, extr: CameraExtrinsics):
    """Analytic camera-z depth and labels for every pixel center."""
    cols = (np.arange(intr.width) + 0.5 - intr.cx) / intr.fx
    rows = (np.arange(intr.height) + 0.5 - intr.cy) / intr.fy
    rc = np.stack(np.broadcast_arrays(cols[None, :], rows[:, None], 1.0), axis=-1).reshape(-1, 3)
    d = rc @ extr.rotation  # R^T r_cam per row; camera z of the ray is 1
    o = extr.center
    depth = _ray_room(o, d, room)
    labels = np.zeros(len(d), dtype=np.uint16)
    for prim in primitives:
        t = _ray_box(o, d, prim) if isinstance(prim, Box) else _ray_sphere(o, d, prim)
        closer = t < depth
        depth = np.where(closer, t, depth)
        labels[closer] = prim.label
    return depth.reshape(intr.height, intr.width), labels.reshape(intr.height, intr.width)


def surface_distance(points: np.ndarray, labels: np.ndarray, room, primitives) -> np.ndarray:
    """Distance from each point to the surface of the primitive its label names."""
    out = np.full(len(points), np.inf)
    room = np.asarray(room, dtype=np.float64)
    bg = labels == BACKGROUND_LABEL
    if bg.any():
        p = points[bg]
        out[bg] = np.min(np.concatenate([np.abs(p), np.abs(p - room)], axis=1), axis=1)
    for prim in primitives:
        sel = labels == prim.label
        if not sel.any():
            continue
        p = points[sel]
        if isinstance(prim, Sphere):
            out[sel] = np.abs(np.linalg.norm(p - np.asarray(prim.center), axis=1) - prim.radius)
        else:
            lo, hi = np.asarray(prim.lo), np.asarray(prim.hi)
            outside = np.maximum(np.maximum(lo - p, p - hi), 0.0)
            d_out = np.linalg.norm(outside, axis=1)
            d_in = np.min(np.minimum(p - lo, hi - p), axis=1)
            out[sel] = np.where(d_out > 0, d_out, np.abs(d_in))
    return out


# -- scene construction ------------------------------------------------------

def intrinsics_for(spec: SyntheticSceneSpec) -> CameraIntrinsics:
    f = spec.width / (2.0 * math.tan(math.radians(spec.hfov_deg) / 2.0))
    return CameraIntrinsics(f, f, spec.width / 2.0, spec.height / 2.0, spec.width, spec.height)


def _objects(spec, rng) -> list:
    lx, ly, _ = spec.room
    prims = []
    for j in range(spec.n_objects):
        kind = spec.shapes[j % len(spec.shapes)]
        label = j + 1
        if kind == "box":
            size = rng.uniform([0.3, 0.3, 0.3], [1.0, 1.0, 1.0])
            x0 = rng.uniform(0.1, lx - size[0] - 0.1)
            y0 = rng.uniform(0.1, ly - size[1] - 0.1)
            prims.append(Box((x0, y0, 0.0), (x0 + size[0], y0 + size[1], size[2]), label))
        elif kind == "sphere":
            r = rng.uniform(0.15, 0.35)
            c = (rng.uniform(r + 0.1, lx - r - 0.1), rng.uniform(r + 0.1, ly - r - 0.1), rng.uniform(r, 1.0 - r))
            prims.append(Sphere(c, r, label))
        else:
            raise SceneSpecError(f"unknown primitive shape {kind!r}")
    return prims


def _look_target(rng, room):
    lx, ly, lz = room
    wall = rng.integers(4)
    h = rng.uniform(0.2, 1.6)
    if wall == 0:
        return np.array([0.0, rng.uniform(0, ly), h])
    if wall == 1:
        return np.array([lx, rng.uniform(0, ly), h])
    if wall == 2:
        return np.array([rng.uniform(0, lx), 0.0, h])
    return np.array([rng.uniform(0, lx), ly, h])


def _smooth(a, b, s):
    s = s * s * (3.0 - 2.0 * s)
    return a + (b - a) * s


def _trajectory(spec, rng) -> list:
    lx, ly, _ = spec.room
    n = spec.n_frames
    margin = 0.4
    if spec.trajectory == "orbit":
        c = np.array([lx / 2, ly / 2, 1.5])
        rad = 0.35 * min(lx, ly)
        out = []
        for i in range(n):
            a = 2 * math.pi * i / n
            eye = c + np.array([rad * math.cos(a), rad * math.sin(a), 0.0])
            out.append((eye, c + np.array([math.cos(a + 2.0), math.sin(a + 2.0), -0.4])))
        return out

    def eye_sample():
        return np.array([rng.uniform(margin, lx - margin), rng.uniform(margin, ly - margin), rng.uniform(1.2, 1.9)])

    if spec.trajectory == "random":
        return [(eye_sample(), _look_target(rng, spec.room)) for _ in range(n)]
    # walk: waypoints visited at uneven speed, so frames bunch up where the camera dwells
    n_way = max(2, n // 12 + 2)
    eyes = [eye_sample() for _ in range(n_way)]
    looks = [_look_target(rng, spec.room) for _ in range(n_way)]
    weights = rng.exponential(1.0, n_way - 1) + 0.05
    bounds = np.concatenate([[0.0], np.cumsum(weights)]) / weights.sum()
    out = []
    for i in range(n):
        tau = i / max(n - 1, 1)
        k = min(int(np.searchsorted(bounds, tau, side="right")) - 1, n_way - 2)
        s = (tau - bounds[k]) / (bounds[k + 1] - bounds[k])
        out.append((_smooth(eyes[k], eyes[k + 1], s), _smooth(looks[k], looks[k + 1], s)))
    return out


def _inside(p, room, primitives) -> bool:
    if not all(0 < p[a] < room[a] for a in range(3)):
        return False
    for prim in primitives:
        if isinstance(prim, Box):
            if all(prim.lo[a] <= p[a] <= prim.hi[a] for a in range(3)):
                return False
        elif np.linalg.norm(p - np.asarray(prim.center)) <= prim.radius:
            return False
    return True


def build_synthetic(spec: SyntheticSceneSpec, render: bool = True) -> SyntheticScene:
    """Generate the scene in memory (depth and segmentation when ``render``)."""
    p2 = 2 * spec.patch_size_3d
    if spec.width % p2 or spec.height % p2:
        raise SceneSpecError(f"image {spec.width}x{spec.height} not divisible by patch size {p2}")
    if spec.n_frames < 1:
        raise SceneSpecError("n_frames must be >= 1")
    if spec.trajectory not in TRAJECTORIES and spec.poses is None:
        raise SceneSpecError(f"unknown trajectory {spec.trajectory!r}")
    if min(spec.room) <= 1.0:
        raise SceneSpecError("room dimensions must exceed 1 m")
    rng = np.random.default_rng(spec.seed)
    prims = _objects(spec, rng)
    poses = [(np.asarray(e, float), np.asarray(t, float)) for e, t in spec.poses] if spec.poses else _trajectory(spec, rng)
    intr = intrinsics_for(spec)
    frames, depths, segs = [], [], []
    for i, (eye, target) in enumerate(poses):
        if not _inside(eye, spec.room, prims):
            raise SceneSpecError(f"camera {i} at {eye.tolist()} is outside the free space of the room")
        extr = CameraExtrinsics.look_at(eye, target)
        frames.append(Frame(i, intr, extr, f"depth/{io.depth_name(i)}", f"seg/{io.seg_name(i)}",
                            "feat/2d.rgf", "feat/3d.rgf"))
        if render:
            d, lab = raycast(spec.room, prims, intr, extr)
            depths.append(DepthMap(d))
            segs.append(SegmentationMap(lab, frozenset({BACKGROUND_LABEL})))
    manifest = SceneManifest(tuple(frames), p2, spec.patch_size_3d)
    return SyntheticScene(spec, manifest, prims, depths, segs)


def synthetic_features(spec: SyntheticSceneSpec):
    """Seeded stand-in encoder outputs: (2D grid, 3D grid, projector weights)."""
    from .losses import ProjectorWeights

    rng = np.random.default_rng([spec.seed, 0x5EED])
    d2, d3 = spec.feature_dims
    p3 = spec.patch_size_3d
    n = len(spec.poses) if spec.poses else spec.n_frames
    h3, w3 = spec.height // p3, spec.width // p3
    f2 = rng.standard_normal((n, h3 // 2, w3 // 2, d2)).astype(np.float32)
    f3 = rng.standard_normal((n, h3, w3, d3)).astype(np.float32)
    mat = (rng.standard_normal((4 * d3, d2)) / math.sqrt(4 * d3)).astype(np.float32)
    bias = (0.01 * rng.standard_normal(d2)).astype(np.float32)
    return FeatureGrid(f2), FeatureGrid(f3), ProjectorWeights(mat, bias)


def spec_to_dict(spec: SyntheticSceneSpec) -> dict:
    d = asdict(spec)
    d["room"] = list(spec.room)
    return d


def primitives_to_list(prims) -> list:
    out = []
    for p in prims:
        if isinstance(p, Box):
            out.append({"type": "box", "lo": list(p.lo), "hi": list(p.hi), "label": p.label})
        else:
            out.append({"type": "sphere", "center": list(p.center), "radius": p.radius, "label": p.label})
    return out


def primitives_from_list(items) -> list:
    out = []
    for it in items:
        if it["type"] == "box":
            out.append(Box(tuple(it["lo"]), tuple(it["hi"]), int(it["label"])))
        else:
            out.append(Sphere(tuple(it["center"]), float(it["radius"]), int(it["label"])))
    return out


def gen_synthetic(spec: SyntheticSceneSpec, out_dir) -> SceneManifest:
    """Write a scene directory: manifest, depth, segmentation, features."""
    out = Path(out_dir)
    scene = build_synthetic(spec)
    for f, d, s in zip(scene.manifest.frames, scene.depths, scene.segs):
        io.write_depth(out / f.depth_ref, d)
        io.write_seg(out / f.seg_ref, s)
    f2, f3, w = synthetic_features(spec)
    io.write_features(out / "feat" / "2d.rgf", f2)
    io.write_features(out / "feat" / "3d.rgf", f3)
    io.write_weights(out / "feat" / "projector.rgw", w)
    io.write_manifest(out / "scene.json", scene.manifest)
    io.write_json(
        out / "synthetic.json",
        {
            "spec": spec_to_dict(spec),
            "room": list(spec.room),
            "primitives": primitives_to_list(scene.primitives),
            "background_labels": [BACKGROUND_LABEL],
        },
    )
    return scene.manifest


def load_synthetic_truth(scene_dir):
    """(room, primitives) stored alongside a generated scene."""
    doc = io.read_json(Path(scene_dir) / "synthetic.json")
    return tuple(doc["room"]), primitives_from_list(doc["primitives"])
