"""Naive reference implementations used as test oracles.

Each one is written independently of the library code path it checks:
plain loops, Python sets and dicts, homogeneous matrices.
"""
import itertools
import math

import numpy as np

from georecon import project_point
from georecon.scene import CameraExtrinsics, CameraIntrinsics


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_camera(rng, width=None, height=None):
    w = int(width or rng.integers(8, 257))
    h = int(height or rng.integers(8, 257))
    f = rng.uniform(0.5, 1.5) * w
    intr = CameraIntrinsics(f, f * rng.uniform(0.9, 1.1), rng.uniform(0.3, 0.7) * w, rng.uniform(0.3, 0.7) * h, w, h)
    return intr, CameraExtrinsics(random_rotation(rng), rng.uniform(-1, 1, 3))


def points_in_view(rng, intr, extr, n, zmin=0.5, zmax=5.0):
    """World points whose projections fall inside (and a little outside) the image."""
    u = rng.uniform(-0.1, 1.1, n) * intr.width
    v = rng.uniform(-0.1, 1.1, n) * intr.height
    z = rng.uniform(zmin, zmax, n)
    cam = np.stack([(u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z], axis=1)
    return (cam - extr.translation) @ extr.rotation


def homogeneous_project(p, intr, extr):
    """Pixel coordinates via 4x4 world-to-camera and 3x4 intrinsics products."""
    t = np.eye(4)
    t[:3, :3] = extr.rotation
    t[:3, 3] = extr.translation
    k = np.zeros((3, 4))
    k[:3, :3] = intr.matrix()
    ph = k @ (t @ np.append(np.asarray(p, dtype=np.float64), 1.0))
    return ph[0] / ph[2], ph[1] / ph[2], ph[2]


def zbuffer_oracle(points, intr, extr, d, near=1e-6):
    """Per-pixel scan of every point's coverage square; nearest depth, then lowest id."""
    w, h = intr.width, intr.height
    zbuf = np.full((h, w), np.inf)
    win = np.full((h, w), -1, dtype=np.int64)
    centers_u = np.arange(w) + 0.5
    centers_v = np.arange(h) + 0.5
    for pid, p in enumerate(points):
        proj = project_point(p, intr, extr, near)
        if proj is None:
            continue
        x, y, z = proj
        cols = np.flatnonzero(np.abs(centers_u - x) <= d / 2)
        rows = np.flatnonzero(np.abs(centers_v - y) <= d / 2)
        for r in rows:
            for c in cols:
                if z < zbuf[r, c] or (z == zbuf[r, c] and pid < win[r, c]):
                    zbuf[r, c] = z
                    win[r, c] = pid
    return zbuf, win


def back_project_oracle(depth, intr, extr):
    rinv = np.linalg.inv(extr.rotation)
    out = []
    for v in range(depth.shape[0]):
        for u in range(depth.shape[1]):
            z = depth[v, u]
            if not math.isfinite(z):
                continue
            cam = np.array([(u + 0.5 - intr.cx) * z / intr.fx, (v + 0.5 - intr.cy) * z / intr.fy, z])
            out.append(rinv @ (cam - extr.translation))
    return np.array(out).reshape(-1, 3)


def voxel_oracle(points, size):
    groups = {}
    for p in points:
        key = tuple(math.floor(c / size) for c in p)
        groups.setdefault(key, []).append(p)
    return np.array([np.mean(groups[k], axis=0) for k in sorted(groups)]).reshape(-1, 3)


def union_size(sets, idx):
    out = set()
    for i in idx:
        out |= set(sets[i])
    return len(out)


def exhaustive_oracle(sets, k):
    return max(union_size(sets, c) for c in itertools.combinations(range(len(sets)), k))


def greedy_oracle(sets, k):
    """Set-based greedy: largest gain, lowest index on ties, spread pick when gains are exhausted."""
    covered, picks, gains = set(), [], []
    for _ in range(k):
        rest = [i for i in range(len(sets)) if i not in picks]
        best = max(rest, key=lambda i: (len(set(sets[i]) - covered), -i))
        g = len(set(sets[best]) - covered)
        if g == 0 and picks:
            best = max(rest, key=lambda i: (min(abs(i - j) for j in picks), -i))
        picks.append(best)
        gains.append(g)
        covered |= set(sets[best])
    return picks, gains


def cosine_oracle(a, b):
    dot = na = nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    return -dot / (math.sqrt(na) * math.sqrt(nb))


def merge_oracle(f3d, mat, bias):
    n, ph, pw, d = f3d.shape
    out = np.zeros((n, ph // 2, pw // 2, mat.shape[1]))
    for f in range(n):
        for r in range(ph // 2):
            for c in range(pw // 2):
                cat = []
                for dr, dc in ((0, 0), (0, 1), (1, 0), (1, 1)):
                    cat.extend(f3d[f, 2 * r + dr, 2 * c + dc])
                for j in range(mat.shape[1]):
                    acc = 0.0 if bias is None else float(bias[j])
                    for i, x in enumerate(cat):
                        acc += x * mat[i, j]
                    out[f, r, c, j] = acc
    return out


def patch_overlap_oracle(labels, obj, p):
    out = set()
    for y in range(labels.shape[0]):
        for x in range(labels.shape[1]):
            if labels[y, x] == obj:
                out.add((y // p, x // p))
    return out
