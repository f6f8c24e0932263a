"""Pinhole projection, z-buffered splat rendering and point-map utilities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import ParameterError
from .scene import CameraExtrinsics, CameraIntrinsics, DepthMap, PointCloud


@dataclass(frozen=True)
class RenderConfig:
    splat_side_d: float = 2.0  # pixels
    near_epsilon: float = 1e-6  # meters

    def __post_init__(self):
        if not (self.splat_side_d > 0 and self.near_epsilon > 0):
            raise ParameterError("splat_side_d and near_epsilon must be positive")


@dataclass(frozen=True, eq=False)
class VisibilityBuffer:
    width: int
    height: int
    zbuf: np.ndarray  # (H, W) float64, +inf where empty
    winner: np.ndarray  # (H, W) int64, -1 where empty

    def __eq__(self, other):
        if not isinstance(other, VisibilityBuffer):
            return NotImplemented
        return np.array_equal(self.zbuf, other.zbuf) and np.array_equal(self.winner, other.winner)


@dataclass(frozen=True, eq=False)
class VisibilitySet:
    view_id: int
    visible: np.ndarray  # sorted unique point ids

    def __post_init__(self):
        ids = np.unique(np.asarray(self.visible, dtype=np.int64))
        ids.setflags(write=False)
        object.__setattr__(self, "visible", ids)

    def __len__(self):
        return len(self.visible)

    def __contains__(self, pid):
        i = np.searchsorted(self.visible, pid)
        return i < len(self.visible) and self.visible[i] == pid

    def as_set(self) -> frozenset:
        return frozenset(self.visible.tolist())

    def __eq__(self, other):
        if not isinstance(other, VisibilitySet):
            return NotImplemented
        return self.view_id == other.view_id and np.array_equal(self.visible, other.visible)


def _to_camera(points: np.ndarray, extr: CameraExtrinsics):
    # explicit sums in a fixed order keep scalar and vector paths bit-identical
    r, t = extr.rotation, extr.translation
    px, py, pz = points[..., 0], points[..., 1], points[..., 2]
    x = r[0, 0] * px + r[0, 1] * py + r[0, 2] * pz + t[0]
    y = r[1, 0] * px + r[1, 1] * py + r[1, 2] * pz + t[1]
    z = r[2, 0] * px + r[2, 1] * py + r[2, 2] * pz + t[2]
    return x, y, z


def _to_world(xc, yc, zc, extr: CameraExtrinsics) -> np.ndarray:
    """Inverse of ``_to_camera``: R^T p_cam - R^T t."""
    r, t = extr.rotation, extr.translation
    c = -(r.T @ t)
    return np.stack(
        [
            r[0, 0] * xc + r[1, 0] * yc + r[2, 0] * zc + c[0],
            r[0, 1] * xc + r[1, 1] * yc + r[2, 1] * zc + c[1],
            r[0, 2] * xc + r[1, 2] * yc + r[2, 2] * zc + c[2],
        ],
        axis=-1,
    )


def project_point(
    p, intr: CameraIntrinsics, extr: CameraExtrinsics, near_epsilon: float = 1e-6
) -> Optional[tuple[float, float, float]]:
    """Project a world point to continuous pixel coordinates.

    Returns ``(u, v, z)`` with ``z`` the camera-space depth, or None when the
    point is behind ``near_epsilon`` or lands outside ``[0, W) x [0, H)``.
    """
    u, v, z, ok = project_points(np.asarray(p, dtype=np.float64).reshape(1, 3), intr, extr, near_epsilon)
    if not ok[0]:
        return None
    return float(u[0]), float(v[0]), float(z[0])


def project_points(points: np.ndarray, intr: CameraIntrinsics, extr: CameraExtrinsics, near_epsilon=1e-6):
    """Vectorised ``project_point``: returns ``u, v, z, in_frustum`` arrays."""
    x, y, z = _to_camera(np.asarray(points, dtype=np.float64), extr)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * x / z + intr.cx
        v = intr.fy * y / z + intr.cy
    ok = (z > near_epsilon) & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    return u, v, z, ok


def render_visibility(
    cloud: PointCloud, intr: CameraIntrinsics, extr: CameraExtrinsics, cfg: RenderConfig = RenderConfig()
) -> VisibilityBuffer:
    """Z-buffer splat render of ``cloud`` into one view.

    Every in-frustum point stamps the pixels whose centers lie in its
    ``d x d`` square; per pixel the nearest point wins, ties to the lower id.
    """
    u, v, z, ok = project_points(cloud.points, intr, extr, cfg.near_epsilon)
    idx = np.flatnonzero(ok)
    zbuf, win = kernels.splat_zbuffer(
        np.ascontiguousarray(u[idx]),
        np.ascontiguousarray(v[idx]),
        np.ascontiguousarray(z[idx]),
        np.ascontiguousarray(cloud.ids[idx]),
        intr.width,
        intr.height,
        cfg.splat_side_d / 2.0,
    )
    return VisibilityBuffer(intr.width, intr.height, zbuf, win)


def visible_set(buf: VisibilityBuffer, view_id: int) -> VisibilitySet:
    w = buf.winner
    return VisibilitySet(view_id, np.unique(w[w >= 0]))


def _pixel_rays(intr: CameraIntrinsics):
    cols = np.arange(intr.width, dtype=np.float64) + 0.5
    rows = np.arange(intr.height, dtype=np.float64) + 0.5
    return (cols - intr.cx) / intr.fx, (rows - intr.cy) / intr.fy


def _back_project_grid(depth: DepthMap, intr: CameraIntrinsics):
    """Camera-frame point grid (H, W, 3); NaN where depth is invalid."""
    if (depth.width, depth.height) != (intr.width, intr.height):
        raise ParameterError(
            f"depth is {depth.width}x{depth.height}, intrinsics say {intr.width}x{intr.height}"
        )
    z = np.where(depth.valid, depth.values, np.nan)
    cols = np.arange(intr.width, dtype=np.float64)[None, :]
    rows = np.arange(intr.height, dtype=np.float64)[:, None]
    xc = (cols + 0.5 - intr.cx) * z / intr.fx
    yc = (rows + 0.5 - intr.cy) * z / intr.fy
    return np.stack([xc, yc, z], axis=-1)


def back_project(depth: DepthMap, intr: CameraIntrinsics, extr: CameraExtrinsics) -> PointCloud:
    """One world point per valid pixel, placed at the pixel center's ray; row-major order."""
    grid = _back_project_grid(depth, intr)
    sel = depth.valid
    pc = grid[sel]
    return PointCloud(_to_world(pc[:, 0], pc[:, 1], pc[:, 2], extr))


def merge_point_clouds(clouds: Sequence[PointCloud]) -> PointCloud:
    if not clouds:
        return PointCloud(np.empty((0, 3)))
    return PointCloud(np.concatenate([c.points for c in clouds], axis=0))


def voxel_downsample(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """Replace the points of each occupied voxel by their centroid.

    Cells are ``floor(coord / voxel_size)`` per axis; output is ordered by
    lexicographic cell index.
    """
    if not voxel_size > 0:
        raise ParameterError(f"voxel_size must be positive, got {voxel_size}")
    pts = cloud.points
    if len(pts) == 0:
        return PointCloud(pts)
    cells = np.floor(pts / voxel_size).astype(np.int64)
    lo = cells.min(axis=0)
    ext = cells.max(axis=0) - lo + 1
    if float(ext[0]) * float(ext[1]) * float(ext[2]) < 2.0**62:
        cells -= lo
        key = (cells[:, 0] * ext[1] + cells[:, 1]) * ext[2] + cells[:, 2]
        del cells
        _, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    else:
        _, inverse, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    n = len(counts)
    centroid = np.empty((n, 3))
    for axis in range(3):
        centroid[:, axis] = np.bincount(inverse, weights=pts[:, axis], minlength=n) / counts
    return PointCloud(centroid)


# -- depth warping -----------------------------------------------------------

COPLANAR_TOL = 0.05  # |n . delta| / |delta| below which a neighbour shares the surface
PLANAR_TOL = 2e-3  # tighter bound for neighbours on the very same plane
PLANAR_COS = 0.99996  # normals within about half a degree

def _grid_normals(grid: np.ndarray) -> np.ndarray:
    """Per-pixel surface normals of a camera-frame point grid.

    Of the four pixel quadrants around each point, the one whose diagonal
    neighbour is most coplanar with the two edge neighbours supplies the
    normal, so normals never straddle creases or depth jumps. NaN where no
    quadrant is complete.
    """
    h, w, _ = grid.shape
    pad = np.full((h + 2, w + 2, 3), np.nan)
    pad[1:-1, 1:-1] = grid

    def shifted(dy, dx):
        return pad[1 + dy: 1 + dy + h, 1 + dx: 1 + dx + w] - grid

    best = np.full((h, w, 3), np.nan)
    best_res = np.full((h, w), np.inf)
    for sy in (1, -1):
        for sx in (1, -1):
            a, b, diag = shifted(0, sx), shifted(sy, 0), shifted(sy, sx)
            n = np.cross(a, b)
            with np.errstate(invalid="ignore", divide="ignore"):
                n = n / np.linalg.norm(n, axis=-1, keepdims=True)
                res = np.abs(np.sum(n * diag, axis=-1)) / np.linalg.norm(diag, axis=-1)
            res = np.where(np.isfinite(res) & np.all(np.isfinite(n), axis=-1), res, np.inf)
            take = res < best_res
            best[take] = n[take]
            best_res[take] = res[take]
    # face the camera
    flip = np.sum(best * grid, axis=-1) > 0
    best[flip] *= -1.0
    return best


def _footprints(grid: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Footprint of each source pixel, in source pixel units around its center.

    Returns ``(H, W, 4)`` reaches toward left, right, up, down: 1 when the
    neighbour on that side is on the same plane with the same normal, 0.5
    when it is merely near the tangent plane (curved surfaces), else 0, so a
    surfel never reaches past a depth jump or crease.
    """
    h, w, _ = grid.shape
    pad = np.full((h + 2, w + 2, 3), np.nan)
    pad[1:-1, 1:-1] = grid
    npad = np.full((h + 2, w + 2, 3), np.nan)
    npad[1:-1, 1:-1] = normals
    out = np.zeros((h, w, 4))
    for k, (dy, dx) in enumerate(((0, -1), (0, 1), (-1, 0), (1, 0))):
        delta = pad[1 + dy: 1 + dy + h, 1 + dx: 1 + dx + w] - grid
        agree = np.sum(normals * npad[1 + dy: 1 + dy + h, 1 + dx: 1 + dx + w], axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            res = np.abs(np.sum(normals * delta, axis=-1)) / np.linalg.norm(delta, axis=-1)
        planar = (res <= PLANAR_TOL) & (agree >= PLANAR_COS)
        out[..., k] = np.where(planar, 1.0, np.where(res <= COPLANAR_TOL, 0.5, 0.0))
    return out


def warp_depth(
    sources: Sequence[tuple[DepthMap, CameraIntrinsics, CameraExtrinsics]],
    target_intr: CameraIntrinsics,
    target_extr: CameraExtrinsics,
    cfg: RenderConfig = RenderConfig(),
) -> tuple[DepthMap, np.ndarray]:
    """Reproject source depth maps into a target view.

    Source pixels are back-projected and z-buffer rendered into the target.
    Each covered target pixel then intersects its center ray with the
    tangent planes of the winners in its 3x3 neighbourhood, keeping only
    hits that fall inside the candidate's own source-pixel footprint (cropped
    at depth jumps and creases), and takes the nearest such hit. Pixels
    without a valid hit are uncovered.

    Returns the warped depth (NaN where uncovered) and the coverage mask.
    """
    if not sources:
        raise ParameterError("warp_depth needs at least one source")
    pts, nrm, src_idx, pix, reaches = [], [], [], [], []
    for s, (depth, intr, extr) in enumerate(sources):
        grid = _back_project_grid(depth, intr)
        normals = _grid_normals(grid)
        reach = _footprints(grid, normals)
        ok = depth.valid & np.all(np.isfinite(normals), axis=-1)
        rows, cols = np.nonzero(ok)
        pc = grid[rows, cols]
        pts.append(_to_world(pc[:, 0], pc[:, 1], pc[:, 2], extr))
        nc = normals[rows, cols]
        nrm.append(nc @ extr.rotation)  # R^T n, row-wise
        src_idx.append(np.full(len(rows), s, dtype=np.int64))
        pix.append(np.stack([cols, rows], axis=1))
        reaches.append(reach[rows, cols])
    cloud = PointCloud(np.concatenate(pts))
    normals_w = np.concatenate(nrm)
    src_idx = np.concatenate(src_idx)
    pix = np.concatenate(pix).astype(np.float64) + 0.5  # source pixel centers
    reaches = np.concatenate(reaches)

    h, w = target_intr.height, target_intr.width
    out = np.full((h, w), np.nan)
    if len(cloud) == 0:
        return DepthMap(out), np.zeros((h, w), dtype=bool)
    buf = render_visibility(cloud, target_intr, target_extr, cfg)
    covered = buf.winner >= 0
    if not covered.any():
        return DepthMap(out), covered

    ty, tx = np.nonzero(covered)
    rx, ry = _pixel_rays(target_intr)
    ray = np.stack([rx[tx], ry[ty], np.ones(len(tx))], axis=1)

    padded = np.pad(buf.winner, 1, constant_values=-1)
    best_z = np.full(len(tx), np.inf)
    best_id = np.full(len(tx), -1, dtype=np.int64)
    rot_s = np.stack([e.rotation for _, _, e in sources])
    tr_s = np.stack([e.translation for _, _, e in sources])
    intr_s = np.array([[i.fx, i.fy, i.cx, i.cy] for _, i, _ in sources])
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            cand = padded[ty + 1 + dy, tx + 1 + dx]
            has = cand >= 0
            c = np.where(has, cand, 0)
            p_cam = np.stack(_to_camera(cloud.points[c], target_extr), axis=1)
            n_cam = normals_w[c] @ target_extr.rotation.T
            denom = np.sum(n_cam * ray, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                zhit = np.sum(n_cam * p_cam, axis=1) / denom
            ok = has & (np.abs(denom) > 1e-12) & (zhit > cfg.near_epsilon)
            # footprint test in the candidate's source image
            q_world = _to_world(ray[:, 0] * zhit, ray[:, 1] * zhit, zhit, target_extr)
            s = src_idx[c]
            q_src = np.einsum("nij,nj->ni", rot_s[s], q_world) + tr_s[s]
            with np.errstate(divide="ignore", invalid="ignore"):
                us = intr_s[s, 0] * q_src[:, 0] / q_src[:, 2] + intr_s[s, 2]
                vs = intr_s[s, 1] * q_src[:, 1] / q_src[:, 2] + intr_s[s, 3]
            du, dv = us - pix[c, 0], vs - pix[c, 1]
            r = reaches[c] + 1e-6
            ok &= (q_src[:, 2] > 0) & (du >= -r[:, 0]) & (du <= r[:, 1]) & (dv >= -r[:, 2]) & (dv <= r[:, 3])
            # reach past the own pixel along one axis only, never into a diagonal neighbour
            ok &= (np.abs(du) <= 0.5 + 1e-6) | (np.abs(dv) <= 0.5 + 1e-6)
            better = ok & ((zhit < best_z) | ((zhit == best_z) & (c < best_id)))
            best_z = np.where(better, zhit, best_z)
            best_id = np.where(better, c, best_id)
    hit = best_id >= 0
    out[ty[hit], tx[hit]] = best_z[hit]
    mask = np.zeros((h, w), dtype=bool)
    mask[ty[hit], tx[hit]] = True
    return DepthMap(out), mask
