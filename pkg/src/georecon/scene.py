"""Core scene types shared by every module.

Conventions
-----------
* Geometry is float64 internally; files store float32.
* ``p_cam = R @ p_world + t`` (world to camera). Camera axes: x right,
  y down, z forward.
* Pixel ``(u, v)`` covers ``[u, u+1) x [v, v+1)``; its center is
  ``(u + 0.5, v + 0.5)``. ``u`` indexes columns, ``v`` rows.
* Invalid depth is any non-finite value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError, InputError

ORTHONORMAL_TOL = 1e-6


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def violations(self) -> list[str]:
        out = []
        if not (self.fx > 0 and self.fy > 0):
            out.append(f"focal lengths must be positive (fx={self.fx}, fy={self.fy})")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            out.append(f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image")
        if self.width <= 0 or self.height <= 0:
            out.append(f"non-positive image size {self.width}x{self.height}")
        return out


@dataclass(frozen=True, eq=False)
class CameraExtrinsics:
    """World-to-camera rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation, np.float64).reshape(3, 3))
        object.__setattr__(self, "translation", _frozen(self.translation, np.float64).reshape(3))

    @classmethod
    def identity(cls) -> "CameraExtrinsics":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0)) -> "CameraExtrinsics":
        """Camera at ``eye`` looking at ``target`` with image-up along ``up``."""
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-9:
            right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rot = np.stack([right, down, forward])
        return cls(rot, -rot @ eye)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def violations(self) -> list[str]:
        r = self.rotation
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(self.translation)):
            return ["non-finite extrinsics"]
        err = np.abs(r.T @ r - np.eye(3)).max()
        det = np.linalg.det(r)
        out = []
        if err > ORTHONORMAL_TOL:
            out.append(f"rotation not orthonormal (max |R^T R - I| = {err:.3g})")
        if abs(det - 1.0) > ORTHONORMAL_TOL:
            out.append(f"rotation determinant {det:.9g} != 1")
        return out

    def __eq__(self, other):
        if not isinstance(other, CameraExtrinsics):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )


@dataclass(frozen=True)
class Frame:
    frame_id: int
    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics
    depth_ref: Optional[str] = None
    seg_ref: Optional[str] = None
    feat2d_ref: Optional[str] = None
    feat3d_ref: Optional[str] = None


@dataclass(frozen=True)
class SceneManifest:
    frames: tuple
    patch_size_2d: int
    patch_size_3d: int

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))

    def frame(self, frame_id: int) -> Frame:
        for f in self.frames:
            if f.frame_id == frame_id:
                return f
        raise InputError(f"frame {frame_id} not in manifest")

    def patch_grid(self, frame: Frame | None = None) -> tuple[int, int]:
        """(patches_h, patches_w) of the fused-token grid."""
        intr = (frame or self.frames[0]).intrinsics
        return intr.height // self.patch_size_2d, intr.width // self.patch_size_2d


@dataclass(frozen=True, eq=False)
class DepthMap:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        if self.values.ndim != 2:
            raise FormatError(f"depth map must be 2-D, got shape {self.values.shape}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)

    def __eq__(self, other):
        if not isinstance(other, DepthMap):
            return NotImplemented
        return np.array_equal(self.values, other.values, equal_nan=True)


@dataclass(frozen=True, eq=False)
class SegmentationMap:
    labels: np.ndarray
    background_labels: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise FormatError(f"segmentation must be 2-D, got shape {lab.shape}")
        if lab.size and (lab.min() < 0 or lab.max() > 0xFFFF):
            raise FormatError("segmentation labels must fit in u16")
        object.__setattr__(self, "labels", _frozen(lab, np.uint16))
        object.__setattr__(self, "background_labels", frozenset(int(x) for x in self.background_labels))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SegmentationMap):
            return NotImplemented
        return np.array_equal(self.labels, other.labels) and self.background_labels == other.background_labels


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    ids: np.ndarray = None

    def __post_init__(self):
        pts = _frozen(self.points, np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", pts)
        ids = np.arange(len(pts), dtype=np.int64) if self.ids is None else self.ids
        ids = _frozen(ids, np.int64)
        if ids.shape != (len(pts),) or not np.array_equal(ids, np.arange(len(pts))):
            raise FormatError("point ids must be contiguous from 0")
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return np.array_equal(self.points, other.points)


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """Patchified features, shape ``(n_frames, patches_h, patches_w, dim)``."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if data.ndim != 4:
            raise FormatError(f"feature grid must be 4-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise FormatError("feature grid contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def patches_h(self) -> int:
        return self.data.shape[1]

    @property
    def patches_w(self) -> int:
        return self.data.shape[2]

    @property
    def dim(self) -> int:
        return self.data.shape[3]

    def __eq__(self, other):
        if not isinstance(other, FeatureGrid):
            return NotImplemented
        return np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    frame_id: Optional[int] = None

    def __str__(self):
        where = "" if self.frame_id is None else f"frame {self.frame_id}: "
        return f"{self.kind}: {where}{self.message}"


def validate_scene(manifest: SceneManifest, root: str | Path | None = None) -> list[Violation]:
    """Check every type invariant across the scene; returns the violations found.

    Referenced files are resolved against ``root`` (skipped when ``root`` is
    None). Unreadable files become ``io`` violations rather than exceptions.
    """
    from . import io

    report: list[Violation] = []
    p2, p3 = manifest.patch_size_2d, manifest.patch_size_3d
    if p3 <= 0 or p2 != 2 * p3:
        report.append(Violation("patch ratio", f"patch_size_2d={p2} must equal 2 * patch_size_3d={p3}"))
    if not manifest.frames:
        report.append(Violation("empty", "manifest has no frames"))
        return report

    seen = set()
    for f in manifest.frames:
        fid = f.frame_id
        if fid in seen:
            report.append(Violation("duplicate frame id", f"frame_id {fid} repeated", fid))
        seen.add(fid)
        intr = f.intrinsics
        report.extend(Violation("intrinsics", m, fid) for m in intr.violations())
        report.extend(Violation("extrinsics", m, fid) for m in f.extrinsics.violations())
        if p2 > 0 and (intr.width % p2 or intr.height % p2):
            report.append(
                Violation("dimension", f"{intr.width}x{intr.height} not divisible by patch_size_2d={p2}", fid)
            )
        if root is None:
            continue
        root = Path(root)
        for ref, reader in (("depth_ref", io.read_depth_header), ("seg_ref", io.read_seg_header)):
            rel = getattr(f, ref)
            if rel is None:
                continue
            try:
                w, h = reader(root / rel)
            except (OSError, FormatError) as exc:
                report.append(Violation("io", f"{ref} {rel!r}: {exc}", fid))
                continue
            if (w, h) != (intr.width, intr.height):
                report.append(
                    Violation("dimension", f"{ref} is {w}x{h}, frame is {intr.width}x{intr.height}", fid)
                )
            elif ref == "depth_ref":
                vals = io.read_depth(root / rel).values
                finite = vals[np.isfinite(vals)]
                if finite.size and finite.min() <= 0:
                    report.append(Violation("depth values", "finite depths must be > 0", fid))
        for ref in ("feat2d_ref", "feat3d_ref"):
            rel = getattr(f, ref)
            if rel is None:
                continue
            try:
                _, ph, pw, _ = io.read_features_header(root / rel)
            except (OSError, FormatError) as exc:
                report.append(Violation("io", f"{ref} {rel!r}: {exc}", fid))
                continue
            p = p2 if ref == "feat2d_ref" else p3
            if p > 0 and (ph, pw) != (intr.height // p, intr.width // p):
                report.append(
                    Violation("dimension", f"{ref} patch grid {ph}x{pw} does not match image / {p}", fid)
                )
    return report
