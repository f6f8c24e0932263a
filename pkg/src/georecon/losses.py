"""Token fusion and reconstruction losses over patch feature grids."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateInputError, InputError, ParameterError
from .masking import FrameMask, PatchMask
from .scene import DepthMap, FeatureGrid


@dataclass(frozen=True, eq=False)
class ProjectorWeights:
    """Affine map applied to each concatenated 2x2 block of 3D features."""

    matrix: np.ndarray  # (4 * D3, D3')
    bias: Optional[np.ndarray] = None  # (D3',)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ParameterError("projector matrix must be 2-D")
        if m.shape[0] % 4:
            raise ParameterError(f"projector rows ({m.shape[0]}) must be 4 x the input feature dim")
        if not np.all(np.isfinite(m)):
            raise ParameterError("projector matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.bias is not None:
            b = np.array(self.bias, dtype=np.float64).reshape(-1)
            if b.shape != (m.shape[1],) or not np.all(np.isfinite(b)):
                raise ParameterError("projector bias must be finite with one entry per output column")
            b.setflags(write=False)
            object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[0] // 4

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[1]

    def __eq__(self, other):
        if not isinstance(other, ProjectorWeights):
            return NotImplemented
        if (self.bias is None) != (other.bias is None):
            return False
        return np.array_equal(self.matrix, other.matrix) and (
            self.bias is None or np.array_equal(self.bias, other.bias)
        )


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0
    beta: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        for name, val in asdict(self).items():
            if not (math.isfinite(val) and val >= 0):
                raise ParameterError(f"{name} must be finite and >= 0, got {val}")


@dataclass(frozen=True)
class LossReport:
    l_text: float
    l_object: float
    l_frame: float
    l_total: float
    g_masked_patches: int = 0
    k_masked_frames: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def merge_patches_2x2(f3d: FeatureGrid, w: ProjectorWeights) -> FeatureGrid:
    """Concatenate each 2x2 patch block (TL, TR, BL, BR) and apply the projector."""
    n, ph, pw, d = f3d.data.shape
    if ph % 2 or pw % 2:
        raise ParameterError(f"patch grid {ph}x{pw} must have even dimensions")
    if w.matrix.shape[0] != 4 * d:
        raise ParameterError(f"projector expects {w.matrix.shape[0] // 4}-dim features, grid has {d}")
    blocks = f3d.data.reshape(n, ph // 2, 2, pw // 2, 2, d).transpose(0, 1, 3, 2, 4, 5)
    concat = blocks.reshape(n, ph // 2, pw // 2, 4 * d)
    out = concat @ w.matrix
    if w.bias is not None:
        out = out + w.bias
    return FeatureGrid(out)


def _check_same(a: FeatureGrid, b: FeatureGrid, what: str):
    if a.data.shape != b.data.shape:
        raise ParameterError(f"{what}: shapes {a.data.shape} and {b.data.shape} differ")


def fuse_tokens(f2d: FeatureGrid, f3d_merged: FeatureGrid, mask: PatchMask) -> FeatureGrid:
    """2D feature plus projected geometry where the mask keeps it, 2D feature alone elsewhere."""
    _check_same(f2d, f3d_merged, "fuse_tokens")
    if mask.bits.shape != f2d.data.shape[:3]:
        raise ParameterError(f"mask shape {mask.bits.shape} does not match grid {f2d.data.shape[:3]}")
    return FeatureGrid(np.where(mask.bits[..., None], f2d.data + f3d_merged.data, f2d.data))


def fusion_target(f2d: FeatureGrid, f3d_merged: FeatureGrid, mode: str = "fused") -> FeatureGrid:
    """Reconstruction target: the unmasked fused token, or geometry alone (``mode="geometry"``)."""
    _check_same(f2d, f3d_merged, "fusion_target")
    if mode == "fused":
        return FeatureGrid(f2d.data + f3d_merged.data)
    if mode == "geometry":
        return f3d_merged
    raise ParameterError(f"unknown target mode {mode!r}")


def _cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dot = np.sum(a * b, axis=-1)
    na2 = np.sum(a * a, axis=-1)
    nb2 = np.sum(b * b, axis=-1)
    # sqrt(s * s) == s exactly, so identical vectors give exactly -1
    denom = np.sqrt(na2 * nb2)
    fix = ~np.isfinite(denom) | (denom == 0)
    if fix.any():
        denom = np.where(fix, np.sqrt(na2) * np.sqrt(nb2), denom)
    return np.clip(-dot / denom, -1.0, 1.0)


def cosine_distance(a, b) -> float:
    """Negative cosine similarity, in ``[-1, 1]``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ParameterError(f"vector lengths differ: {a.size} vs {b.size}")
    if not np.any(a) or not np.any(b):
        raise DegenerateInputError("cosine distance of a zero vector")
    return float(_cosine_rows(a[None], b[None])[0])


def object_recon_loss(targets: FeatureGrid, recon: FeatureGrid, mask: PatchMask, alpha: float = 1.0) -> float:
    """``alpha / G`` times the summed cosine distance over the G masked patches.

    Evaluated as ``alpha * (sum / G)`` so a perfect reconstruction yields
    exactly ``-alpha``. Zero when nothing is masked.
    """
    _check_same(targets, recon, "object_recon_loss")
    if mask.bits.shape != targets.data.shape[:3]:
        raise ParameterError(f"mask shape {mask.bits.shape} does not match grid {targets.data.shape[:3]}")
    masked = ~mask.bits
    g = int(masked.sum())
    if g == 0:
        return 0.0
    a = targets.data[masked]
    b = recon.data[masked]
    zero = ~np.any(a, axis=1) | ~np.any(b, axis=1)
    if zero.any():
        f, r, c = np.argwhere(masked)[np.argmax(zero)]
        raise DegenerateInputError(f"zero feature vector at masked patch (frame={f}, row={r}, col={c})")
    return alpha * (float(np.sum(_cosine_rows(a, b))) / g)


DepthSeq = Union[Sequence[DepthMap], Mapping[int, DepthMap]]


def _lookup(maps: DepthSeq, i: int, what: str) -> DepthMap:
    try:
        m = maps[i]
    except (KeyError, IndexError):
        m = None
    if m is None:
        raise InputError(f"missing {what} depth for masked view {i}")
    return m


def frame_recon_loss(gt: DepthSeq, pred: DepthSeq, fmask: FrameMask, beta: float = 1.0) -> float:
    """``beta / K`` times the summed squared depth error over the K masked views.

    Errors are summed over pixels valid in both maps (no per-pixel mean);
    views are visited in ascending index order.
    """
    views = sorted(fmask.masked_views)
    if not views:
        return 0.0
    total = 0.0
    for i in views:
        g, p = _lookup(gt, i, "ground-truth"), _lookup(pred, i, "predicted")
        if g.values.shape != p.values.shape:
            raise InputError(f"view {i}: depth shapes {g.values.shape} and {p.values.shape} differ")
        ok = g.valid & p.valid
        diff = g.values[ok] - p.values[ok]
        total += float(np.sum(diff * diff))
    return beta * (total / len(views))


def total_loss(
    l_text: float, l_object: float, l_frame: float, cfg: LossConfig = LossConfig(),
    g_masked_patches: int = 0, k_masked_frames: int = 0,
) -> LossReport:
    vals = (l_text, l_object, l_frame)
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"loss components must be finite, got {vals}")
    total = l_text + cfg.lambda1 * l_object + cfg.lambda2 * l_frame
    return LossReport(float(l_text), float(l_object), float(l_frame), float(total), g_masked_patches, k_masked_frames)
