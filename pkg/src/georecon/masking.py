"""Object-level patch masks and frame-level view masks.

All randomness goes through :class:`MaskRng`, a SplitMix64 generator, so a
seed reproduces the same masks on any platform. When one generator feeds
both masks, object draws happen first, then frame draws.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ParameterError
from .scene import SceneManifest, SegmentationMap

_M64 = (1 << 64) - 1
DEFAULT_MIN_PIXELS = 64


@dataclass
class MaskRng:
    """SplitMix64: state += golden gamma, then a 3-step xor-shift-multiply mix."""

    seed: int
    draws: int = 0
    _state: int = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.seed <= _M64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _M64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        self.draws += 1
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``; rejects the biased low range."""
        if n <= 0:
            raise ParameterError("below() needs n >= 1")
        floor = (1 << 64) % n
        while True:
            r = self.next_u64()
            if r >= floor:
                return r % n

    def sample(self, population: Sequence, k: int) -> list:
        """``k`` items without replacement, in draw order."""
        pool = list(population)
        return [pool.pop(self.below(len(pool))) for _ in range(k)]


@dataclass(frozen=True, eq=False)
class PatchMask:
    """``bits[f, r, c]`` is True where geometry is kept, False where masked."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 3:
            raise ParameterError(f"patch mask must be 3-D, got shape {b.shape}")
        if b.dtype != bool and not np.isin(b, (0, 1)).all():
            raise ParameterError("patch mask values must be 0 or 1")
        b = b.astype(bool)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @classmethod
    def ones(cls, n_frames, patches_h, patches_w) -> "PatchMask":
        return cls(np.ones((n_frames, patches_h, patches_w), dtype=bool))

    @property
    def shape(self):
        return self.bits.shape

    def masked(self) -> frozenset:
        """Coordinates ``(frame, row, col)`` of masked patches."""
        return frozenset(map(tuple, np.argwhere(~self.bits).tolist()))

    def __eq__(self, other):
        if not isinstance(other, PatchMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


@dataclass(frozen=True)
class FrameMask:
    n_frames: int
    masked_views: frozenset

    def __post_init__(self):
        object.__setattr__(self, "masked_views", frozenset(int(i) for i in self.masked_views))
        if any(not 0 <= i < self.n_frames for i in self.masked_views):
            raise ParameterError("masked view index out of range")
        if len(self.masked_views) >= self.n_frames and self.n_frames > 0:
            raise ParameterError("at least one view must stay unmasked")


@dataclass(frozen=True)
class ObjectRecord:
    object_id: int
    views: tuple  # (frame index, frozenset of (row, col), overlap count)
    kept_view: int
    kept_views: tuple = ()

    def __post_init__(self):
        if not self.kept_views:
            object.__setattr__(self, "kept_views", (self.kept_view,))

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "kept_view": self.kept_view,
            "kept_views": list(self.kept_views),
            "views": [
                {"frame": f, "count": n, "patches": sorted([list(rc) for rc in patches])}
                for f, patches, n in self.views
            ],
        }


def salient_objects(
    segs: Sequence[SegmentationMap], background_labels: Iterable[int] = (), min_pixels: int = DEFAULT_MIN_PIXELS
) -> list[int]:
    """Non-background ids with at least ``min_pixels`` pixels over all frames.

    Sorted by descending pixel count, ties by ascending id.
    """
    if not segs:
        raise ParameterError("need at least one segmentation map")
    hist = np.zeros(1 << 16, dtype=np.int64)
    for s in segs:
        hist += np.bincount(s.labels.ravel(), minlength=1 << 16)
    background = set(int(b) for b in background_labels)
    ids = [i for i in np.flatnonzero(hist >= max(min_pixels, 1)).tolist() if i not in background]
    return sorted(ids, key=lambda i: (-int(hist[i]), i))


def _overlap_grid(labels: np.ndarray, object_id: int, patch_size: int) -> np.ndarray:
    h, w = labels.shape
    if patch_size <= 0 or h % patch_size or w % patch_size:
        raise ParameterError(f"{w}x{h} segmentation not divisible by patch size {patch_size}")
    hit = labels == object_id
    return hit.reshape(h // patch_size, patch_size, w // patch_size, patch_size).any(axis=(1, 3))


def object_patch_overlap(seg: SegmentationMap, object_id: int, patch_size: int) -> frozenset:
    """Patches ``(row, col)`` containing at least one pixel of ``object_id``."""
    grid = _overlap_grid(seg.labels, object_id, patch_size)
    return frozenset(map(tuple, np.argwhere(grid).tolist()))


def object_level_mask(
    segs: Sequence[SegmentationMap],
    manifest: SceneManifest,
    num_objects: int,
    background_labels: Iterable[int],
    rng: MaskRng,
    *,
    min_pixels: int = DEFAULT_MIN_PIXELS,
    patch_size: Optional[int] = None,
    mode: str = "best",
    retain_views: int = 1,
) -> tuple[PatchMask, list[ObjectRecord]]:
    """Mask the geometry of a few salient objects in all but their best view.

    ``segs[i]`` is the segmentation of mask frame ``i``. Objects are drawn
    uniformly without replacement from :func:`salient_objects`; objects seen
    in fewer than two views are skipped and another is drawn. For each kept
    object the view with the most overlapping patches (lowest index on ties)
    keeps its geometry; the object's patches are cleared in every other view.

    ``mode="random"`` instead keeps ``retain_views`` views drawn by ``rng``
    (objects need more views than that to qualify).
    """
    if num_objects < 0:
        raise ParameterError("num_objects must be >= 0")
    if mode not in ("best", "random"):
        raise ParameterError(f"unknown mask mode {mode!r}")
    if mode == "random" and retain_views < 1:
        raise ParameterError("retain_views must be >= 1")
    p = manifest.patch_size_2d if patch_size is None else patch_size
    if not segs:
        raise ParameterError("need at least one segmentation map")
    h, w = segs[0].labels.shape
    if h % p or w % p:
        raise ParameterError(f"{w}x{h} segmentation not divisible by patch size {p}")
    bits = np.ones((len(segs), h // p, w // p), dtype=bool)
    records: list[ObjectRecord] = []
    if num_objects == 0:
        return PatchMask(bits), records

    pool = salient_objects(segs, background_labels, min_pixels)
    need_views = 2 if mode == "best" else retain_views + 1
    while len(records) < num_objects and pool:
        obj = pool.pop(rng.below(len(pool)))
        grids = [_overlap_grid(s.labels, obj, p) for s in segs]
        views = tuple(
            (i, frozenset(map(tuple, np.argwhere(g).tolist())), int(g.sum()))
            for i, g in enumerate(grids)
            if g.any()
        )
        if len(views) < need_views:
            continue
        if mode == "best":
            kept = (max(views, key=lambda v: (v[2], -v[0]))[0],)
        else:
            kept = tuple(sorted(rng.sample([v[0] for v in views], retain_views)))
        for i, _, _ in views:
            if i not in kept:
                bits[i][grids[i]] = False
        records.append(ObjectRecord(obj, views, kept[0], kept))
    return PatchMask(bits), records


def frame_level_mask(n_frames: int, k_masked: int, rng: MaskRng) -> FrameMask:
    """Mask ``k_masked`` whole views drawn uniformly without replacement."""
    if not 0 <= k_masked < n_frames:
        raise ParameterError(f"need 0 <= k_masked < n_frames, got k={k_masked}, n={n_frames}")
    return FrameMask(n_frames, frozenset(rng.sample(range(n_frames), k_masked)))
