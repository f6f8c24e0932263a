"""Adaptive frame sampling by greedy maximum coverage of visible points."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import io, kernels
from .errors import InputError, ParameterError
from .geometry import (
    RenderConfig,
    VisibilitySet,
    back_project,
    merge_point_clouds,
    render_visibility,
    visible_set,
    voxel_downsample,
)
from .scene import DepthMap, PointCloud, SceneManifest

EXHAUSTIVE_LIMIT = 20


@dataclass(frozen=True)
class SamplerConfig:
    candidates: int
    select: int
    total_frames: Optional[int] = None  # defaults to the manifest's frame count
    voxel_size: float = 0.05
    render: RenderConfig = field(default_factory=RenderConfig)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.select < 1:
            raise ParameterError(f"select must be >= 1, got {self.select}")
        if self.select > self.candidates:
            raise ParameterError(f"select={self.select} exceeds candidates={self.candidates}")
        if self.total_frames is not None and self.candidates > self.total_frames:
            raise ParameterError(f"candidates={self.candidates} exceeds total frames={self.total_frames}")
        if not self.voxel_size > 0:
            raise ParameterError("voxel_size must be positive")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        return d


@dataclass(frozen=True)
class SelectionReport:
    candidate_ids: list
    selected_ids: list
    marginal_gains: list
    total_points: int
    covered_points: int
    uniform_ids: list
    uniform_baseline_covered: int
    config: dict

    def to_dict(self) -> dict:
        return {
            "candidate_ids": list(self.candidate_ids),
            "selected_ids": list(self.selected_ids),
            "marginal_gains": list(self.marginal_gains),
            "total_points": self.total_points,
            "covered_points": self.covered_points,
            "uniform_ids": list(self.uniform_ids),
            "uniform_baseline_covered": self.uniform_baseline_covered,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionReport":
        try:
            return cls(
                list(d["candidate_ids"]), list(d["selected_ids"]), list(d["marginal_gains"]),
                int(d["total_points"]), int(d["covered_points"]), list(d.get("uniform_ids", [])),
                int(d["uniform_baseline_covered"]), dict(d.get("config", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed selection report: {exc!r}") from exc


def uniform_sample(total: int, count: int) -> list[int]:
    """``floor(i * total / count)`` for ``i`` in ``0..count-1``."""
    if not 1 <= count <= total:
        raise ParameterError(f"need 1 <= count <= total, got count={count}, total={total}")
    return [i * total // count for i in range(count)]


def _csr(sets: Sequence) -> tuple[np.ndarray, np.ndarray, int]:
    arrays = [np.asarray(s.visible if isinstance(s, VisibilitySet) else sorted(s), dtype=np.int64) for s in sets]
    offsets = np.zeros(len(arrays) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(a) for a in arrays])
    members = np.concatenate(arrays) if arrays else np.empty(0, np.int64)
    n_points = int(members.max()) + 1 if len(members) else 0
    return np.ascontiguousarray(members), offsets, n_points


def greedy_max_coverage(sets: Sequence, k: int) -> tuple[list[int], list[int]]:
    """Greedy maximum coverage: K picks, each maximising newly covered points.

    Gain ties go to the lowest index. Once every remaining gain is zero, the
    pick maximises the minimum index distance to what is already selected
    (ties to the lowest index). Returns ``(selected indices, gains)``.
    """
    m = len(sets)
    if not 0 <= k <= m:
        raise ParameterError(f"k={k} must be between 0 and the number of sets ({m})")
    members, offsets, n_points = _csr(sets)
    covered = np.zeros(max(n_points, 1), dtype=np.uint8)
    taken = np.zeros(m, dtype=np.uint8)
    selected, gains = [], []
    for _ in range(k):
        counts = kernels.uncovered_counts(members, offsets, covered, taken)
        best = int(np.argmax(np.where(taken.astype(bool), -1, counts)))
        gain = int(counts[best])
        if gain == 0:
            best = _spread_pick(selected, taken)
        selected.append(best)
        gains.append(gain)
        taken[best] = 1
        covered[members[offsets[best]:offsets[best + 1]]] = 1
    return selected, gains


def _spread_pick(selected: list[int], taken: np.ndarray) -> int:
    free = np.flatnonzero(taken == 0)
    if not selected:
        return int(free[0])
    dist = np.min(np.abs(free[:, None] - np.asarray(selected)[None, :]), axis=1)
    return int(free[np.argmax(dist)])


def coverage_of(sets: Sequence, indices: Sequence[int]) -> int:
    """Size of the union of the chosen sets."""
    if not len(indices):
        return 0
    parts = [np.asarray(sets[i].visible if isinstance(sets[i], VisibilitySet) else sorted(sets[i]), dtype=np.int64)
             for i in indices]
    return len(np.unique(np.concatenate(parts)))


def exhaustive_max_coverage(sets: Sequence, k: int) -> tuple[tuple[int, ...], int]:
    """Exact maximum coverage by enumerating every K-subset (test oracle).

    Returns the lexicographically smallest optimal subset and its coverage.
    """
    m = len(sets)
    if m > EXHAUSTIVE_LIMIT:
        raise ParameterError(f"exhaustive search refused for {m} > {EXHAUSTIVE_LIMIT} sets")
    if not 0 <= k <= m:
        raise ParameterError(f"k={k} must be between 0 and {m}")
    masks = []
    for s in sets:
        ids = s.visible.tolist() if isinstance(s, VisibilitySet) else s
        bits = 0
        for pid in ids:
            bits |= 1 << int(pid)
        masks.append(bits)
    best, best_cov = tuple(range(k)), -1
    for combo in itertools.combinations(range(m), k):
        union = 0
        for i in combo:
            union |= masks[i]
        cov = bin(union).count("1")
        if cov > best_cov:
            best, best_cov = combo, cov
    return best, best_cov


@dataclass
class CoverageRun:
    """Everything computed by the sampler; the report plus its inputs."""

    report: SelectionReport
    cloud: PointCloud
    visibility: list  # VisibilitySet per candidate, candidate order


def _visibility_sets(cloud, cams, render: RenderConfig, threads: int) -> list[VisibilitySet]:
    def one(item):
        view_id, (intr, extr) = item
        return visible_set(render_visibility(cloud, intr, extr, render), view_id)

    items = list(enumerate(cams))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, items))
    return [one(it) for it in items]


def run_adaptive(manifest: SceneManifest, depths: Mapping[int, DepthMap], cfg: SamplerConfig) -> CoverageRun:
    frames = manifest.frames
    total = cfg.total_frames if cfg.total_frames is not None else len(frames)
    if total > len(frames):
        raise ParameterError(f"total_frames={total} exceeds the {len(frames)} frames in the manifest")
    positions = uniform_sample(total, cfg.candidates)
    cand = [frames[p] for p in positions]
    clouds = []
    for f in cand:
        try:
            depth = depths[f.frame_id]
        except (KeyError, IndexError):
            depth = None
        if depth is None:
            raise InputError(f"missing depth for frame {f.frame_id}")
        clouds.append(back_project(depth, f.intrinsics, f.extrinsics))
    merged = merge_point_clouds(clouds)
    del clouds
    cloud = voxel_downsample(merged, cfg.voxel_size)
    del merged
    vis = _visibility_sets(cloud, [(f.intrinsics, f.extrinsics) for f in cand], cfg.render, cfg.threads)
    picks, gains = greedy_max_coverage(vis, cfg.select)
    uni = uniform_sample(cfg.candidates, cfg.select)
    report = SelectionReport(
        candidate_ids=[f.frame_id for f in cand],
        selected_ids=[cand[i].frame_id for i in picks],
        marginal_gains=gains,
        total_points=len(cloud),
        covered_points=coverage_of(vis, picks),
        uniform_ids=[cand[i].frame_id for i in uni],
        uniform_baseline_covered=coverage_of(vis, uni),
        config=cfg.echo(),
    )
    return CoverageRun(report, cloud, vis)


def adaptive_sample(manifest: SceneManifest, depths: Mapping[int, DepthMap], cfg: SamplerConfig) -> SelectionReport:
    """Uniform candidates, merged voxelised point map, z-buffer visibility, greedy pick.

    ``depths`` maps frame id to that frame's depth map. The uniform baseline
    in the report is ``uniform_sample(M, K)`` applied to the candidate list.
    """
    return run_adaptive(manifest, depths, cfg).report


class SceneDepths(Mapping):
    """Lazy frame id -> DepthMap view over a scene directory."""

    def __init__(self, root, manifest: SceneManifest):
        self.root = Path(root)
        self.frames = {f.frame_id: f for f in manifest.frames}

    def __getitem__(self, frame_id):
        f = self.frames.get(frame_id)
        if f is None or f.depth_ref is None:
            raise InputError(f"no depth reference for frame {frame_id}")
        path = self.root / f.depth_ref
        if not path.exists():
            raise InputError(f"missing depth file for frame {frame_id}: {path}")
        return io.read_depth(path)

    def __iter__(self):
        return iter(self.frames)

    def __len__(self):
        return len(self.frames)
