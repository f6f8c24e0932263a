"""Binary and JSON file formats.

All binary formats are little-endian: a 4-byte magic, u32 header fields,
then a row-major payload.

========  ==========================================  ====================
magic     header                                      payload
========  ==========================================  ====================
``RGD1``  width, height                               float32 depth (m)
``RGS1``  width, height                               u16 labels
``RGF1``  n_frames, patches_h, patches_w, dim         float32 features
``RGW1``  rows, cols, u8 has_bias                     float32 matrix, bias
``RGM1``  n_frames, patches_h, patches_w              bits, LSB first
========  ==========================================  ====================
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .scene import (
    CameraExtrinsics,
    CameraIntrinsics,
    DepthMap,
    FeatureGrid,
    Frame,
    SceneManifest,
    SegmentationMap,
)

DEPTH_MAGIC = b"RGD1"
SEG_MAGIC = b"RGS1"
FEAT_MAGIC = b"RGF1"
WEIGHTS_MAGIC = b"RGW1"
MASK_MAGIC = b"RGM1"


def _write_atomic(path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _read_header(path, magic: bytes, n_fields: int) -> tuple[bytes, tuple[int, ...]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    head = 4 + 4 * n_fields
    if len(raw) < head or raw[:4] != magic:
        raise FormatError(f"{path}: expected {magic.decode()} header")
    return raw, struct.unpack_from(f"<{n_fields}I", raw, 4)


def _payload(raw: bytes, offset: int, dtype: str, count: int, path) -> np.ndarray:
    need = offset + np.dtype(dtype).itemsize * count
    if len(raw) != need:
        raise FormatError(f"{path}: payload is {len(raw) - offset} bytes, header implies {need - offset}")
    return np.frombuffer(raw, dtype=dtype, count=count, offset=offset)


# -- depth -------------------------------------------------------------------

def depth_bytes(depth: DepthMap) -> bytes:
    h, w = depth.values.shape
    return DEPTH_MAGIC + struct.pack("<2I", w, h) + depth.values.astype("<f4").tobytes()


def write_depth(path, depth: DepthMap) -> None:
    _write_atomic(path, depth_bytes(depth))


def read_depth(path) -> DepthMap:
    raw, (w, h) = _read_header(path, DEPTH_MAGIC, 2)
    vals = _payload(raw, 12, "<f4", w * h, path)
    return DepthMap(vals.reshape(h, w).astype(np.float64))


def read_depth_header(path) -> tuple[int, int]:
    with open(path, "rb") as fh:
        raw = fh.read(12)
    if len(raw) < 12 or raw[:4] != DEPTH_MAGIC:
        raise FormatError(f"{path}: expected RGD1 header")
    return struct.unpack_from("<2I", raw, 4)


# -- segmentation ------------------------------------------------------------

def seg_bytes(seg: SegmentationMap) -> bytes:
    h, w = seg.labels.shape
    return SEG_MAGIC + struct.pack("<2I", w, h) + seg.labels.astype("<u2").tobytes()


def write_seg(path, seg: SegmentationMap) -> None:
    _write_atomic(path, seg_bytes(seg))


def read_seg(path, background_labels=()) -> SegmentationMap:
    raw, (w, h) = _read_header(path, SEG_MAGIC, 2)
    labels = _payload(raw, 12, "<u2", w * h, path)
    return SegmentationMap(labels.reshape(h, w), frozenset(background_labels))


def read_seg_header(path) -> tuple[int, int]:
    with open(path, "rb") as fh:
        raw = fh.read(12)
    if len(raw) < 12 or raw[:4] != SEG_MAGIC:
        raise FormatError(f"{path}: expected RGS1 header")
    return struct.unpack_from("<2I", raw, 4)


# -- features ----------------------------------------------------------------

def features_bytes(grid: FeatureGrid) -> bytes:
    n, ph, pw, d = grid.data.shape
    return FEAT_MAGIC + struct.pack("<4I", n, ph, pw, d) + grid.data.astype("<f4").tobytes()


def write_features(path, grid: FeatureGrid) -> None:
    _write_atomic(path, features_bytes(grid))


def read_features(path) -> FeatureGrid:
    raw, (n, ph, pw, d) = _read_header(path, FEAT_MAGIC, 4)
    data = _payload(raw, 20, "<f4", n * ph * pw * d, path)
    return FeatureGrid(data.reshape(n, ph, pw, d).astype(np.float64))


def read_features_header(path) -> tuple[int, int, int, int]:
    with open(path, "rb") as fh:
        raw = fh.read(20)
    if len(raw) < 20 or raw[:4] != FEAT_MAGIC:
        raise FormatError(f"{path}: expected RGF1 header")
    return struct.unpack_from("<4I", raw, 4)


# -- projector weights -------------------------------------------------------

def weights_bytes(weights) -> bytes:
    rows, cols = weights.matrix.shape
    has_bias = weights.bias is not None
    out = WEIGHTS_MAGIC + struct.pack("<2IB", rows, cols, int(has_bias))
    out += weights.matrix.astype("<f4").tobytes()
    if has_bias:
        out += weights.bias.astype("<f4").tobytes()
    return out


def write_weights(path, weights) -> None:
    _write_atomic(path, weights_bytes(weights))


def read_weights(path):
    from .losses import ProjectorWeights

    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 13 or raw[:4] != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: expected RGW1 header")
    rows, cols, has_bias = struct.unpack_from("<2IB", raw, 4)
    if has_bias not in (0, 1):
        raise FormatError(f"{path}: has_bias flag must be 0 or 1")
    count = rows * cols + (cols if has_bias else 0)
    vals = _payload(raw, 13, "<f4", count, path).astype(np.float64)
    matrix = vals[: rows * cols].reshape(rows, cols)
    bias = vals[rows * cols:] if has_bias else None
    return ProjectorWeights(matrix, bias)


# -- patch masks -------------------------------------------------------------

def mask_bytes(mask) -> bytes:
    n, ph, pw = mask.bits.shape
    packed = np.packbits(mask.bits.astype(np.uint8).ravel(), bitorder="little")
    return MASK_MAGIC + struct.pack("<3I", n, ph, pw) + packed.tobytes()


def write_mask(path, mask) -> None:
    _write_atomic(path, mask_bytes(mask))


def read_mask(path):
    from .masking import PatchMask

    raw, (n, ph, pw) = _read_header(path, MASK_MAGIC, 3)
    count = n * ph * pw
    packed = _payload(raw, 16, "u1", (count + 7) // 8, path)
    bits = np.unpackbits(packed, count=count, bitorder="little")
    if count % 8 and np.unpackbits(packed[-1:], bitorder="little")[count % 8:].any():
        raise FormatError(f"{path}: nonzero padding bits")
    return PatchMask(bits.reshape(n, ph, pw).astype(bool))


# -- scene manifest ----------------------------------------------------------

def manifest_to_dict(manifest: SceneManifest) -> dict:
    frames = []
    for f in manifest.frames:
        i = f.intrinsics
        entry = {
            "frame_id": f.frame_id,
            "intrinsics": {
                "fx": i.fx, "fy": i.fy, "cx": i.cx, "cy": i.cy,
                "width": i.width, "height": i.height,
            },
            "extrinsics": {
                "rotation": f.extrinsics.rotation.tolist(),
                "translation": f.extrinsics.translation.tolist(),
            },
        }
        for ref in ("depth_ref", "seg_ref", "feat2d_ref", "feat3d_ref"):
            entry[ref] = getattr(f, ref)
        frames.append(entry)
    return {
        "frames": frames,
        "patch_size_2d": manifest.patch_size_2d,
        "patch_size_3d": manifest.patch_size_3d,
    }


def manifest_from_dict(doc: dict) -> SceneManifest:
    try:
        frames = []
        for e in doc["frames"]:
            i = e["intrinsics"]
            intr = CameraIntrinsics(
                float(i["fx"]), float(i["fy"]), float(i["cx"]), float(i["cy"]),
                int(i["width"]), int(i["height"]),
            )
            extr = CameraExtrinsics(e["extrinsics"]["rotation"], e["extrinsics"]["translation"])
            frames.append(
                Frame(
                    int(e["frame_id"]), intr, extr,
                    e.get("depth_ref"), e.get("seg_ref"), e.get("feat2d_ref"), e.get("feat3d_ref"),
                )
            )
        return SceneManifest(tuple(frames), int(doc["patch_size_2d"]), int(doc["patch_size_3d"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed scene manifest: {exc!r}") from exc


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def write_json(path, obj) -> None:
    _write_atomic(path, dump_json(obj).encode("utf-8"))


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"missing file {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def write_manifest(path, manifest: SceneManifest) -> None:
    write_json(path, manifest_to_dict(manifest))


def read_manifest(path) -> SceneManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "scene.json"
    return manifest_from_dict(read_json(path))


def depth_name(frame_id: int) -> str:
    return f"{frame_id:04d}.rgd"


def seg_name(frame_id: int) -> str:
    return f"{frame_id:04d}.rgs"
