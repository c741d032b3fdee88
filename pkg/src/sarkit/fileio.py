"""Artifact formats: binary complex arrays, CSV and PGM image exports, JSON lines.

Binary layout (all little-endian)::

    8s   magic  b"SARKBIN\\0"
    u2   version (1)
    u1   element type tag (1 = complex64)
    u1   ndim
    u8   dims[ndim]
    f8   axis_scale   sample rate [Hz] or cell/pixel size [m]
    f8   t0           start time [s]
    u4   metadata length, followed by that many bytes of UTF-8 JSON (sorted keys)
    payload: interleaved float32 real/imag, C order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SARKBIN\0"
VERSION = 1
TYPE_COMPLEX64 = 1


class FormatError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def dumps(record) -> str:
    return json.dumps(_jsonable(record), sort_keys=True, separators=(",", ":"))


def write_array(path, data, axis_scale: float = 0.0, t0: float = 0.0, meta: dict | None = None) -> Path:
    a = np.ascontiguousarray(np.asarray(data), dtype="<c8")
    if a.ndim > 255:
        raise FormatError("too many dimensions")
    blob = dumps(meta or {}).encode()
    head = struct.pack("<8sHBB", MAGIC, VERSION, TYPE_COMPLEX64, a.ndim)
    head += struct.pack(f"<{a.ndim}Q", *a.shape)
    head += struct.pack("<ddI", float(axis_scale), float(t0), len(blob))
    path = Path(path)
    with open(path, "wb") as f:
        f.write(head)
        f.write(blob)
        f.write(a.tobytes())
    return path


def read_array(path):
    """Return ``(array, header)``; the array is complex64."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:8] != MAGIC:
        raise FormatError(f"{path}: not a sarkit binary file")
    version, tag, ndim = struct.unpack_from("<HBB", raw, 8)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if tag != TYPE_COMPLEX64:
        raise FormatError(f"{path}: unsupported element type {tag}")
    off = 12
    dims = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    axis_scale, t0, n_meta = struct.unpack_from("<ddI", raw, off)
    off += 20
    meta = json.loads(raw[off : off + n_meta].decode()) if n_meta else {}
    off += n_meta
    count = int(np.prod(dims)) if dims else 1
    if len(raw) - off != 8 * count:
        raise FormatError(f"{path}: payload holds {len(raw) - off} bytes, header implies {8 * count}")
    a = np.frombuffer(raw, dtype="<c8", count=count, offset=off).reshape(dims)
    return a.astype(np.complex64), {"dims": dims, "axis_scale": axis_scale, "t0": t0, "meta": meta}


def image_db(A, floor_db: float = -300.0) -> np.ndarray:
    mag = np.abs(np.asarray(A))
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        raise ValueError("image is identically zero")
    return np.maximum(20 * np.log10(np.maximum(mag / peak, 1e-300)), floor_db)


def write_csv(path, image) -> Path:
    """Peak-normalised dB magnitude; one row per ground-range sample, first column v [m]."""
    db = image_db(image.A)
    g = image.grid
    u_abs = g.origin @ g.u_axis + g.u
    v_abs = g.origin @ g.v_axis + g.v
    path = Path(path)
    with open(path, "w") as f:
        f.write("v_m/u_m," + ",".join(f"{u:.6f}" for u in u_abs) + "\n")
        for j, v in enumerate(v_abs):
            f.write(f"{v:.6f}," + ",".join(f"{x:.3f}" for x in db[:, j]) + "\n")
    return path


def pgm_levels(db: np.ndarray, dynamic_range: float = 30.0) -> np.ndarray:
    """0 dB maps to 255, -dynamic_range dB and below to 0, linear in between."""
    x = (np.asarray(db, dtype=float) + dynamic_range) / dynamic_range
    return np.round(np.clip(x, 0.0, 1.0) * 255).astype(np.uint8)


def write_pgm(path, image, dynamic_range: float = 30.0) -> Path:
    """8-bit binary PGM; columns are cross-range, far ground range at the top."""
    levels = pgm_levels(image_db(image.A), dynamic_range)[:, ::-1].T
    h, w = levels.shape
    path = Path(path)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(np.ascontiguousarray(levels).tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)


def write_jsonl(path, records) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        for r in records:
            f.write(dumps(r) + "\n")
    return path


def read_jsonl(path) -> list:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
