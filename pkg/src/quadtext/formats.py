"""
File formats.

Tensor container (little-endian)::

    offset  size     field
    0       4        magic b"PXAT"
    4       2        version (u16, currently 1)
    6       2        dtype tag (u16, 1 = float32)
    8       4        rank (u32, >= 1)
    12      4*rank   dims (u32 each)
    ...     4*prod   row-major float32 payload

Detections are JSON Lines, one ``{"quad": [8 numbers], "score": s,
"source": "pixel"|"anchor"}`` object per box. Ground truth uses the ICDAR
2015 text layout ``x1,y1,...,x4,y4,transcription`` where ``###`` marks a
DO-NOT-CARE region.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError, ParseError
from .geometry import Quad
from .postprocess import Detection
from .targets import GroundTruth

MAGIC = b"PXAT"
VERSION = 1
DTYPE_FLOAT32 = 1
_HEADER = struct.Struct("<4sHHI")
_MAX_ELEMENTS = 1 << 34


def atomic_write(path, data: bytes | str) -> None:
    """Write ``data`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def tensor_to_bytes(array) -> bytes:
    arr = np.asarray(array)
    if arr.ndim < 1:
        raise FormatError("tensors must have rank >= 1")
    if any(d >= 2**32 for d in arr.shape):
        raise FormatError("tensor dimension does not fit in u32")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = _HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + dims + arr.tobytes(order="C")


def tensor_from_bytes(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise FormatError("truncated tensor header")
    magic, version, dtype, rank = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported tensor version {version}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"unsupported dtype tag {dtype}")
    if rank < 1:
        raise FormatError("tensor rank must be >= 1")
    off = _HEADER.size + 4 * rank
    if len(buf) < off:
        raise FormatError("truncated tensor dims")
    dims = struct.unpack_from(f"<{rank}I", buf, _HEADER.size)
    count = 1
    for d in dims:
        count *= d
        if count > _MAX_ELEMENTS:
            raise FormatError("tensor dims overflow")
    expected = off + 4 * count
    if len(buf) < expected:
        raise FormatError(f"truncated tensor payload: {len(buf) - off} of {4 * count} bytes")
    if len(buf) > expected:
        raise FormatError("trailing bytes after tensor payload")
    return np.frombuffer(buf, dtype="<f4", count=count, offset=off).reshape(dims).copy()


def write_tensor(path, array) -> None:
    atomic_write(path, tensor_to_bytes(array))


def read_tensor(path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())


def detection_to_record(d: Detection) -> dict:
    return {"quad": d.quad.flat(), "score": float(d.score), "source": d.source}


def detections_to_jsonl(dets) -> str:
    return "".join(json.dumps(detection_to_record(d)) + "\n" for d in dets)


def detections_from_jsonl(text: str) -> list[Detection]:
    dets = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            quad = Quad(rec["quad"])
            dets.append(Detection(quad, float(rec["score"]), rec["source"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(str(exc), lineno) from None
    return dets


def write_detections(path, dets) -> None:
    atomic_write(path, detections_to_jsonl(dets))


def read_detections(path) -> list[Detection]:
    return detections_from_jsonl(Path(path).read_text(encoding="utf-8"))


def parse_icdar_gt(text: str, image_size=None) -> GroundTruth:
    quads, care = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip().lstrip("﻿")
        if not line:
            continue
        parts = line.split(",", 8)
        if len(parts) < 8:
            raise ParseError(f"expected 8 coordinates, got {len(parts)} fields", lineno)
        try:
            coords = [float(p) for p in parts[:8]]
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {line!r}", lineno) from None
        label = parts[8].strip() if len(parts) > 8 else ""
        try:
            quads.append(Quad(coords))
        except InvalidInputError as exc:
            raise ParseError(str(exc), lineno) from None
        care.append(label != "###")
    return GroundTruth(tuple(quads), tuple(care), image_size)


def read_icdar_gt(path, image_size=None) -> GroundTruth:
    return parse_icdar_gt(Path(path).read_text(encoding="utf-8-sig"), image_size)


def format_icdar_gt(gt: GroundTruth, labels=None) -> str:
    lines = []
    for i, (q, c) in enumerate(zip(gt.quads, gt.care)):
        text = "###" if not c else (labels[i] if labels else "text")
        lines.append(",".join(f"{v:g}" for v in q.flat()) + f",{text}")
    return "".join(line + "\n" for line in lines)
