"""RAM trace and annotation-map file formats."""

from __future__ import annotations

import struct

import numpy as np

from .env import AnnotationMap
from .games import RAM_SIZE

TRACE_MAGIC = b"DFTR"
TRACE_VERSION = 1


class TraceFormatError(ValueError):
    pass


def encode_trace(trace: np.ndarray) -> bytes:
    trace = np.asarray(trace)
    if trace.ndim != 2 or trace.shape[1] != RAM_SIZE:
        raise ValueError(f"trace must be (T, {RAM_SIZE}), got {trace.shape}")
    if trace.dtype != np.uint8:
        raise ValueError("trace must hold uint8 bytes")
    return TRACE_MAGIC + struct.pack("<HIH", TRACE_VERSION, trace.shape[0], RAM_SIZE) + trace.tobytes()


def decode_trace(data: bytes) -> np.ndarray:
    if data[:4] != TRACE_MAGIC:
        raise TraceFormatError("bad magic: not a RAM trace")
    if len(data) < 12:
        raise TraceFormatError("truncated trace header")
    version, rows, cols = struct.unpack_from("<HIH", data, 4)
    if version != TRACE_VERSION:
        raise TraceFormatError(f"unsupported trace version {version}")
    if cols != RAM_SIZE:
        raise TraceFormatError(f"trace width {cols} != {RAM_SIZE}")
    if len(data) != 12 + rows * cols:
        raise TraceFormatError(f"trace payload holds {len(data) - 12} bytes, expected {rows * cols}")
    return np.frombuffer(data, dtype=np.uint8, offset=12).reshape(rows, cols).copy()


def save_trace(trace: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_trace(trace))


def load_trace(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_trace(fh.read())


def parse_annotation(text: str) -> AnnotationMap:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {line!r}")
        pairs.append((int(fields[0]), int(fields[1])))
    return AnnotationMap(pairs)


def format_annotation(annotation: AnnotationMap, comment: str | None = None) -> str:
    lines = [f"# {comment}"] if comment else []
    lines += [f"{i} {j}" for i, j in annotation.swap_pairs]
    return "\n".join(lines) + "\n"


def load_annotation(path) -> AnnotationMap:
    with open(path) as fh:
        return parse_annotation(fh.read())


def save_annotation(annotation: AnnotationMap, path, comment: str | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(format_annotation(annotation, comment))
