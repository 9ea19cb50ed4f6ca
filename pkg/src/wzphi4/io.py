"""Artifact formats: flat binary fields, deterministic JSON and CSV, gnuplot data."""
from __future__ import annotations

import json
import struct
from fractions import Fraction
from pathlib import Path

import numpy as np

FIELD_MAGIC = b"WZFIELD\0"
FIELD_VERSION = 1
JSON_FORMAT = "wzphi4-report-v1"


def write_field(path, values: np.ndarray, spacings=(), meta=None) -> None:
    """Header: magic, version, ndim, dims, spacings, meta JSON; payload: row-major float64 (little endian)."""
    values = np.ascontiguousarray(values, dtype="<f8")
    sp = list(spacings) + [0.0] * (values.ndim - len(spacings))
    meta_b = json.dumps(meta or {}, sort_keys=True, default=_default).encode()
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<II", FIELD_VERSION, values.ndim))
        fh.write(struct.pack(f"<{values.ndim}Q", *values.shape))
        fh.write(struct.pack(f"<{values.ndim}d", *sp))
        fh.write(struct.pack("<Q", len(meta_b)))
        fh.write(meta_b)
        fh.write(values.tobytes())


def read_field(path) -> tuple:
    with open(path, "rb") as fh:
        if fh.read(8) != FIELD_MAGIC:
            raise ValueError(f"{path}: not a field file")
        version, ndim = struct.unpack("<II", fh.read(8))
        if version != FIELD_VERSION:
            raise ValueError(f"{path}: unsupported field version {version}")
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        spacings = struct.unpack(f"<{ndim}d", fh.read(8 * ndim))
        (n_meta,) = struct.unpack("<Q", fh.read(8))
        meta = json.loads(fh.read(n_meta).decode())
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(shape)
    return data.copy(), {"version": version, "spacings": list(spacings), "meta": meta}


def _default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats (invalid JSON) with strings, recursively."""
    if isinstance(o, float) and not np.isfinite(o):
        return str(o)
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dumps_json(obj) -> str:
    obj = json.loads(json.dumps(obj, default=_default))
    return json.dumps(_clean({"format": JSON_FORMAT, **obj}), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def write_text(path, text: str) -> None:
    Path(path).write_text(text)


def write_plot_data(path, x, y, title: str = "") -> None:
    """Two whitespace-separated columns, '#' header; readable by gnuplot."""
    lines = [f"# {title}"] if title else []
    lines += [f"{float(a)!r} {float(b)!r}" for a, b in zip(x, y)]
    Path(path).write_text("\n".join(lines) + "\n")
