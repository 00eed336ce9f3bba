"""Binary spectral checkpoints.

Layout (little-endian): magic ``b"SQGF"``, format version u32, n u32,
box length f64, then ``n*n`` (re, im) f64 pairs in row-major lattice
order (the FFT-ordered coefficient array, x1 index major).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .spectral import Grid, SpectralField

MAGIC = b"SQGF"
VERSION = 1
_HEADER = struct.Struct("<4sIId")


class CheckpointError(ValueError):
    pass


def to_bytes(field: SpectralField) -> bytes:
    g = field.grid
    header = _HEADER.pack(MAGIC, VERSION, g.n, float(g.box_len))
    body = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes()
    return header + body


def from_bytes(data: bytes) -> SpectralField:
    if len(data) < _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    magic, version, n, box_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    expected = _HEADER.size + 16 * n * n
    if len(data) != expected:
        raise CheckpointError(f"checkpoint size {len(data)} != expected {expected}")
    coeffs = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(n, n)
    return SpectralField(Grid(n, box_len), coeffs.astype(np.complex128))


def save(path: str | Path, field: SpectralField, meta: dict | None = None) -> None:
    """Write the checkpoint; ``meta`` (time, step, ...) goes to a ``.json`` sidecar."""
    path = Path(path)
    path.write_bytes(to_bytes(field))
    if meta is not None:
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load(path: str | Path) -> tuple[SpectralField, dict]:
    path = Path(path)
    field = from_bytes(path.read_bytes())
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return field, meta
