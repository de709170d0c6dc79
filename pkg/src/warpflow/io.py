"""Files written by a run: diagnostics CSV, field snapshots and checkpoints.

Checkpoint layout (little-endian)::

    b"WFLW" | u32 version | 32-byte grid hash | f64 t | u64 steps | u64 count
    | count x f64 phi (row-major) | b"TRLR" | u64 k | k x f64 monitor state

The trailer carries the running extrema the certified gradient rate depends
on, so a resumed run reproduces the unbroken run's diagnostics.
"""
from __future__ import annotations

import csv
import json
import math
import os
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsRecord
from .errors import InputError

MAGIC = b"WFLW"
TRAILER_MAGIC = b"TRLR"
CHECKPOINT_VERSION = 1
SCHEMA_VERSION = "1.0"
SNAPSHOT_VERSION = 1
TRAILER_KEYS = ("mu_run", "F_sup_run")


class CheckpointError(InputError):
    pass


class SchemaError(InputError):
    pass


@dataclass
class Checkpoint:
    t: float
    steps: int
    phi: np.ndarray
    grid_hash: bytes
    trailer: dict


def write_checkpoint(path, t: float, steps: int, phi: np.ndarray, grid_hash: bytes,
                     trailer: dict | None = None) -> Path:
    path = Path(path)
    if len(grid_hash) != 32:
        raise ValueError("grid hash must be 32 bytes")
    data = np.ascontiguousarray(phi, dtype="<f8").ravel()
    trailer = trailer or {}
    extra = np.array([float(trailer.get(k, math.nan)) for k in TRAILER_KEYS], dtype="<f8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(grid_hash)
        fh.write(struct.pack("<dQQ", float(t), int(steps), data.size))
        fh.write(data.tobytes())
        fh.write(TRAILER_MAGIC)
        fh.write(struct.pack("<Q", extra.size))
        fh.write(extra.tobytes())
    os.replace(tmp, path)
    return path


def read_checkpoint(path, expected_hash: bytes | None = None) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if len(blob) < 4 + 4 + 32 + 24:
        raise CheckpointError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}"
        )
    ghash = blob[8:40]
    t, steps, count = struct.unpack_from("<dQQ", blob, 40)
    off = 64
    end = off + 8 * count
    if len(blob) < end:
        raise CheckpointError(f"{path}: truncated field data")
    phi = np.frombuffer(blob, dtype="<f8", count=count, offset=off).astype(float)
    trailer = {}
    if blob[end : end + 4] == TRAILER_MAGIC:
        (k,) = struct.unpack_from("<Q", blob, end + 4)
        vals = np.frombuffer(blob, dtype="<f8", count=k, offset=end + 12)
        trailer = {key: float(v) for key, v in zip(TRAILER_KEYS, vals)}
    if expected_hash is not None and ghash != expected_hash:
        raise CheckpointError("checkpoint/config mismatch (grid hash differs)")
    return Checkpoint(t, steps, phi, ghash, trailer)


def write_snapshot(path, values: np.ndarray, *, field: str, t: float, preset: str) -> Path:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("snapshot values must be finite")
    header = {
        "format": "warpflow-snapshot",
        "version": SNAPSHOT_VERSION,
        "field": field,
        "t": float(t).hex(),
        "n": values.ndim,
        "dims": list(values.shape),
        "preset": preset,
        "dtype": "<f8",
    }
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    return path


def read_snapshot(path) -> tuple[dict, np.ndarray]:
    blob = Path(path).read_bytes()
    nl = blob.find(b"\n")
    if nl < 0:
        raise InputError(f"{path}: missing snapshot header")
    header = json.loads(blob[:nl])
    if header.get("format") != "warpflow-snapshot":
        raise InputError(f"{path}: not a snapshot file")
    if header.get("version") != SNAPSHOT_VERSION:
        raise InputError(f"{path}: snapshot version {header.get('version')}, expected {SNAPSHOT_VERSION}")
    dims = tuple(header["dims"])
    count = int(np.prod(dims)) if dims else 1
    body = blob[nl + 1 :]
    if len(body) != 8 * count:
        raise InputError(f"{path}: expected {count} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(dims).astype(float)
    header["t"] = float.fromhex(header["t"])
    return header, values


# ---- CSV -----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def csv_columns() -> list[str]:
    return ["schema_version"] + DiagnosticsRecord.columns()


class DiagnosticsWriter:
    """Appends one row per diagnostics sample, flushing after each row."""

    def __init__(self, path, keep_until: float | None = None):
        self.path = Path(path)
        rows = []
        if keep_until is not None and self.path.exists():
            rows = [r for r in read_diagnostics(self.path) if r.t <= keep_until]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(csv_columns())
            for rec in rows:
                writer.writerow(self._cells(rec))

    @staticmethod
    def _cells(rec: DiagnosticsRecord):
        row = rec.as_row()
        return [SCHEMA_VERSION] + [_fmt(row[c]) for c in DiagnosticsRecord.columns()]

    def write(self, rec: DiagnosticsRecord):
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow(self._cells(rec))


def _parse_cell(text: str, typ):
    if typ is bool or typ == "bool":
        return text == "true"
    if typ is int or typ == "int":
        return int(text)
    if typ is str or typ == "str":
        return text
    return float(text)


def read_diagnostics(path) -> list[DiagnosticsRecord]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise SchemaError(f"{path}: empty diagnostics file")
    header = rows[0]
    if not header or header[0] != "schema_version":
        raise SchemaError(f"{path}: missing schema_version column")
    types = {f.name: f.type for f in fields(DiagnosticsRecord)}
    missing = [c for c in DiagnosticsRecord.columns() if c not in header]
    if missing:
        raise SchemaError(f"{path}: schema mismatch, missing columns {missing[:3]}")
    out = []
    major = SCHEMA_VERSION.split(".")[0]
    for no, row in enumerate(rows[1:], 2):
        if row[0].split(".")[0] != major:
            raise SchemaError(f"{path}:{no}: schema version {row[0]}, expected {SCHEMA_VERSION}")
        cells = dict(zip(header, row))
        out.append(DiagnosticsRecord(**{c: _parse_cell(cells[c], types[c]) for c in DiagnosticsRecord.columns()}))
    return out


def write_series(directory, records, names) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in names:
        p = directory / f"series_{name}.dat"
        with open(p, "w") as fh:
            fh.write(f"# t {name}\n")
            for r in records:
                fh.write(f"{_fmt(float(r.t))} {_fmt(float(getattr(r, name)))}\n")
        paths.append(p)
    return paths
