"""Persistence: batch CSV and binary files, JSON reports and provenance records."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from ..distributions import SampleBatch
from ..numerics import context

MAGIC = b"CLWB"
VERSION = 1
HEADER_FIELDS = ("n", "beta", "gamma", "seed", "generator")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "_mpf_"):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def batch_id(batch: SampleBatch) -> str:
    """Content hash of a batch (float view), used in provenance records."""
    fb = batch.as_float()
    h = hashlib.sha256(np.ascontiguousarray(fb.y).tobytes())
    if fb.z is not None:
        h.update(np.ascontiguousarray(fb.z).tobytes())
    return h.hexdigest()[:16]


def provenance(operation: str, source: SampleBatch, output: SampleBatch, parameters: dict, stats: dict | None = None) -> dict:
    return {
        "operation": operation,
        "input_batch": batch_id(source),
        "output_batch": batch_id(output),
        "parameters": parameters,
        "acceptance": stats or {},
    }


def _fmt(v, precise: bool, digits: int) -> str:
    if precise:
        return context(max(64, int(digits * 3.33))).nstr(v, digits, strip_zeros=False)
    return repr(float(v))


def write_batch_csv(batch: SampleBatch, path, seed=None) -> Path:
    """Metadata header row, its values, column names, then one row per sample."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = batch.meta
    precise = batch.fidelity == "precise"
    digits = int(int(meta.get("prec", 53)) * math.log10(2)) + 3
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER_FIELDS + ("fidelity", "prec"))
        w.writerow([meta.get("n", batch.n), meta.get("beta", ""), meta.get("gamma", ""),
                    seed if seed is not None else meta.get("seed", ""), meta.get("generator", ""),
                    batch.fidelity, meta.get("prec", "")])
        cols = [f"y{i + 1}" for i in range(batch.n)] + (["z"] if batch.has_z else [])
        w.writerow(cols)
        for k in range(len(batch)):
            row = [_fmt(v, precise, digits) for v in batch.y[k]]
            if batch.has_z:
                row.append(_fmt(batch.z[k], precise, digits))
            w.writerow(row)
    return path


def read_batch_csv(path) -> SampleBatch:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        keys = next(r)
        vals = next(r)
        cols = next(r)
        rows = list(r)
    meta = {k: v for k, v in zip(keys, vals) if v != ""}
    fidelity = meta.pop("fidelity", "float64")
    for k in ("n", "seed", "prec"):
        if k in meta:
            meta[k] = int(meta[k])
    for k in ("beta", "gamma"):
        if k in meta:
            meta[k] = float(meta[k])
    has_z = cols[-1] == "z"
    if fidelity == "precise":
        ctx = context(int(meta.get("prec", 256)))
        data = np.array([[ctx.mpf(v) for v in row] for row in rows], dtype=object).reshape(len(rows), len(cols))
    else:
        data = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    y = data[:, :-1] if has_z else data
    z = data[:, -1] if has_z else None
    return SampleBatch(y, z, fidelity, meta)


def write_batch_binary(batch: SampleBatch, path) -> Path:
    """``MAGIC | u16 version | u32 meta length | JSON meta | u64 N | u32 n | u8 has_z | float64 data``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fb = batch.as_float()
    meta = json.dumps(_jsonable(fb.meta), sort_keys=True).encode()
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<QIB", len(fb), fb.n, int(fb.has_z)))
        fh.write(np.ascontiguousarray(fb.y, dtype="<f8").tobytes())
        if fb.has_z:
            fh.write(np.ascontiguousarray(fb.z, dtype="<f8").tobytes())
    return path


def read_batch_binary(path) -> SampleBatch:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError("not a batch file")
    version, mlen = struct.unpack_from("<HI", raw, 4)
    if version != VERSION:
        raise ValueError(f"unsupported batch version {version}")
    off = 10
    meta = json.loads(raw[off:off + mlen])
    off += mlen
    count, n, has_z = struct.unpack_from("<QIB", raw, off)
    off += 13
    y = np.frombuffer(raw, dtype="<f8", count=count * n, offset=off).reshape(count, n)
    off += 8 * count * n
    z = np.frombuffer(raw, dtype="<f8", count=count, offset=off) if has_z else None
    return SampleBatch(y, z, "float64", meta)


def write_batch(batch: SampleBatch, path, seed=None) -> Path:
    if str(path).endswith(".csv"):
        return write_batch_csv(batch, path, seed)
    return write_batch_binary(batch, path)


def read_batch(path) -> SampleBatch:
    if str(path).endswith(".csv"):
        return read_batch_csv(path)
    return read_batch_binary(path)
