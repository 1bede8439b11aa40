"""Versioned binary checkpoints.

Layout (all integers little-endian):
  magic b"SDCK", u32 version,
  u32 epoch,
  u32 config-hash length, hash bytes (utf-8 hex digest),
  u32 extra-json length, json bytes (optimizer moments, rng state, ...),
  u32 tensor count, then per tensor:
    u32 name length, name bytes,
    u32 ndim, u64 dims...,
    float64 data, little-endian, C order.

Round trips are bit exact so training can resume mid-run.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SDCK"
VERSION = 1


@dataclass
class Checkpoint:
    epoch: int
    weights: dict[str, np.ndarray]
    config_hash: str
    extra: dict = field(default_factory=dict)


def _write_tensor(fh, name: str, arr: np.ndarray):
    nb = name.encode()
    fh.write(struct.pack("<I", len(nb)))
    fh.write(nb)
    arr = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<I", arr.ndim))
    for d in arr.shape:
        fh.write(struct.pack("<Q", d))
    fh.write(arr.tobytes())


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError("truncated checkpoint")
    return data


def _read_tensor(fh) -> tuple[str, np.ndarray]:
    (nlen,) = struct.unpack("<I", _read_exact(fh, 4))
    name = _read_exact(fh, nlen).decode()
    (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
    shape = tuple(struct.unpack("<Q", _read_exact(fh, 8))[0]
                  for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").reshape(shape)
    return name, arr.astype(float)


def save_checkpoint(path, ckpt: Checkpoint):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<I", ckpt.epoch))
    hb = ckpt.config_hash.encode()
    buf.write(struct.pack("<I", len(hb)))
    buf.write(hb)
    eb = json.dumps(ckpt.extra, sort_keys=True).encode()
    buf.write(struct.pack("<I", len(eb)))
    buf.write(eb)
    buf.write(struct.pack("<I", len(ckpt.weights)))
    for name in sorted(ckpt.weights):
        _write_tensor(buf, name, ckpt.weights[name])
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise ValueError("not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (epoch,) = struct.unpack("<I", _read_exact(fh, 4))
        (hlen,) = struct.unpack("<I", _read_exact(fh, 4))
        chash = _read_exact(fh, hlen).decode()
        (elen,) = struct.unpack("<I", _read_exact(fh, 4))
        extra = json.loads(_read_exact(fh, elen).decode())
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        weights = dict(_read_tensor(fh) for _ in range(count))
    return Checkpoint(epoch=epoch, weights=weights, config_hash=chash,
                      extra=extra)
