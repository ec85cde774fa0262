"""On-disk formats: binary tensor container, state snapshots, run manifest.

The tensor container is one UTF-8 JSON header (per-tensor dtype, shape,
byte offset, plus a checksum of the data segment) followed by contiguous
little-endian IEEE-754 data. Snapshots embed a JSON metadata document and
a tensor container; integrity is a SHA-256 checksum verified on restore.
All writes are atomic (write-temp-then-rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptSnapshot

MAGIC = b"ACDCTNSR"
SNAP_MAGIC = b"ACDCSNAP"
FORMAT_VERSION = 1


def pack_tensors(tensors: dict[str, np.ndarray], dtype: str = "<f8") -> bytes:
    """Serialize named arrays into the container format."""
    header: dict = {"version": FORMAT_VERSION, "tensors": {}}
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes()
        header["tensors"][name] = {
            "dtype": dtype, "shape": list(arr.shape), "offset": offset,
            "nbytes": len(data),
        }
        blobs.append(data)
        offset += len(data)
    payload = b"".join(blobs)
    header["checksum"] = hashlib.sha256(payload).hexdigest()
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + payload


def unpack_tensors(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < len(MAGIC) + 8 or blob[:len(MAGIC)] != MAGIC:
        raise CorruptSnapshot("bad tensor container magic")
    (header_len,) = struct.unpack_from("<Q", blob, len(MAGIC))
    header_start = len(MAGIC) + 8
    try:
        header = json.loads(blob[header_start:header_start + header_len])
    except ValueError as exc:
        raise CorruptSnapshot(f"unreadable tensor header: {exc}")
    payload = blob[header_start + header_len:]
    if hashlib.sha256(payload).hexdigest() != header.get("checksum"):
        raise CorruptSnapshot("tensor data checksum mismatch")
    out = {}
    for name, meta in header["tensors"].items():
        start, nbytes = meta["offset"], meta["nbytes"]
        arr = np.frombuffer(payload[start:start + nbytes],
                            dtype=np.dtype(meta["dtype"]))
        out[name] = arr.reshape(meta["shape"]).copy()
    return out


def pack_snapshot(meta: dict, tensors: dict[str, np.ndarray]) -> bytes:
    """Bundle JSON metadata with a tensor container; self-checking."""
    tensor_blob = pack_tensors(tensors)
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    body = (struct.pack("<Q", len(meta_bytes)) + meta_bytes + tensor_blob)
    digest = hashlib.sha256(body).digest()
    return SNAP_MAGIC + digest + body


def unpack_snapshot(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if len(blob) < len(SNAP_MAGIC) + 32 or blob[:len(SNAP_MAGIC)] != SNAP_MAGIC:
        raise CorruptSnapshot("bad snapshot magic")
    digest = blob[len(SNAP_MAGIC):len(SNAP_MAGIC) + 32]
    body = blob[len(SNAP_MAGIC) + 32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptSnapshot("snapshot checksum mismatch")
    (meta_len,) = struct.unpack_from("<Q", body, 0)
    try:
        meta = json.loads(body[8:8 + meta_len])
    except ValueError as exc:
        raise CorruptSnapshot(f"unreadable snapshot metadata: {exc}")
    tensors = unpack_tensors(body[8 + meta_len:])
    return meta, tensors


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_manifest(path: str | Path, manifest: dict) -> None:
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CorruptSnapshot(f"cannot read manifest {path}: {exc}")
