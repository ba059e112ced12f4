"""Versioned binary checkpoint container.

Layout: magic "MMAP1\\n", 8-byte big-endian header length, a UTF-8 JSON
header (config hash, JSON-able metadata such as optimizer scalars and RNG
state, and an array directory), then raw float64 C-order blobs. Save/load
roundtrips are bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"MMAP1\n"


class CheckpointError(ValueError):
    """Raised on malformed or mismatched checkpoint files."""


@dataclass
class Checkpoint:
    config_hash: str
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)


def save_checkpoint(
    path: str | Path,
    arrays: dict[str, np.ndarray],
    config_hash: str,
    meta: dict | None = None,
) -> None:
    directory = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        blob = arr.tobytes()
        directory.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(blob)}
        )
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {"config_hash": config_hash, "meta": meta or {}, "arrays": directory},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "big"))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic, not an MMAP1 checkpoint")
    if len(data) < len(MAGIC) + 8:
        raise CheckpointError(f"{path}: truncated header")
    header_len = int.from_bytes(data[len(MAGIC) : len(MAGIC) + 8], "big")
    header_start = len(MAGIC) + 8
    body_start = header_start + header_len
    if len(data) < body_start:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[header_start:body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from exc
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        lo = body_start + entry["offset"]
        hi = lo + entry["nbytes"]
        if hi > len(data):
            raise CheckpointError(f"{path}: truncated blob for array {entry['name']!r}")
        arr = np.frombuffer(data[lo:hi], dtype=np.float64).reshape(entry["shape"])
        arrays[entry["name"]] = arr.copy()
    return Checkpoint(config_hash=header["config_hash"], arrays=arrays, meta=header["meta"])
