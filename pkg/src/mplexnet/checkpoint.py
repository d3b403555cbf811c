"""Checkpoint format: JSON manifest plus a little-endian float64 blob.

A checkpoint at ``path`` is stored as two files, ``path.json`` (manifest)
and ``path.bin`` (raw values). The manifest lists every array's name,
shape, and byte offset into the blob, and can carry arbitrary
JSON-serializable extras (normalization statistics, optimizer state
metadata, config hash).
"""

from __future__ import annotations

import json
import os

import numpy as np

FORMAT_TAG = "mplexnet-ckpt-v1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays, extra=None):
    """Write named float64 arrays plus extras; returns the manifest path."""
    entries = []
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        shape = list(np.asarray(arr).shape)  # ascontiguousarray promotes 0-d
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": shape, "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {"format": FORMAT_TAG, "params": entries}
    if extra is not None:
        manifest["extra"] = extra
    with open(path + ".bin", "wb") as f:
        for b in blobs:
            f.write(b)
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return path + ".json"


def load_checkpoint(path):
    """Read a checkpoint; returns (arrays dict, extra dict)."""
    with open(path + ".json", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format") != FORMAT_TAG:
        raise CheckpointError(
            f"unsupported checkpoint format {manifest.get('format')!r} in {path}.json"
        )
    size = os.path.getsize(path + ".bin")
    with open(path + ".bin", "rb") as f:
        blob = f.read()
    arrays = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = entry["offset"] + 8 * count
        if end > size:
            raise CheckpointError(f"blob truncated for parameter '{entry['name']}'")
        arrays[entry["name"]] = np.frombuffer(
            blob, dtype="<f8", count=count, offset=entry["offset"]
        ).reshape(shape).copy()
    return arrays, manifest.get("extra", {})
