"""Tensor archive format shared by checkpoints and demo datasets.

An archive is a directory holding one packed blob of little-endian float32
values (row-major) plus a manifest.json whose "tensors" list carries
{name, shape, offset} entries (offset in bytes into the blob). Arbitrary
JSON metadata rides along under "meta".
"""

from __future__ import annotations

import json
import os
from typing import Mapping

import numpy as np

BLOB_NAME = "tensors.bin"
MANIFEST_NAME = "manifest.json"


def save_archive(path: str, tensors: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    os.makedirs(path, exist_ok=True)
    entries = []
    offset = 0
    with open(os.path.join(path, BLOB_NAME), "wb") as blob:
        for name in tensors:
            arr = np.ascontiguousarray(np.asarray(tensors[name], dtype="<f4"))
            entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
            blob.write(arr.tobytes())
            offset += arr.nbytes
    manifest = {"tensors": entries, "meta": meta or {}}
    with open(os.path.join(path, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_archive(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(os.path.join(path, MANIFEST_NAME)) as fh:
        manifest = json.load(fh)
    with open(os.path.join(path, BLOB_NAME), "rb") as fh:
        raw = fh.read()
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=entry["offset"])
        tensors[entry["name"]] = arr.reshape(shape).copy()
    return tensors, manifest.get("meta", {})
