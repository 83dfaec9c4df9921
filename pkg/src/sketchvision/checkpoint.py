"""Checkpoint archive format shared by the generator and the field.

A checkpoint is a zip archive with two members:
  meta.json   -- kind, config hash, step/epoch, extra state, and a
                 manifest of (name, shape, offset) into params.bin
  params.bin  -- concatenated raw little-endian float32 blocks
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile

import numpy as np
import torch


def config_hash(config) -> str:
    import dataclasses

    blob = json.dumps(dataclasses.asdict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_archive(path, kind: str, tensors: dict[str, torch.Tensor],
                 meta: dict) -> None:
    manifest = []
    blob = io.BytesIO()
    offset = 0
    for name, t in tensors.items():
        arr = t.detach().cpu().numpy().astype("<f4", copy=False)
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        raw = arr.tobytes()
        blob.write(raw)
        offset += len(raw)
    full_meta = {"kind": kind, "manifest": manifest, **meta}
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("meta.json", json.dumps(full_meta))
        zf.writestr("params.bin", blob.getvalue())


def load_archive(path, expected_kind: str | None = None):
    with zipfile.ZipFile(path, "r") as zf:
        meta = json.loads(zf.read("meta.json"))
        raw = zf.read("params.bin")
    if expected_kind is not None and meta.get("kind") != expected_kind:
        raise ValueError(f"checkpoint kind {meta.get('kind')!r}, expected {expected_kind!r}")
    tensors = {}
    for entry in meta["manifest"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=entry["offset"])
        tensors[entry["name"]] = torch.from_numpy(arr.copy().reshape(shape))
    return meta, tensors
