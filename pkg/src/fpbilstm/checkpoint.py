"""Single-file checkpoint container.

Layout: 4-byte magic, one little-endian uint32 format version, one
little-endian uint64 header length, a UTF-8 JSON header, then the raw
tensor payload. Every tensor is stored little-endian float64 at the
offset/shape recorded in the header, so the file is self-describing on
any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"FPBL"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    model_config: dict
    feature_config: dict
    pipeline: dict
    params: dict
    buffers: dict
    optimizer: dict  # {"step": int, "lr": float, "m": {...}, "v": {...}}
    meta: dict


def _tensor_groups(ckpt: Checkpoint):
    yield "param", ckpt.params
    yield "buffer", ckpt.buffers
    yield "opt_m", ckpt.optimizer.get("m", {})
    yield "opt_v", ckpt.optimizer.get("v", {})


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    table = []
    blobs = []
    offset = 0
    for kind, group in _tensor_groups(ckpt):
        for name in sorted(group):
            arr = np.ascontiguousarray(group[name], dtype=_DTYPE)
            table.append(
                {
                    "kind": kind,
                    "name": name,
                    "shape": list(arr.shape),
                    "offset": offset,
                    "nbytes": arr.nbytes,
                }
            )
            blobs.append(arr.tobytes())
            offset += arr.nbytes

    header = {
        "format_version": FORMAT_VERSION,
        "dtype": "<f8",
        "model_config": ckpt.model_config,
        "feature_config": ckpt.feature_config,
        "pipeline": ckpt.pipeline,
        "optimizer": {
            "step": int(ckpt.optimizer.get("step", 0)),
            "lr": float(ckpt.optimizer.get("lr", 0.0)),
        },
        "meta": ckpt.meta,
        "tensors": table,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.array(FORMAT_VERSION, dtype="<u4").tobytes())
        fh.write(np.array(len(header_bytes), dtype="<u8").tobytes())
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (magic {magic!r})")
        version = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
        if version > FORMAT_VERSION:
            raise ValueError(
                f"{path}: checkpoint format version {version} is newer than supported {FORMAT_VERSION}"
            )
        header_len = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()

    groups = {"param": {}, "buffer": {}, "opt_m": {}, "opt_v": {}}
    for entry in header["tensors"]:
        lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
        arr = np.frombuffer(payload[lo:hi], dtype=_DTYPE).reshape(entry["shape"]).copy()
        groups[entry["kind"]][entry["name"]] = arr

    optimizer = dict(header["optimizer"])
    optimizer["m"] = groups["opt_m"]
    optimizer["v"] = groups["opt_v"]
    return Checkpoint(
        model_config=header["model_config"],
        feature_config=header["feature_config"],
        pipeline=header["pipeline"],
        params=groups["param"],
        buffers=groups["buffer"],
        optimizer=optimizer,
        meta=header.get("meta", {}),
    )
