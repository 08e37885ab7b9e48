"""Versioned binary checkpoints: magic, format version, config hash, named blobs.

Layout: magic (4 bytes) | version (u32 LE) | config sha256 (32 bytes) |
header length (u64 LE) | header JSON | raw tensor data. Round-trips are
bit-exact; writes are atomic (temp file + rename).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import torch

from ..errors import CheckpointError

MAGIC = b"LMCP"
FORMAT_VERSION = 1

_DTYPES = {
    "float32": np.float32,
    "float64": np.float64,
    "int64": np.int64,
    "int32": np.int32,
    "uint8": np.uint8,
}


def _canonical(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _canonical(dataclasses.asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def config_hash(config: Any) -> str:
    """Hex sha256 of the canonical JSON encoding of a config."""
    payload = json.dumps(_canonical(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class Checkpoint:
    tensors: dict[str, torch.Tensor]
    config_hash: str
    meta: dict[str, Any]


def save_checkpoint(
    path: str | Path,
    tensors: Mapping[str, torch.Tensor],
    config: Any,
    meta: Mapping[str, Any] | None = None,
) -> None:
    path = Path(path)
    entries = []
    blobs = []
    offset = 0
    for name, t in tensors.items():
        arr = t.detach().cpu().contiguous().numpy()
        if str(arr.dtype) not in _DTYPES:
            raise CheckpointError(f"unsupported tensor dtype {arr.dtype} for {name!r}")
        raw = arr.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": str(arr.dtype),
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": entries, "meta": _canonical(dict(meta or {}))}).encode("utf-8")
    chash = bytes.fromhex(config_hash(config))

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(chash)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for raw in blobs:
            f.write(raw)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path, expected_config: Any | None = None) -> Checkpoint:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        chash = f.read(32).hex()
        (header_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(header_len).decode("utf-8"))
        data = f.read()

    if expected_config is not None and config_hash(expected_config) != chash:
        raise CheckpointError(f"{path}: checkpoint config hash does not match the given config")

    tensors: dict[str, torch.Tensor] = {}
    for e in header["tensors"]:
        raw = data[e["offset"] : e["offset"] + e["nbytes"]]
        arr = np.frombuffer(raw, dtype=_DTYPES[e["dtype"]]).reshape(e["shape"]).copy()
        tensors[e["name"]] = torch.from_numpy(arr)
    return Checkpoint(tensors=tensors, config_hash=chash, meta=header.get("meta", {}))


def module_tensors(module: torch.nn.Module) -> dict[str, torch.Tensor]:
    """Named parameters and buffers of a module, for checkpointing."""
    out = {n: p for n, p in module.named_parameters()}
    out.update({n: b for n, b in module.named_buffers()})
    return out


def load_into_module(module: torch.nn.Module, tensors: Mapping[str, torch.Tensor], prefix: str = "") -> None:
    own = module_tensors(module)
    for name, dst in own.items():
        key = prefix + name
        if key not in tensors:
            raise CheckpointError(f"checkpoint is missing tensor {key!r}")
        src = tensors[key]
        if tuple(src.shape) != tuple(dst.shape):
            raise CheckpointError(
                f"shape mismatch for {key!r}: checkpoint {tuple(src.shape)} vs model {tuple(dst.shape)}"
            )
        with torch.no_grad():
            dst.copy_(src.to(dst.dtype))


def tensors_digest(tensors: Mapping[str, torch.Tensor]) -> str:
    """Order-independent sha256 over named tensor bytes (freeze verification)."""
    h = hashlib.sha256()
    for name in sorted(tensors):
        h.update(name.encode("utf-8"))
        h.update(tensors[name].detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
