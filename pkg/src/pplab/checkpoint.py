"""Binary checkpoint format: magic, version, JSON header, raw blobs.

Layout: b"PPLM" | u32 version | u32 header_len | header JSON (utf-8) |
little-endian tensor blobs in manifest order. Roundtrip is bit-exact.
"""
from __future__ import annotations

import json
import struct

import numpy as np
import torch

from .corpus import Vocabulary
from .model import LMConfig, LMParameters, ModelError

MAGIC = b"PPLM"
VERSION = 1

_DTYPE_TAGS = {torch.float32: "<f4", torch.float64: "<f8"}
_TAG_DTYPES = {"<f4": torch.float32, "<f8": torch.float64}


class CheckpointError(ValueError):
    """Checkpoint I/O failure; .code is one of bad_magic, bad_version,
    truncated, bad_header, shape_mismatch."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def save_checkpoint(params: LMParameters) -> bytes:
    manifest = []
    blobs = []
    for name in params.tensor_names():
        t = params.tensors[name].detach().contiguous()
        tag = _DTYPE_TAGS.get(t.dtype)
        if tag is None:
            raise CheckpointError("bad_header", f"unsupported dtype {t.dtype}")
        manifest.append({"name": name, "shape": list(t.shape), "dtype": tag})
        blobs.append(t.numpy().astype(tag, copy=False).tobytes())
    header = {
        "config": params.config.to_dict(),
        "vocab": list(params.vocab.id_to_token),
        "manifest": manifest,
    }
    hbytes = json.dumps(header).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(hbytes))
    out += hbytes
    for b in blobs:
        out += b
    return bytes(out)


def load_checkpoint(data: bytes) -> LMParameters:
    if len(data) < 12:
        raise CheckpointError("truncated", f"only {len(data)} bytes")
    if data[:4] != MAGIC:
        raise CheckpointError("bad_magic", "not a checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise CheckpointError("bad_version",
                              f"checkpoint version {version}, expected {VERSION}")
    if len(data) < 12 + hlen:
        raise CheckpointError("truncated", "header extends past end of data")
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
        config = LMConfig.from_dict(header["config"])
        vocab = Vocabulary(header["vocab"])
        manifest = header["manifest"]
    except (ValueError, KeyError, TypeError, ModelError) as exc:
        raise CheckpointError("bad_header", f"unreadable header: {exc}") from exc

    tensors: dict[str, torch.Tensor] = {}
    offset = 12 + hlen
    for entry in manifest:
        try:
            name = entry["name"]
            shape = tuple(int(s) for s in entry["shape"])
            np_dtype = np.dtype(entry["dtype"])
            torch_dtype = _TAG_DTYPES[entry["dtype"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError("bad_header", f"bad manifest entry: {exc}") from exc
        nbytes = int(np.prod(shape, dtype=np.int64)) * np_dtype.itemsize
        blob = data[offset:offset + nbytes]
        if len(blob) != nbytes:
            raise CheckpointError("truncated",
                                  f"tensor {name}: expected {nbytes} bytes, "
                                  f"got {len(blob)}")
        arr = np.frombuffer(blob, dtype=np_dtype).reshape(shape).copy()
        tensors[name] = torch.from_numpy(arr).to(torch_dtype)
        offset += nbytes
    if offset != len(data):
        raise CheckpointError("shape_mismatch",
                              f"{len(data) - offset} trailing bytes after blobs")
    try:
        return LMParameters(config, vocab, tensors)
    except ModelError as exc:
        raise CheckpointError("shape_mismatch", str(exc)) from exc


def save_checkpoint_file(params: LMParameters, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_checkpoint(params))


def load_checkpoint_file(path) -> LMParameters:
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read())
