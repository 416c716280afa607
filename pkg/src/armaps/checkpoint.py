"""Versioned binary weight checkpoints.

Layout (all integers little-endian)::

    8 bytes   magic b"ARMCKPT\\0"
    uint32    format version (1)
    32 bytes  SHA-256 of the canonical network-spec JSON
    uint32    header length, then that many bytes of UTF-8 JSON
              {"spec", "input_mean", "class_names", "arrays": [[layer, name, shape], ...]}
    float64   the arrays listed in the header, in layer order, row-major
"""
from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .errors import CheckpointError
from .network import Model, NetworkSpec
from .numerics import ConvParams, DenseParams

MAGIC = b"ARMCKPT\x00"
VERSION = 1


def _arrays(model: Model):
    for i, p in enumerate(model.params):
        if isinstance(p, ConvParams):
            yield i, "kernel", p.kernel
            yield i, "bias", p.bias
        elif isinstance(p, DenseParams):
            yield i, "weight", p.weight
            yield i, "bias", p.bias


def dumps(model: Model) -> bytes:
    arrays = list(_arrays(model))
    header = {
        "spec": model.spec.to_dict(),
        "input_mean": model.input_mean,
        "class_names": list(model.class_names),
        "arrays": [[i, name, list(a.shape)] for i, name, a in arrays],
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), bytes.fromhex(model.spec.spec_hash()), struct.pack("<I", len(hb)), hb]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, _, a in arrays]
    return b"".join(parts)


def save(model: Model, path):
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def loads(blob: bytes, expect_spec: NetworkSpec | None = None) -> Model:
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    digest = blob[12:44].hex()
    (hlen,) = struct.unpack_from("<I", blob, 44)
    header = json.loads(blob[48 : 48 + hlen].decode("utf-8"))
    spec = NetworkSpec.from_dict(header["spec"])
    if spec.spec_hash() != digest:
        raise CheckpointError("spec hash does not match the embedded spec")
    if expect_spec is not None and expect_spec.spec_hash() != digest:
        raise CheckpointError("checkpoint was written for a different network spec")
    pos = 48 + hlen
    found = {}
    for i, name, shape in header["arrays"]:
        n = int(np.prod(shape))
        if pos + 8 * n > len(blob):
            raise CheckpointError("checkpoint is truncated")
        found[(i, name)] = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
    if pos != len(blob):
        raise CheckpointError("trailing bytes after the last array")
    params = []
    for i, l in enumerate(spec.layers):
        if l.kind == "conv":
            params.append(ConvParams(found[(i, "kernel")], found[(i, "bias")], l.stride, l.padding))
        elif l.kind == "dense":
            params.append(DenseParams(found[(i, "weight")], found[(i, "bias")]))
        else:
            params.append(None)
    return Model(spec, params, float(header["input_mean"]), list(header["class_names"]))


def load(path, expect_spec: NetworkSpec | None = None) -> Model:
    with open(path, "rb") as fh:
        return loads(fh.read(), expect_spec)


def file_hash(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
