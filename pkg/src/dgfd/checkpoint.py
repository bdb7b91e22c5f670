"""Binary checkpoint container: magic, version, JSON manifest, raw f32 payload.

Layout: b"DGFD" | u32 LE version | u32 LE header length | header JSON |
payload. The manifest lists every tensor (name, dtype, shape, offset,
length) in payload order; offsets are ascending, contiguous, and
non-overlapping, so a round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .network import DGFDNet, ModelConfig, build

MAGIC = b"DGFD"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


class CheckpointMagicError(CheckpointError):
    """File does not start with the expected magic or version."""


class CheckpointTruncatedError(CheckpointError):
    """File ends before the declared header or payload does."""


class CheckpointIntegrityError(CheckpointError):
    """Manifest disagrees with the payload or the declared architecture."""


def _state_entries(net: DGFDNet):
    for name, p in net.named_params():
        yield name, p.data
    for name, buf in net.named_buffers():
        yield name, buf


def save_checkpoint(net: DGFDNet, path, training_step: int = 0) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in _state_entries(net):
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({
            "name": name,
            "dtype": "f32",
            "shape": list(arr.shape),
            "offset": offset,
            "length": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({
        "config": net.config.to_dict(),
        "training_step": int(training_step),
        "tensors": entries,
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_manifest(path) -> dict:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointMagicError(f"bad magic in {path}")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != VERSION:
        raise CheckpointMagicError(f"unsupported checkpoint version {version}")
    header_len = struct.unpack("<I", blob[8:12])[0]
    if len(blob) < 12 + header_len:
        raise CheckpointTruncatedError(f"header truncated in {path}")
    try:
        header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointIntegrityError(f"unparseable manifest in {path}: {exc}") from exc
    header["_payload"] = blob[12 + header_len :]
    return header


def load_checkpoint(path) -> DGFDNet:
    header = load_manifest(path)
    payload = header.pop("_payload")
    entries = header["tensors"]

    expected = 0
    for e in entries:
        if e["dtype"] != "f32":
            raise CheckpointIntegrityError(f"unsupported tensor dtype {e['dtype']!r}")
        if e["offset"] != expected:
            raise CheckpointIntegrityError(
                f"tensor {e['name']!r} offset {e['offset']} breaks the ascending "
                f"non-overlapping layout (expected {expected})"
            )
        size = int(np.prod(e["shape"], dtype=np.int64)) * 4 if e["shape"] else 4
        if size != e["length"]:
            raise CheckpointIntegrityError(
                f"tensor {e['name']!r} length {e['length']} does not match shape {e['shape']}"
            )
        expected += e["length"]
    if len(payload) < expected:
        raise CheckpointTruncatedError(
            f"payload holds {len(payload)} bytes, manifest expects {expected}"
        )
    if len(payload) != expected:
        raise CheckpointIntegrityError(
            f"payload length {len(payload)} disagrees with manifest total {expected}"
        )

    config = ModelConfig.from_dict(header["config"])
    net = build(config, seed=0)
    state = dict(_state_entries(net))
    manifest_names = [e["name"] for e in entries]
    if set(manifest_names) != set(state):
        missing = sorted(set(state) - set(manifest_names))
        extra = sorted(set(manifest_names) - set(state))
        raise CheckpointIntegrityError(
            f"manifest/model tensor mismatch (missing {missing[:3]}, extra {extra[:3]})"
        )
    for e in entries:
        arr = np.frombuffer(payload, dtype="<f4", count=e["length"] // 4,
                            offset=e["offset"]).reshape(e["shape"])
        target = state[e["name"]]
        if tuple(target.shape) != tuple(e["shape"]):
            raise CheckpointIntegrityError(
                f"tensor {e['name']!r} shape {e['shape']} does not match model {target.shape}"
            )
        target[...] = arr
    return net
