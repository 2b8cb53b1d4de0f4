"""Binary checkpoint container.

Layout (all integers little-endian uint32):

    bytes 0-3    magic "P2SC"
    bytes 4-7    format version (currently 1)
    bytes 8-11   header length in bytes
    header       UTF-8 JSON: {"config": ModelConfig dict,
                              "tensors": [{"name", "shape", "offset"}...],
                              "provenance": {"seed", "fold", "best_val_dice",
                                             "class_names", ...}}
    payload      concatenated little-endian float32 blobs in descriptor
                 order; offsets count float32 elements and must tile the
                 payload exactly, batch-norm running stats included.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .model import DoodleSegNet, ModelConfig

MAGIC = b"P2SC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _header_and_payload(model: DoodleSegNet, provenance: dict) -> tuple[dict, bytes]:
    descriptors = []
    blobs = []
    offset = 0
    for name, arr in model.state().items():
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        descriptors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr32.tobytes())
        offset += arr32.size
    header = {"config": model.cfg.to_dict(), "tensors": descriptors,
              "provenance": provenance}
    return header, b"".join(blobs)


def save_checkpoint(model: DoodleSegNet, path, provenance: dict | None = None) -> None:
    header, payload = _header_and_payload(model, provenance or {})
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with io.BytesIO() as buf:
        buf.write(MAGIC)
        buf.write(struct.pack("<II", VERSION, len(blob)))
        buf.write(blob)
        buf.write(payload)
        data = buf.getvalue()
    Path(path).write_bytes(data)


def read_header(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:4]!r}")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    header["_payload_start"] = 12 + header_len
    header["_total_size"] = len(raw)
    return header


def load_checkpoint(path) -> tuple[DoodleSegNet, dict]:
    """Rebuild the model from the stored config and tensors; validates that
    the descriptors tile the payload exactly."""
    raw = Path(path).read_bytes()
    header = read_header(path)
    start = header.pop("_payload_start")
    header.pop("_total_size")
    payload = raw[start:]
    if len(payload) % 4:
        raise CheckpointError(f"{path}: payload is not float32-aligned")
    n_floats = len(payload) // 4

    offset = 0
    state: dict[str, np.ndarray] = {}
    for desc in header["tensors"]:
        if desc["offset"] != offset:
            raise CheckpointError(
                f"{path}: tensor {desc['name']} offset {desc['offset']} != {offset} "
                "(descriptors must tile the payload with no gaps)")
        size = int(np.prod(desc["shape"], dtype=np.int64)) if desc["shape"] else 1
        if (offset + size) > n_floats:
            raise CheckpointError(
                f"{path}: tensor {desc['name']} overruns the payload "
                f"({offset + size} > {n_floats} floats)")
        arr = np.frombuffer(payload, dtype="<f4", count=size, offset=offset * 4)
        state[desc["name"]] = arr.reshape(desc["shape"]).copy()
        offset += size
    if offset != n_floats:
        raise CheckpointError(
            f"{path}: payload holds {n_floats} floats, descriptors cover {offset}")

    cfg = ModelConfig.from_dict(header["config"])
    model = DoodleSegNet(cfg, seed=0)
    model.load_state(state)
    return model, header
