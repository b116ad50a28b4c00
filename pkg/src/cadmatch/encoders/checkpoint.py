"""Self-describing weight checkpoints.

Layout (little-endian):
    bytes 0-3   magic b"CMW1"
    bytes 4-7   uint32 header length H
    bytes 8-..  H bytes of UTF-8 JSON: {"format", "arch", "tensors"}
                where tensors is an ordered list of {"name", "shape"}
    then        float32 payload for each tensor, in header order

Tensors are written sorted by name, so the same weights always produce the
same bytes.
"""

import json

import numpy as np

from ..errors import ValidationError
from .network import ArchConfig, JointModel

MAGIC = b"CMW1"

__all__ = ["save_checkpoint", "load_checkpoint"]


def save_checkpoint(model, path, extra=None):
    """Write a model's architecture and weights; ``extra`` is a JSON-able
    dict stored verbatim in the header (e.g. a training report)."""
    state = model.state()
    names = sorted(state)
    header = {
        "format": 1,
        "arch": model.arch.to_dict(),
        "tensors": [{"name": n, "shape": list(state[n].shape)} for n in names],
    }
    if extra is not None:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.array([len(blob)], dtype="<u4").tobytes())
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(state[name], dtype="<f4").tobytes())


def load_checkpoint(path):
    """Rebuild the model stored at ``path``; returns (model, header dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValidationError(f"{path}: bad magic, not a weights checkpoint")
    (hlen,) = np.frombuffer(raw[4:8], dtype="<u4")
    try:
        header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: corrupt checkpoint header: {exc}") from None
    offset = 8 + int(hlen)
    state = {}
    for spec in header["tensors"]:
        count = int(np.prod(spec["shape"], dtype=np.int64)) if spec["shape"] else 1
        end = offset + 4 * count
        if end > len(raw):
            raise ValidationError(f"{path}: truncated tensor payload at {spec['name']}")
        state[spec["name"]] = np.frombuffer(raw[offset:end], dtype="<f4").reshape(
            spec["shape"]
        )
        offset = end
    if offset != len(raw):
        raise ValidationError(f"{path}: {len(raw) - offset} trailing bytes")
    model = JointModel(ArchConfig.from_dict(header["arch"]), seed=0)
    model.load_state(state)
    return model, header
