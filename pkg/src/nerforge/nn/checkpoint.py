"""Versioned binary checkpoint container.

Byte layout (all integers little-endian):

    offset 0   8 bytes   magic b"NFCKPT01"
    offset 8   4 bytes   uint32 header length H
    offset 12  H bytes   UTF-8 JSON header
    offset 12+H          parameter payload

The JSON header holds ``format_version``, the tag set, the store's RNG
state, an ordered ``params`` list of {"name", "shape"} records and an
optional ``extra`` dict for sidecar-style metadata.  The payload is the
concatenation of each parameter's float64 row-major values in header order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..corpus import DEFAULT_TAG_SET, TagSet
from .store import ParameterStore

MAGIC = b"NFCKPT01"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(
    path,
    store: ParameterStore,
    tag_set: TagSet = DEFAULT_TAG_SET,
    extra: dict | None = None,
) -> None:
    names = sorted(store.values)
    header = {
        "format_version": FORMAT_VERSION,
        "tag_set": tag_set.to_record(),
        "rng_state": store.rng.bit_generator.state,
        "params": [{"name": n, "shape": list(store.values[n].shape)} for n in names],
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for name in names:
            fh.write(np.ascontiguousarray(store.values[name], dtype="<f8").tobytes())


def load_checkpoint(path, store: ParameterStore | None = None) -> tuple[ParameterStore, dict]:
    """Load a checkpoint, either into ``store`` (shapes must match) or a fresh one."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    (header_len,) = struct.unpack("<I", raw[8:12])
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format_version {header.get('format_version')}")

    offset = 12 + header_len
    loaded: dict[str, np.ndarray] = {}
    for record in header["params"]:
        shape = tuple(record["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise CheckpointError("truncated parameter payload")
        loaded[record["name"]] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end

    if store is None:
        store = ParameterStore(seed=0)
        for name, value in loaded.items():
            store.add(name, value.shape, init="zeros")
            store.values[name][...] = value
    else:
        missing = set(store.values) ^ set(loaded)
        if missing:
            raise CheckpointError(f"parameter name mismatch: {sorted(missing)}")
        for name, value in loaded.items():
            if store.values[name].shape != value.shape:
                raise CheckpointError(
                    f"{name}: checkpoint shape {value.shape} vs store {store.values[name].shape}"
                )
        for name, value in loaded.items():
            store.values[name][...] = value
    store.rng.bit_generator.state = header["rng_state"]
    return store, header
