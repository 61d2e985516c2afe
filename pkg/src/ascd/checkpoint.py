"""Parameter checkpoint files.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header mapping
each tensor name to ``{"shape", "offset"}`` (offsets are bytes into the
payload), then the raw little-endian float64 payloads back to back.  An
optional ``"__metadata__"`` entry carries free-form JSON.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_LE_F64 = np.dtype("<f8")
META_KEY = "__metadata__"


def save_checkpoint(path, tensors: dict[str, np.ndarray], metadata: dict | None = None):
    header: dict = {}
    chunks = []
    offset = 0
    for name, array in tensors.items():
        if name == META_KEY:
            raise ValueError(f"{META_KEY!r} is reserved")
        raw = np.ascontiguousarray(array, dtype=_LE_F64).tobytes()
        header[name] = {"shape": list(np.shape(array)), "offset": offset}
        chunks.append(raw)
        offset += len(raw)
    if metadata is not None:
        header[META_KEY] = metadata
    blob = json.dumps(header, sort_keys=False).encode("utf-8")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for raw in chunks:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict | None]:
    """Return ``(tensors, metadata)``; arrays are native float64."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ValueError(f"{path}: truncated checkpoint")
    (n,) = struct.unpack("<Q", data[:8])
    header = json.loads(data[8 : 8 + n].decode("utf-8"))
    payload = memoryview(data)[8 + n :]
    metadata = header.pop(META_KEY, None)
    tensors = {}
    for name, entry in header.items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        start = entry["offset"]
        end = start + count * 8
        if end > len(payload):
            raise ValueError(f"{path}: tensor {name!r} runs past end of file")
        array = np.frombuffer(payload[start:end], dtype=_LE_F64).astype(np.float64)
        tensors[name] = array.reshape(shape)
    return tensors, metadata
