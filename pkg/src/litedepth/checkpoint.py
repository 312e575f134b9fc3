"""Named-tensor container: a JSON index followed by raw array payload."""

from __future__ import annotations

import json

import numpy as np

MAGIC = b"LDNT"


def save_arrays(path, arrays: dict[str, np.ndarray]):
    index = []
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        blob = arr.tobytes()
        index.append(
            {"name": name, "offset": offset, "shape": list(arr.shape), "dtype": str(arr.dtype)}
        )
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(index).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a named-tensor container (bad magic {magic!r})")
        (hlen,) = (int.from_bytes(fh.read(8), "little"),)
        index = json.loads(fh.read(hlen).decode())
        payload = fh.read()
    out = {}
    for entry in index:
        arr = np.frombuffer(payload, dtype=np.dtype(entry["dtype"]),
                            count=int(np.prod(entry["shape"])) if entry["shape"] else 1,
                            offset=entry["offset"])
        out[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return out
