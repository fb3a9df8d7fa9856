"""Weight container file.

Layout::

    b"NNW1"
    uint64 LE   manifest length in bytes
    manifest    UTF-8 JSON: {"arrays": [{"name", "shape", "offset"}, ...], "meta": {...}}
    payload     little-endian float64 values, arrays back to back, row-major

``offset`` counts bytes from the start of the payload. Every array is stored
as float64, so integer-valued fields (labels, counts) must fit exactly.
"""

import json
import struct

import numpy as np

from ..errors import ValidationError

MAGIC = b"NNW1"


def dumps_weights(arrays, meta=None):
    manifest = {"arrays": [], "meta": meta or {}}
    chunks = []
    offset = 0
    for name in sorted(arrays):
        a = np.asarray(arrays[name], dtype="<f8")  # tobytes() is row-major; keeps 0-d shapes
        manifest["arrays"].append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    head = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(head)) + head + b"".join(chunks)


def loads_weights(blob):
    if blob[:4] != MAGIC:
        raise ValidationError("not a weight container (bad magic)")
    (size,) = struct.unpack("<Q", blob[4:12])
    manifest = json.loads(blob[12:12 + size].decode("utf-8"))
    payload = memoryview(blob)[12 + size:]
    arrays = {}
    for entry in manifest["arrays"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        a = np.frombuffer(payload[start:start + 8 * count], dtype="<f8").astype(np.float64)
        arrays[entry["name"]] = a.reshape(entry["shape"])
    return arrays, manifest["meta"]


def save_weights(path, arrays, meta=None):
    with open(path, "wb") as fh:
        fh.write(dumps_weights(arrays, meta))


def load_weights(path):
    with open(path, "rb") as fh:
        return loads_weights(fh.read())
