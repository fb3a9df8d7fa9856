"""Named seed derivation.

Every random draw in the package comes from ``stream(seed, *names)``: a
Philox generator keyed by a hash of the run seed and a path of names such
as ``("selfsup", "encoder", 3)``. Different units therefore never share a
stream and can run in any order without changing results.
"""

import hashlib

import numpy as np


def derive_seed(seed, *names):
    """64-bit integer derived from ``seed`` and a tuple of names."""
    text = "/".join([str(int(seed))] + [str(n) for n in names])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed, *names):
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *names)))
