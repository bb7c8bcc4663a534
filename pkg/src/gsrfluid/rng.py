"""Counter-based random streams.

Every random draw in the solver comes from a Philox generator keyed by the
run seed plus a label path such as ("interior", frame, iteration).  Streams
are independent of execution order, so resuming a run from a snapshot
replays the exact sequence a longer run would have used.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, *path) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path).

    Path elements may be ints or strings; the 128-bit Philox key is a hash
    of the canonical encoding, so any distinct path yields an independent
    stream.
    """
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed).to_bytes(8, "little", signed=True))
    for part in path:
        if isinstance(part, str):
            h.update(b"s" + part.encode("utf-8") + b"\x00")
        else:
            h.update(b"i" + int(part).to_bytes(8, "little", signed=True))
    key = int.from_bytes(h.digest(), "little")
    return np.random.Generator(np.random.Philox(key=key))
