"""Deterministic seed derivation.

Every stochastic task draws from a stream keyed by the master seed plus the
task's identity, never by execution order, so serial and threaded runs agree.
"""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def derive_seed(master, *keys):
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(master, *keys):
    return np.random.default_rng(derive_seed(master, *keys))
