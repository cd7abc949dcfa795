"""Seeded counter-based random streams.

All randomness in the package is drawn from Philox generators keyed by a
tuple ``(seed, stream, *counters)``.  A given tuple always yields the same
stream, so results do not depend on the order in which work is scheduled.
"""

import zlib

import numpy as np

STREAMS = {}


def _tag(name):
    if name not in STREAMS:
        STREAMS[name] = zlib.crc32(name.encode())
    return STREAMS[name]


def stream(seed, name, *counters):
    """Generator for the named stream at the given counters."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _tag(name), *map(int, counters)])
    return np.random.Generator(np.random.Philox(ss))
