"""Per-path random streams split from one master seed.

Each (seed, path, purpose) triple keys its own Philox counter stream, so a
path's noise does not depend on how paths are chunked or scheduled.
"""
from enum import IntEnum

import numpy as np

_MASK64 = (1 << 64) - 1


class Stream(IntEnum):
    BROWNIAN = 0
    JUMPS = 1
    MARKS = 2
    REGRESSION = 3
    PROBE = 4


def path_stream(seed: int, path: int, purpose: Stream = Stream.BROWNIAN) -> np.random.Generator:
    """Independent generator for one path and purpose."""
    key = [int(seed) & _MASK64, ((int(path) << 8) | int(purpose)) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))


def aux_stream(seed: int, purpose: Stream, index: int = 0) -> np.random.Generator:
    """Generator for work that is not tied to a path (probes, sampled checks)."""
    return path_stream(seed, (1 << 48) + int(index), purpose)
