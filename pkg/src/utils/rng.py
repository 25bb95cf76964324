"""
Reproducible random streams.

Every stream is a Philox (counter-based) generator keyed by a seed and a
stream path, e.g. (seed, replica) or (seed, replica, 'mask'). Streams with
different paths are statistically independent and do not depend on how many
other streams exist, so replicas can be batched or run in parallel freely.
"""

import zlib
from typing import Union

import numpy as np

StreamKey = Union[int, str]


def _key_part(part: StreamKey) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode('utf-8'))
    return int(part)


def make_rng(seed: int, *stream: StreamKey) -> np.random.Generator:
    """
    Create the generator for (seed, *stream).

    Args:
        seed: Experiment seed
        stream: Stream path (replica index, purpose tag, ...)

    Returns:
        numpy Generator backed by Philox
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_part(p) for p in stream))
    return np.random.Generator(np.random.Philox(seq))
