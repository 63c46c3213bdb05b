"""Counter-based random streams.

Every stream is a Philox-4x64 generator keyed by ``(seed, stream_id)``.
Philox output number k is a pure function of the key and k, so a stream's
prefix never depends on how much of it is consumed, and distinct tasks can
be generated in any order or on any thread.

Derivation, for reproducing a single task outside this package::

    stream_id = int.from_bytes(blake2b(f"{label}:{index}".encode(),
                                       digest_size=8).digest(), "little")
    bitgen = numpy.random.Philox(key=[seed, stream_id])

Sequence angles use ``label="angles", index=0`` and map the raw 64-bit
words ``w`` to ``2*pi * (w >> 11) * 2**-53``.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

U64 = 2**64


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream_id(label: str, index: int = 0) -> int:
    digest = hashlib.blake2b(f"{label}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def bit_generator(seed: int, label: str, index: int = 0) -> np.random.Philox:
    key = np.array([check_seed(seed), stream_id(label, index)], dtype=np.uint64)
    return np.random.Philox(key=key)


def generator(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """A numpy Generator on the ``(seed, label, index)`` stream."""
    return np.random.Generator(bit_generator(seed, label, index))


def uniform_words(seed: int, count: int, label: str, index: int = 0) -> np.ndarray:
    """First ``count`` uniforms in [0, 1) of a stream, 53-bit resolution."""
    if count == 0:
        return np.empty(0)
    raw = bit_generator(seed, label, index).random_raw(count)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def uniform_angles(seed: int, count: int) -> np.ndarray:
    return 2.0 * math.pi * uniform_words(seed, count, "angles")
