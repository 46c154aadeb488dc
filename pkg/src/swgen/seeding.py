"""Seed derivation and keyed hashing.

Every experiment carries one 64-bit master seed.  Components get their own
sub-seed by hashing the master seed together with a label path::

    derive_seed(master, "tower", "S")  ->  blake2b-64(master || "tower/S")

so adding a component never perturbs the streams of existing ones.  Random
functions on huge domains (painting data, marker predicates) are realized
as keyed hashes rather than stored tables.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master: int, *labels) -> int:
    """Return the 64-bit sub-seed for ``labels`` under ``master``."""
    path = "/".join(str(lab) for lab in labels).encode()
    h = hashlib.blake2b(struct.pack("<Q", master & MASK64) + path, digest_size=8)
    return int.from_bytes(h.digest(), "little")


def hash_bits(seed: int, data: bytes, nbits: int) -> int:
    """Keyed hash of ``data`` to a uniformly distributed ``nbits``-bit integer."""
    nbytes = (nbits + 7) // 8
    h = hashlib.shake_256(struct.pack("<Q", seed & MASK64) + data)
    value = int.from_bytes(h.digest(nbytes), "little")
    return value >> (8 * nbytes - nbits) if nbits else 0


def hash64(seed: int, data: bytes) -> int:
    return hash_bits(seed, data, 64)


def hash_below(seed: int, data: bytes, count: int) -> int:
    """Keyed hash of ``data`` into ``range(count)``.

    Draws 64 bits more than ``count`` needs, so the modulo bias is below
    2**-64 even when ``count`` has thousands of bits.
    """
    if count < 1:
        raise ValueError("count must be positive")
    return hash_bits(seed, data, count.bit_length() + 64) % count


def keyed_rng(seed: int, data: bytes) -> np.random.Generator:
    """A numpy generator whose stream is a pure function of (seed, data)."""
    return np.random.default_rng(hash64(seed, data))


# splitmix64 finalizer, vectorized over uint64 arrays
def mix64(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
    return x
