"""Partitions of the orbit as finite-window (sliding block) codes.

A partition is stored intensionally: a window radius ``N``, a coordinate
scope and a lookup table from windows of width ``2N + 1`` to ``{0..k-1}``.
An ``x``-scoped partition never reads the y-track, which is how
measurability with respect to the x-coordinate is enforced structurally.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass

import numpy as np

from .sources import Orbit

SCOPES = ("x", "y", "joint")

TRACK_MAGIC = b"SWTK"
TRACK_VERSION = 1
_TRACK_HEADER = struct.Struct("<4sHBxQ")  # magic, version, parts, pad, n -> 16 bytes

MAX_TABLE = 1 << 22
BLOCK_TABLE_CAP = 1 << 24


class MemoryCapError(MemoryError):
    pass


def scoped_track(orbit: Orbit, scope: str) -> tuple[np.ndarray, int]:
    """The coordinate track a ``scope`` may read, with its alphabet size."""
    if scope == "x":
        return orbit.x, orbit.x_alphabet_size
    if scope == "y":
        return orbit.y, orbit.y_alphabet_size
    if scope == "joint":
        return orbit.joint(), orbit.x_alphabet_size * orbit.y_alphabet_size
    raise ValueError(f"unknown scope {scope!r}")


@dataclass(frozen=True)
class SymbolTrack:
    """A partition read along the orbit: one symbol in ``{0..parts-1}`` per position."""

    values: np.ndarray
    parts: int

    def __post_init__(self):
        if not 1 <= self.parts <= 256:
            raise ValueError("parts must be in 1..256")
        v = np.ascontiguousarray(self.values, dtype=np.uint8)
        if v.ndim != 1:
            raise ValueError("track must be 1-d")
        if len(v) and int(v.max()) >= self.parts:
            raise ValueError("track symbol >= parts")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    def to_bytes(self) -> bytes:
        return _TRACK_HEADER.pack(TRACK_MAGIC, TRACK_VERSION, self.parts - 1,
                                  len(self.values)) + self.values.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SymbolTrack":
        magic, version, parts_m1, n = _TRACK_HEADER.unpack_from(data)
        if magic != TRACK_MAGIC or version != TRACK_VERSION:
            raise ValueError("not a track file (bad magic/version)")
        body = np.frombuffer(data, dtype=np.uint8, offset=_TRACK_HEADER.size)
        if len(body) != n:
            raise ValueError("track body length does not match header")
        return cls(body.copy(), parts_m1 + 1)


@dataclass(frozen=True)
class SlidingBlockPartition:
    """Window code ``table[window] -> part``.

    ``table`` is flat, in row-major window order: the symbol at offset
    ``-N`` is the most significant digit (base = scope alphabet size).
    """

    parts: int
    radius: int
    scope: str
    alphabet: int
    table: np.ndarray
    fill: int = 0

    def __post_init__(self):
        if self.parts < 1 or self.radius < 0:
            raise ValueError("need parts >= 1 and radius >= 0")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}")
        t = np.ascontiguousarray(self.table, dtype=np.uint8)
        size = self.alphabet ** (2 * self.radius + 1)
        if t.shape != (size,):
            raise ValueError(f"code table must list all {size} windows")
        if int(t.max()) >= self.parts:
            raise ValueError("code table value >= parts")
        if not 0 <= self.fill < self.alphabet:
            raise ValueError("fill symbol outside alphabet")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def width(self) -> int:
        return 2 * self.radius + 1

    @classmethod
    def from_function(cls, func, radius: int, scope: str, alphabet: int,
                      parts: int, fill: int = 0) -> "SlidingBlockPartition":
        width = 2 * radius + 1
        if alphabet ** width > MAX_TABLE:
            raise MemoryCapError("window table too large")
        table = [func(w) for w in itertools.product(range(alphabet), repeat=width)]
        return cls(parts, radius, scope, alphabet, np.array(table), fill)

    @classmethod
    def coordinate(cls, scope: str, alphabet: int) -> "SlidingBlockPartition":
        """The generator partition that simply reads the scoped symbol."""
        return cls(alphabet, 0, scope, alphabet, np.arange(alphabet))

    @classmethod
    def constant(cls, scope: str = "x", alphabet: int = 2, parts: int = 1) -> "SlidingBlockPartition":
        return cls(parts, 0, scope, alphabet, np.zeros(alphabet, dtype=np.uint8))

    def to_dict(self) -> dict:
        return {"parts": self.parts, "radius": self.radius, "scope": self.scope,
                "alphabet": self.alphabet, "fill": self.fill,
                "table": self.table.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SlidingBlockPartition":
        return cls(int(d["parts"]), int(d["radius"]), d["scope"], int(d["alphabet"]),
                   np.array(d["table"]), int(d.get("fill", 0)))


def window_codes(track: np.ndarray, radius: int, alphabet: int, fill: int = 0) -> np.ndarray:
    """Row-major code of the width-(2N+1) window centred at every position."""
    n = len(track)
    padded = np.full(n + 2 * radius, fill, dtype=np.int64)
    padded[radius:radius + n] = track
    code = np.zeros(n, dtype=np.int64)
    for j in range(2 * radius + 1):
        code = code * alphabet + padded[j:j + n]
    return code


def evaluate(partition: SlidingBlockPartition, orbit: Orbit) -> SymbolTrack:
    track, alphabet = scoped_track(orbit, partition.scope)
    if alphabet != partition.alphabet:
        raise ValueError(f"partition expects alphabet {partition.alphabet}, scope has {alphabet}")
    codes = window_codes(track, partition.radius, alphabet, partition.fill)
    return SymbolTrack(partition.table[codes], partition.parts)


def _values(t) -> np.ndarray:
    return t.values if isinstance(t, SymbolTrack) else np.asarray(t)


def partition_distance(p, q) -> float:
    """Fraction of positions where two tracks disagree."""
    a, b = _values(p), _values(q)
    if a.shape != b.shape:
        raise ValueError(f"track lengths differ ({len(a)} vs {len(b)})")
    if len(a) == 0:
        return 0.0
    return float(np.count_nonzero(a != b)) / len(a)


def _block_entropy(values: np.ndarray, parts: int, k: int, n: int) -> float:
    """Entropy of the first ``n`` length-``k`` windows."""
    if k == 0:
        return 0.0
    code = np.zeros(n, dtype=np.int64)
    v = values.astype(np.int64)
    for j in range(k):
        code = code * parts + v[j:j + n]
    counts = np.bincount(code, minlength=1)
    counts = counts[counts > 0]
    p = counts / n
    return float(-(p * np.log2(p)).sum())


def empirical_block_entropy(track: SymbolTrack, k: int, cap: int = BLOCK_TABLE_CAP) -> float:
    """Conditional block entropy H(k+1) - H(k) from empirical block frequencies."""
    if k < 0:
        raise ValueError("block length must be >= 0")
    parts = max(track.parts, 2)
    if parts ** (k + 1) > cap:
        raise MemoryCapError(f"block table {parts}^{k + 1} exceeds cap {cap}")
    if len(track) <= k:
        raise ValueError("track shorter than block length")
    # both block lengths over the same windows, so the difference is a conditional entropy
    n = len(track) - k
    return (_block_entropy(track.values, parts, k + 1, n)
            - _block_entropy(track.values, parts, k, n))


def zero_run_before(values: np.ndarray) -> np.ndarray:
    """Number of consecutive zeros immediately before each position.

    Positions before the orbit start count as zeros, so the run before
    position ``i`` in an all-zero prefix is reported as ``i + 2**40 - 1``.
    """
    v = np.asarray(values)
    n = len(v)
    idx = np.arange(n, dtype=np.int64)
    nonzero = np.where(v != 0, idx, -(1 << 40))
    last_nz = np.maximum.accumulate(nonzero)
    prev_last = np.empty(n, dtype=np.int64)
    if n:
        prev_last[0] = -(1 << 40)
        prev_last[1:] = last_nz[:-1]
    return idx - prev_last - 1


def longest_zero_run(values: np.ndarray) -> int:
    v = np.asarray(values)
    if len(v) == 0:
        return 0
    z = np.concatenate(([0], (v == 0).astype(np.int8), [0]))
    d = np.diff(z)
    starts, ends = np.where(d == 1)[0], np.where(d == -1)[0]
    return int((ends - starts).max()) if len(starts) else 0


def is_admissible(track, ell: int) -> bool:
    """True iff the track has no run of ``ell`` consecutive zeros."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    return longest_zero_run(_values(track)) < ell
