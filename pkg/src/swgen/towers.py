"""Rohlin towers along an orbit.

A tower is a set of base positions whose consecutive gaps are at least the
height ``M``, so the blocks ``[b, b + M)`` are disjoint.  Bases are chosen
by a seeded pseudorandom predicate on windows of the scoped coordinate
track followed by a greedy left-to-right pass; the base set of an
``x``-scoped tower is therefore a function of the x-track alone.

Only complete blocks count as covered.  A trailing block that would run
past the orbit end contributes nothing to coverage and is dropped when
names are read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partitions import SCOPES, SymbolTrack, scoped_track
from .seeding import derive_seed, mix64
from .sources import Orbit

DEFAULT_MARKER_WINDOW = 16
DEFAULT_RETRIES = 12


class TowerError(RuntimeError):
    def __init__(self, message, achieved_coverage=None):
        super().__init__(message)
        self.achieved_coverage = achieved_coverage


@dataclass(frozen=True)
class Tower:
    base_positions: np.ndarray
    height: int
    scope: str
    n: int

    def __post_init__(self):
        if self.height < 1:
            raise ValueError("tower height must be >= 1")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}")
        b = np.asarray(self.base_positions, dtype=np.int64)
        if b.ndim != 1:
            raise ValueError("base positions must be 1-d")
        if len(b) and (b[0] < 0 or b[-1] >= self.n):
            raise ValueError("base position outside orbit")
        if len(b) > 1 and np.diff(b).min() < self.height:
            raise ValueError("consecutive bases closer than the tower height")
        b.setflags(write=False)
        object.__setattr__(self, "base_positions", b)

    @property
    def complete_bases(self) -> np.ndarray:
        b = self.base_positions
        return b[b + self.height <= self.n]

    @property
    def truncated(self) -> int:
        return len(self.base_positions) - len(self.complete_bases)

    @property
    def coverage(self) -> float:
        return coverage(self, self.n)

    def covered_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        for b in self.complete_bases:
            mask[b:b + self.height] = True
        return mask

    def level(self) -> np.ndarray:
        """Height of each position above its base, or -1 off the tower."""
        lev = np.full(self.n, -1, dtype=np.int64)
        for b in self.complete_bases:
            lev[b:b + self.height] = np.arange(self.height)
        return lev

    def to_dict(self) -> dict:
        return {"height": self.height, "scope": self.scope, "n": self.n,
                "bases": self.base_positions.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tower":
        return cls(np.array(d["bases"], dtype=np.int64), int(d["height"]), d["scope"], int(d["n"]))


def coverage(tower: Tower, n: int | None = None) -> float:
    """Fraction of the orbit lying in complete tower blocks."""
    n = tower.n if n is None else n
    if n <= 0:
        return 0.0
    b = tower.base_positions
    complete = np.count_nonzero(b + tower.height <= n)
    return complete * tower.height / n


def marker_candidates(track: np.ndarray, alphabet: int, window: int,
                      density: float, seed: int) -> np.ndarray:
    """Positions whose forward window passes the seeded marker predicate."""
    n = len(track)
    if density >= 1.0:
        return np.arange(n, dtype=np.int64)
    padded = np.zeros(n + window, dtype=np.uint64)
    padded[:n] = track
    h = np.full(n, np.uint64(seed & ((1 << 64) - 1)), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(window):
            h = mix64(h ^ (padded[j:j + n] + np.uint64(alphabet * j + 1)))
    threshold = np.uint64(min(int(density * 2.0**64), (1 << 64) - 1))
    return np.flatnonzero(h < threshold).astype(np.int64)


def greedy_bases(candidates: np.ndarray, height: int) -> np.ndarray:
    """Keep a candidate iff it is at least ``height`` after the last kept base."""
    kept = []
    i = 0
    while i < len(candidates):
        b = int(candidates[i])
        kept.append(b)
        i = int(np.searchsorted(candidates, b + height, side="left"))
    return np.array(kept, dtype=np.int64)


def build_tower(orbit: Orbit, scope: str, height: int, marker_window: int = DEFAULT_MARKER_WINDOW,
                target_coverage: float = 0.99, seed: int = 0,
                max_retries: int = DEFAULT_RETRIES) -> Tower:
    """Tower of the given height whose bases depend only on the scoped track.

    The marker density starts where a geometric gap model predicts the
    target coverage and doubles on each retry.  Raises :class:`TowerError`
    carrying the best coverage reached if the target is not met.
    """
    if height < 1 or marker_window < 1:
        raise ValueError("height and marker_window must be >= 1")
    track, alphabet = scoped_track(orbit, scope)
    n = len(track)
    c = min(max(target_coverage, 1e-6), 1 - 1e-9)
    density = min(1.0, 1.5 * c / ((1 - c) * height))
    best = 0.0
    for attempt in range(max_retries + 1):
        cand = marker_candidates(track, alphabet, marker_window, density,
                                 derive_seed(seed, "marker", attempt))
        tower = Tower(greedy_bases(cand, height), height, scope, n)
        cov = tower.coverage
        best = max(best, cov)
        if cov >= target_coverage:
            return tower
        if density >= 1.0:
            break
        density = min(1.0, 2 * density)
    raise TowerError(f"tower of height {height} reached coverage {best:.6f} < target "
                     f"{target_coverage}", achieved_coverage=best)


@dataclass(frozen=True)
class TowerNames:
    """Names read up the complete blocks of a tower."""

    bases: np.ndarray
    names: np.ndarray     # (blocks, height) uint8
    dropped: int

    def __len__(self) -> int:
        return len(self.bases)

    def __iter__(self):
        return iter(zip(self.bases.tolist(), self.names))


def names_along_tower(tower: Tower, track) -> TowerNames:
    values = track.values if isinstance(track, SymbolTrack) else np.asarray(track)
    bases = tower.base_positions[tower.base_positions + tower.height <= len(values)]
    if len(bases) == 0:
        return TowerNames(bases, np.zeros((0, tower.height), dtype=values.dtype),
                          len(tower.base_positions))
    names = values[bases[:, None] + np.arange(tower.height)[None, :]]
    return TowerNames(bases, names, len(tower.base_positions) - len(bases))
