"""Painting and repainting codewords along tower blocks, and base recovery.

A painted block of height ``M`` carries an admissible codeword of length
``M - ell`` followed by ``ell`` zeros; everything off the tower is 0.  Since
codewords start with 1 and never contain ``ell`` zeros in a row, a base is
exactly a 1 preceded by at least ``ell`` zeros.  Repainting overwrites the
first ``floor(eps M)`` levels, keeps the old track up to level
``M - 2 ell``, and zeros the rest, so bases are 1s preceded by ``2 ell``
zeros.  Positions before the orbit start count as zeros.
"""

from __future__ import annotations

import math

import numpy as np

from .codebooks import PaintingData
from .partitions import SymbolTrack, _values, is_admissible, zero_run_before
from .towers import Tower, TowerNames


class ZoneError(ValueError):
    pass


def _names_array(tower: Tower, names) -> np.ndarray:
    arr = names.names if isinstance(names, TowerNames) else np.asarray(names)
    if arr.ndim != 2 or arr.shape[0] != len(tower.complete_bases):
        raise ValueError("need one name per complete block")
    return arr


def paint(tower: Tower, generator_names, pd: PaintingData, ell: int) -> SymbolTrack:
    """Track over ``pd.book.a`` symbols carrying ``pd(name) + 0^ell`` on each block."""
    M = tower.height
    if pd.book.n != M - ell or pd.book.ell != ell:
        raise ZoneError(f"codebook A({pd.book.n}, {pd.book.ell}, .) does not fit "
                        f"height {M} with ell={ell}")
    names = _names_array(tower, generator_names)
    out = np.zeros(tower.n, dtype=np.uint8)
    for b, name in zip(tower.complete_bases, names):
        out[b:b + M - ell] = pd.apply(name)
    return SymbolTrack(out, pd.book.a)


def recover_bases(painted, ell: int) -> np.ndarray:
    """Positions holding a 1 preceded by at least ``ell`` zeros."""
    v = _values(painted)
    return np.flatnonzero((v == 1) & (zero_run_before(v) >= ell)).astype(np.int64)


def recover_bases_repaint(track, ell: int) -> np.ndarray:
    return recover_bases(track, 2 * ell)


def head_length(eps: float, M: int) -> int:
    # small guard so that eps*M landing exactly on an integer is not rounded down by FP error
    return int(math.floor(eps * M + 1e-9))


def repaint(tower: Tower, current_track, generator_names, pd: PaintingData | None,
            eps: float, ell: int) -> SymbolTrack:
    """Repaint the first ``floor(eps M)`` levels of every block.

    ``ell = 0`` switches off the zero tail and the admissibility check (a
    diagnostic mode; bases are then not recoverable).
    """
    M = tower.height
    head = head_length(eps, M)
    if head + 2 * ell > M:
        raise ZoneError(f"head {head} + tail {2 * ell} exceeds height {M}")
    cur = _values(current_track)
    parts = (current_track.parts if isinstance(current_track, SymbolTrack)
             else (int(cur.max()) + 1 if len(cur) else 2))
    if ell >= 1 and not is_admissible(cur, ell):
        raise ValueError(f"current track is not {ell}-admissible")
    if head:
        if pd is None or pd.book.n != head or pd.book.ell != ell:
            raise ZoneError(f"repaint codebook must be A({head}, {ell}, .)")
        parts = max(parts, pd.book.a)
    names = _names_array(tower, generator_names) if head else None
    out = np.zeros(len(cur), dtype=np.uint8)
    for i, b in enumerate(tower.complete_bases):
        if head:
            out[b:b + head] = pd.apply(names[i])
        out[b + head:b + M - 2 * ell] = cur[b + head:b + M - 2 * ell]
    return SymbolTrack(out, parts)


def make_admissible(track, run: int, keep: int = 0) -> SymbolTrack:
    """Break every zero run of length >= ``run`` by writing 1s into it.

    Every resulting zero run is shorter than ``run``.  When a long run is
    followed by a nonzero symbol, at least ``keep`` zeros are left in front
    of that symbol, so base markers of a coarser painting survive.  The
    first 1 goes ``run - 1`` (or at least ``run - keep - 1``) positions into
    the run.
    """
    if run < 1 or keep >= run:
        raise ValueError("need run >= 1 and keep < run")
    v = _values(track).copy()
    parts = track.parts if isinstance(track, SymbolTrack) else (int(v.max()) + 1 if len(v) else 2)
    n = len(v)
    z = np.concatenate(([0], (v == 0).astype(np.int8), [0]))
    d = np.diff(z)
    starts, ends = np.flatnonzero(d == 1), np.flatnonzero(d == -1)
    for s, e in zip(starts.tolist(), ends.tolist()):
        cursor = s
        while e - cursor >= run:
            p = cursor + run - 1
            if e < n and e - p - 1 < keep:
                p = e - keep - 1
            v[p] = 1
            cursor = p + 1
    return SymbolTrack(v, max(parts, 2))
