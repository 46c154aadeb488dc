"""Run-length constrained codebooks and seeded painting data.

``A(n, ell, a)`` is the set of words of length ``n`` over ``{0..a-1}`` that
start with the symbol 1 and contain no run of ``ell`` consecutive zeros.
Counting, ranking and unranking all use one table ``F[r]`` = number of
admissible continuations of length ``r`` right after a nonzero symbol;
continuations after a partial zero run are window sums of ``F``, so the
table stays linear in ``n`` even for long words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .seeding import derive_seed, hash_below


class AdmissibilityError(ValueError):
    pass


class AdmissibleCodebook:
    """Lexicographically ordered ``A(n, ell, a)`` with exact big-integer counts."""

    def __init__(self, n: int, ell: int, a: int):
        if n < 1 or ell < 1 or a < 2:
            raise ValueError("need n >= 1, ell >= 1, a >= 2")
        self.n, self.ell, self.a = n, ell, a
        F = [1]
        S = [0, 1]  # S[k] = F[0] + ... + F[k-1]
        for r in range(1, n):
            F.append(self._cont(r, 0, F, S))
            S.append(S[-1] + F[-1])
        self._F, self._S = F, S
        self.count = F[n - 1]

    def _cont(self, r: int, z: int, F=None, S=None) -> int:
        """Admissible continuations of length ``r`` after a trailing zero run ``z``."""
        F = self._F if F is None else F
        S = self._S if S is None else S
        if z >= self.ell:
            return 0
        if r == 0:
            return 1
        top = min(r - 1, self.ell - 1 - z)
        ending_in_zeros = 1 if r <= self.ell - 1 - z else 0
        return ending_in_zeros + (self.a - 1) * (S[r] - S[r - 1 - top])

    def __contains__(self, word) -> bool:
        w = [int(s) for s in word]
        if len(w) != self.n or w[0] != 1 or any(not 0 <= s < self.a for s in w):
            return False
        run = 0
        for s in w:
            run = run + 1 if s == 0 else 0
            if run >= self.ell:
                return False
        return True

    def unrank(self, index: int) -> np.ndarray:
        if not 0 <= index < self.count:
            raise IndexError(f"index {index} outside [0, {self.count})")
        F = self._F
        word = np.empty(self.n, dtype=np.uint8)
        word[0] = 1
        z = 0
        for pos in range(1, self.n):
            r = self.n - pos - 1          # symbols left after this one
            zero_ways = self._cont(r, z + 1)
            if index < zero_ways:
                word[pos] = 0
                z += 1
                continue
            index -= zero_ways
            s, index = divmod(index, F[r])
            word[pos] = 1 + s
            z = 0
        return word

    def rank(self, word) -> int:
        if word not in self:
            raise AdmissibilityError("word is not in the codebook")
        F = self._F
        index = 0
        z = 0
        w = [int(s) for s in word]
        for pos in range(1, self.n):
            r = self.n - pos - 1
            if w[pos] == 0:
                z += 1
                continue
            index += self._cont(r, z + 1) + (w[pos] - 1) * F[r]
            z = 0
        return index

    def log2_count(self) -> float:
        return math.log2(self.count)

    # --- batch forms for books that fit in int64 ---

    def _cont_table(self) -> np.ndarray:
        """``C[r, z] = _cont(r, z)`` for z in 0..ell, as int64."""
        if self.count >= 1 << 62:
            raise OverflowError("batch rank/unrank needs count < 2**62")
        tab = getattr(self, "_tab", None)
        if tab is None:
            tab = np.array([[self._cont(r, z) for z in range(self.ell + 1)] for r in range(self.n)],
                           dtype=np.int64)
            self._tab = tab
        return tab

    def unrank_many(self, indices) -> np.ndarray:
        """Rows ``unrank(i)`` for each index, shape ``(len(indices), n)``."""
        C = self._cont_table()
        idx = np.array(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.count):
            raise IndexError("index outside the codebook")
        F = C[:, 0]
        out = np.zeros((len(idx), self.n), dtype=np.uint8)
        out[:, 0] = 1
        z = np.zeros(len(idx), dtype=np.int64)
        for pos in range(1, self.n):
            r = self.n - pos - 1
            zero_ways = C[r, np.minimum(z + 1, self.ell)]
            zero = idx < zero_ways
            rest = idx - zero_ways
            s, rem = np.divmod(rest, F[r])
            out[:, pos] = np.where(zero, 0, 1 + s)
            idx = np.where(zero, idx, rem)
            z = np.where(zero, z + 1, 0)
        return out

    def rank_many(self, words) -> np.ndarray:
        C = self._cont_table()
        w = np.asarray(words, dtype=np.int64)
        if w.ndim != 2 or w.shape[1] != self.n:
            raise ValueError(f"need rows of length {self.n}")
        if len(w) and ((w[:, 0] != 1).any() or (w < 0).any() or (w >= self.a).any()):
            raise AdmissibilityError("some word is not in the codebook")
        F = C[:, 0]
        index = np.zeros(len(w), dtype=np.int64)
        z = np.zeros(len(w), dtype=np.int64)
        for pos in range(1, self.n):
            r = self.n - pos - 1
            zero = w[:, pos] == 0
            add = C[r, np.minimum(z + 1, self.ell)] + (w[:, pos] - 1) * F[r]
            index += np.where(zero, 0, add)
            z = np.where(zero, z + 1, 0)
            if (z >= self.ell).any():
                raise AdmissibilityError("some word is not in the codebook")
        return index


@lru_cache(maxsize=64)
def codebook(n: int, ell: int, a: int) -> AdmissibleCodebook:
    return AdmissibleCodebook(n, ell, a)


def count_admissible(n: int, ell: int, a: int) -> int:
    return codebook(n, ell, a).count


def growth_rate(n: int, ell: int, a: int) -> float:
    """(1/n) log2 |A(n, ell, a)|."""
    return codebook(n, ell, a).log2_count() / n


def enumerate_admissible(n: int, ell: int, a: int) -> list[tuple[int, ...]]:
    """Brute-force oracle: all admissible words in lexicographic order."""
    from itertools import product

    out = []
    for tail in product(range(a), repeat=n - 1):
        w = (1,) + tail
        run, ok = 0, True
        for s in w:
            run = run + 1 if s == 0 else 0
            if run >= ell:
                ok = False
                break
        if ok:
            out.append(w)
    return out


def brute_force_counts(n: int, a: int, ells) -> dict[int, int]:
    """Brute-force oracle over all ``a**(n-1)`` words starting with 1, for several ``ell`` at once."""
    if n < 1 or a < 2:
        raise ValueError("need n >= 1 and a >= 2")
    total = a ** (n - 1)
    idx = np.arange(total, dtype=np.int64)
    run = np.zeros(total, dtype=np.int16)      # current zero run (the leading 1 resets it)
    longest = np.zeros(total, dtype=np.int16)
    for _ in range(n - 1):
        zero = idx % a == 0
        idx //= a
        run = np.where(zero, run + 1, 0).astype(np.int16)
        np.maximum(longest, run, out=longest)
    return {ell: int(np.count_nonzero(longest < ell)) for ell in ells}



def brute_force_words(n: int, ell: int, a: int) -> np.ndarray:
    """Brute-force oracle: all admissible words as rows, in lexicographic order."""
    if n < 1 or a < 2:
        raise ValueError("need n >= 1 and a >= 2")
    idx = np.arange(a ** (n - 1), dtype=np.int64)
    words = np.ones((len(idx), n), dtype=np.uint8)
    for pos in range(n - 1, 0, -1):            # last digit is least significant
        idx, words[:, pos] = np.divmod(idx, a)
    run = np.zeros(len(words), dtype=np.int16)
    ok = np.ones(len(words), dtype=bool)
    for pos in range(1, n):
        run = np.where(words[:, pos] == 0, run + 1, 0).astype(np.int16)
        ok &= run < ell
    return words[ok]

@dataclass(frozen=True)
class PaintingData:
    """A seeded random function from names to codewords.

    ``apply(name) = unrank(hash(seed, name) mod count)``; the hash draws
    64 bits beyond the codebook size, so values are near-uniform however
    large the codebook is.
    """

    parts: int                 # alphabet of the names being painted
    height: int                # name length
    book: AdmissibleCodebook
    seed: int
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def _key(self, name) -> bytes:
        data = np.ascontiguousarray(name, dtype=np.uint8).tobytes()
        if len(data) != self.height:
            raise ValueError(f"name length {len(data)} != height {self.height}")
        return data

    def index(self, name) -> int:
        key = self._key(name)
        idx = self._cache.get(key)
        if idx is None:
            idx = hash_below(self.seed, bytes([self.parts]) + key, self.book.count)
            self._cache[key] = idx
        return idx

    def apply(self, name) -> np.ndarray:
        return self.book.unrank(self.index(name))


def make_painting_data(parts: int, height: int, book: AdmissibleCodebook, seed: int) -> PaintingData:
    if book.count < 1:
        raise ValueError("empty codebook")
    return PaintingData(parts, height, book, seed)


def uniformity_pvalue(pd: PaintingData, names, bins: int = 16) -> float:
    """Chi-square p-value of painted indices against a uniform law over ``bins``."""
    from scipy.stats import chisquare

    idx = [pd.index(nm) * bins // pd.book.count for nm in names]
    counts = np.bincount(idx, minlength=bins)
    return float(chisquare(counts).pvalue)


@dataclass(frozen=True)
class BinningResult:
    success_fraction: float
    good_fractions: np.ndarray   # per trial: measure of points meeting the fiber bound
    fiber_bound: float           # 1 + a / (eps * b)
    predicted: float             # 1 - sqrt(eps)


def _distinct_offsets(rng: np.random.Generator, rows: int, k: int, universe: int) -> np.ndarray:
    """``rows`` x ``k`` offsets in [1, universe), distinct within each row."""
    if k == 0:
        return np.zeros((rows, 0), dtype=np.int64)
    off = rng.integers(1, universe, size=(rows, k))
    while True:
        off.sort(axis=1)
        dup = np.zeros_like(off, dtype=bool)
        dup[:, 1:] = off[:, 1:] == off[:, :-1]
        nd = int(dup.sum())
        if nd == 0:
            return off
        off[dup] = rng.integers(1, universe, size=nd)


def verify_binning_lemma(universe_size: int, fiber_bound: int, bins: int, eps: float,
                         trials: int, seed: int) -> BinningResult:
    """Monte Carlo check of the random-binning lemma on a synthetic instance.

    Points ``z`` of a uniform space of size ``universe_size`` carry the
    candidate set ``Phi(z)``: ``z`` itself plus ``fiber_bound - 1`` other
    random elements.  A fresh uniform binning ``psi`` into ``bins`` bins is
    drawn per trial; the trial succeeds when more than ``1 - sqrt(eps)`` of
    the points have ``|psi^-1(psi(z)) & Phi(z)| < 1 + fiber_bound/(eps*bins)``.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if not 1 <= fiber_bound <= universe_size:
        raise ValueError("fiber bound must lie in [1, universe_size]")
    N = universe_size
    limit = 1 + fiber_bound / (eps * bins)
    need = 1 - math.sqrt(eps)
    z = np.arange(N)
    good = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(seed, "binning", t))
        others = (z[:, None] + _distinct_offsets(rng, N, fiber_bound - 1, N)) % N
        psi = rng.integers(0, bins, size=N)
        hits = 1 + np.count_nonzero(psi[others] == psi[:, None], axis=1)
        good[t] = np.count_nonzero(hits < limit) / N
    success = float(np.count_nonzero(good > need)) / trials
    return BinningResult(success, good, limit, need)
