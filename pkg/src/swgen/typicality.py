"""Typical names over towers and maps between name sets.

Names are byte strings (one byte per symbol) so they can key dicts.  A
:class:`NameModel` supplies exact per-name probabilities for coordinate
projections of a source; tracks without a model fall back to empirical
frequencies along the tower.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .partitions import SymbolTrack
from .sources import IID, JointSource, rate_region
from .towers import Tower, names_along_tower

# how symbols of each scope are read off a pair state
MODEL_SCOPES = ("x", "y", "joint", "joint_yx")


def binary_entropy(x: float) -> float:
    """H(x) = -x log2 x - (1-x) log2 (1-x), with H(0) = H(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def reverse_sm_bound(h: float, eps: float, parts: int) -> float:
    """Upper bound h + H(eps) + 2 eps log2|P| on a conditional entropy rate.

    Applies when a tower covering more than ``1 - eps`` carries a map whose
    fibers have fewer than ``2**(h M)`` names and hit the true name on more
    than ``1 - eps`` of the base.
    """
    return h + binary_entropy(eps) + 2 * eps * math.log2(parts)


class NameModel:
    """Exact name probabilities for one coordinate projection of a source.

    ``scope`` selects the symbol read at each pair state: ``x``, ``y``, the
    pair ``x*|Y|+y`` (``joint``) or ``y*|X|+x`` (``joint_yx``).  Markov
    sources use the forward algorithm, which is exact for hidden-Markov
    projections too.
    """

    def __init__(self, source: JointSource, scope: str, entropy_rate: float | None = None):
        if scope not in MODEL_SCOPES:
            raise ValueError(f"scope must be one of {MODEL_SCOPES}")
        self.source, self.scope = source, scope
        kx, ky = source.x_alphabet_size, source.y_alphabet_size
        sx, sy = source.state_x(), source.state_y()
        self.emit = {"x": sx, "y": sy, "joint": sx * ky + sy, "joint_yx": sy * kx + sx}[scope]
        self.alphabet = int(self.emit.max()) + 1
        if entropy_rate is None:
            region = rate_region(source)
            entropy_rate = {"x": region.h_x, "y": region.h_y}.get(scope, region.h)
        self.entropy_rate = float(entropy_rate)

    def log2prob(self, names: np.ndarray) -> np.ndarray:
        names = np.atleast_2d(np.asarray(names, dtype=np.int64))
        src = self.source
        if src.kind == IID:
            p1 = np.bincount(self.emit, weights=src.joint.ravel(), minlength=self.alphabet)
            with np.errstate(divide="ignore"):
                logp1 = np.log2(p1)
            return logp1[names].sum(axis=1)
        P = src.transition
        onehot = (self.emit[None, :] == np.arange(self.alphabet)[:, None]).astype(float)
        alpha = src.stationary[None, :] * onehot[names[:, 0]]
        total = np.zeros(len(names))
        for j in range(names.shape[1]):
            if j:
                alpha = (alpha @ P) * onehot[names[:, j]]
            s = alpha.sum(axis=1)
            with np.errstate(divide="ignore"):
                total += np.log2(s)
            alpha = alpha / np.where(s > 0, s, 1.0)[:, None]
        return total


def _rows_as_bytes(names: np.ndarray) -> list[bytes]:
    names = np.ascontiguousarray(names, dtype=np.uint8)
    return [row.tobytes() for row in names]


@dataclass
class NameSet:
    height: int
    parts: int
    log2prob: dict            # name bytes -> log2 probability (exact or empirical)
    captured: float           # fraction of complete blocks whose name is a member
    kind: str                 # "exact" | "empirical"
    observed: int = 0         # distinct names seen before filtering
    blocks: int = 0

    def __contains__(self, name) -> bool:
        key = name if isinstance(name, bytes) else np.asarray(name, dtype=np.uint8).tobytes()
        return key in self.log2prob

    def __len__(self) -> int:
        return len(self.log2prob)


def _track_values(track) -> tuple[np.ndarray, int]:
    if isinstance(track, SymbolTrack):
        return track.values, track.parts
    v = np.asarray(track)
    return v, int(v.max()) + 1 if len(v) else 1


def typical_names(tower: Tower, track, model: NameModel | None = None, eps: float = 0.05,
                  h: float | None = None) -> NameSet:
    """Observed names whose probability lies in ``2**(-(h +- eps) M)``.

    With a model the probability is exact and ``h`` defaults to the model's
    entropy rate.  Without one, probabilities are empirical block frequencies
    and the band is applied only if ``h`` is given.
    """
    values, parts = _track_values(track)
    tn = names_along_tower(tower, values)
    M = tower.height
    keys = _rows_as_bytes(tn.names)
    counts: dict[bytes, int] = {}
    first: dict[bytes, int] = {}
    for i, k in enumerate(keys):
        counts[k] = counts.get(k, 0) + 1
        first.setdefault(k, i)
    blocks = len(keys)
    uniq = list(counts)
    if model is not None:
        rows = tn.names[[first[k] for k in uniq]] if uniq else np.zeros((0, M), dtype=np.uint8)
        logp = model.log2prob(rows) if uniq else np.zeros(0)
        kind = "exact"
        h = model.entropy_rate if h is None else h
    else:
        logp = np.array([math.log2(counts[k] / blocks) for k in uniq])
        kind = "empirical"
    if h is not None:
        lo, hi = -(h + eps) * M, -(h - eps) * M
        keep = (logp >= lo) & (logp <= hi)
    else:
        keep = np.ones(len(uniq), dtype=bool)
    members = {k: float(lp) for k, lp, ok in zip(uniq, logp, keep) if ok}
    hit = sum(counts[k] for k in members)
    ns = NameSet(M, parts, members, hit / blocks if blocks else 0.0, kind, len(uniq), blocks)
    if kind == "exact" and h is not None and members:
        # members each carry probability >= 2^-(h+eps)M, so there cannot be more
        assert math.log2(len(members)) <= (h + eps) * M + 1e-9
    return ns


@dataclass
class NameMap:
    """Finite map from names to sets of names; unknown keys map to the empty set."""

    height: int
    fibers: dict = field(default_factory=dict)   # key bytes -> frozenset of name bytes
    log2_bound: float = math.inf                 # declared bound on log2 fiber size
    truncated: int = 0                           # fibers dropped for exceeding the bound
    coverage: float = 0.0                        # fraction of bases whose true name is in its fiber

    def __getitem__(self, key) -> frozenset:
        k = key if isinstance(key, bytes) else np.asarray(key, dtype=np.uint8).tobytes()
        return self.fibers.get(k, frozenset())

    def lookup(self, key) -> frozenset:
        return self[key]

    def max_fiber(self) -> int:
        return max((len(v) for v in self.fibers.values()), default=0)

    def fiber_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for v in self.fibers.values():
            hist[len(v)] = hist.get(len(v), 0) + 1
        return dict(sorted(hist.items()))

    def summary_rows(self) -> list[dict]:
        """CSV-ready rows: one per fiber size, plus coverage and truncation counts."""
        return [{"fiber_size": s, "keys": c, "coverage": self.coverage,
                 "truncated": self.truncated, "log2_bound": self.log2_bound}
                for s, c in self.fiber_histogram().items()]


def conditional_name_map(tower: Tower, p_track, q_track, eps: float, h_cond: float,
                         p_model: NameModel | None = None,
                         joint_model: NameModel | None = None) -> NameMap:
    """Map each typical P-name to the Q-names jointly typical with it.

    ``Phi(n) = pi_2(pi_1^{-1}(n) & M)`` for ``n`` in the typical P-names ``N``
    and ``M`` the typical joint names; ``Phi(n)`` is empty for ``n`` outside
    ``N``.  Fibers larger than ``2**(M (h_cond + 2 eps))`` are emptied and
    counted in ``truncated``.
    """
    pv, pk = _track_values(p_track)
    qv, qk = _track_values(q_track)
    if len(pv) != len(qv):
        raise ValueError("tracks must be aligned")
    if p_model is not None and joint_model is None:
        raise ValueError("an exact P-model needs a matching joint model")
    M = tower.height
    joint = pv.astype(np.int64) * qk + qv
    p_typ = typical_names(tower, pv, p_model, eps)
    j_typ = typical_names(tower, joint, joint_model, eps)
    p_names = names_along_tower(tower, pv).names
    q_names = names_along_tower(tower, qv).names
    j_keys = _rows_as_bytes(names_along_tower(tower, joint).names) if qk * pk <= 256 else None
    fibers: dict[bytes, set] = {}
    pk_bytes = _rows_as_bytes(p_names)
    qk_bytes = _rows_as_bytes(q_names)
    for i, (pb, qb) in enumerate(zip(pk_bytes, qk_bytes)):
        if pb not in p_typ:
            continue
        jb = j_keys[i] if j_keys is not None else None
        if jb is not None and jb not in j_typ:
            continue
        fibers.setdefault(pb, set()).add(qb)
    bound = M * (h_cond + 2 * eps)
    truncated = 0
    out = {}
    for k, v in fibers.items():
        if math.log2(len(v)) > bound:
            truncated += 1
            continue
        out[k] = frozenset(v)
    hits = sum(1 for pb, qb in zip(pk_bytes, qk_bytes) if qb in out.get(pb, ()))
    cov = hits / len(pk_bytes) if pk_bytes else 0.0
    return NameMap(M, out, bound, truncated, cov)


class HammingBallMap:
    """Implicit name map: ``w`` is in the fiber of ``q`` iff ``d_H(w, center(q)) < r M``.

    The center itself is always a member, so ``r = 0`` gives the singleton
    ball rather than the empty set.  ``center`` applies a window code of the given radius to the interior of
    the word and writes 0 within ``radius`` of either end.
    """

    def __init__(self, window_code, radius: int, r: float, parts: int):
        if not 0.0 <= r <= 0.5:
            raise ValueError("Hamming ball radius fraction must lie in [0, 1/2]")
        self.window_code, self.radius, self.r, self.parts = window_code, radius, r, parts

    def center(self, q) -> np.ndarray:
        q = np.asarray(q)
        M, N = len(q), self.radius
        out = np.zeros(M, dtype=np.uint8)
        for j in range(N, M - N):
            out[j] = self.window_code(tuple(int(s) for s in q[j - N:j + N + 1]))
        return out

    def contains(self, q, w) -> bool:
        c = self.center(q)
        w = np.asarray(w)
        d = int(np.count_nonzero(c != w))
        return d == 0 or d < self.r * len(c)

    def log2_size_bound(self, M: int) -> float:
        """M (H(r) + r log2 k), the entropy bound on the ball size."""
        return M * (binary_entropy(self.r) + self.r * math.log2(self.parts))

    def exact_log2_size(self, M: int) -> float:
        """log2 of sum_{d < rM} C(M, d) (k-1)^d (at least the center), the exact ball size."""
        top = max(math.ceil(self.r * M) - 1, 0)
        total = sum(math.comb(M, d) * (self.parts - 1) ** d for d in range(0, top + 1))
        return math.log2(total)


def hamming_ball_map(window_code, radius: int, r: float, parts: int) -> HammingBallMap:
    return HammingBallMap(window_code, radius, r, parts)
