"""Stationary correlated pair sources, their entropy rates, and orbit sampling.

A source lives on pair states ``s = x * y_alphabet_size + y``.  Two kinds
are supported:

* ``iid-pair``: every step draws ``(x, y)`` from a fixed joint table;
* ``joint-markov``: the pair state is a finite Markov chain, which must be
  irreducible and aperiodic.

The measure space is realized as one long orbit, so every "measure" used
downstream is an empirical frequency along a sampled :class:`Orbit`.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path

import numpy as np

IID = "iid-pair"
MARKOV = "joint-markov"

ORBIT_MAGIC = b"SWOB"
ORBIT_VERSION = 1
_ORBIT_HEADER = struct.Struct("<4sHBBQ")  # magic, version, |X|, |Y|, n -> 16 bytes

ROW_TOL = 1e-12
STATIONARY_TOL = 1e-10
DEFAULT_BLOCK_CAP = 12
# largest (words x states) table the marginal block-entropy recursion may build
BLOCK_TABLE_CAP = 1 << 23


class SourceError(ValueError):
    pass


def entropy_bits(p) -> float:
    """Shannon entropy (bits) of a probability vector; zero entries are skipped."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _check_rows(matrix: np.ndarray, what: str) -> None:
    if np.any(matrix < 0):
        raise SourceError(f"{what} has negative entries")
    sums = matrix.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > ROW_TOL):
        raise SourceError(f"{what} rows must sum to 1 (got {sums.tolist()})")


def _is_irreducible(adj: np.ndarray) -> bool:
    k = adj.shape[0]
    reach = adj | np.eye(k, dtype=bool)
    for _ in range(max(1, int(np.ceil(np.log2(k))) + 1)):
        reach = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
    return bool(reach.all())


def _is_primitive(adj: np.ndarray) -> bool:
    # Wielandt: an irreducible k-state chain is aperiodic iff A^((k-1)^2+1) > 0
    k = adj.shape[0]
    power = (k - 1) ** 2 + 1
    result = np.eye(k, dtype=bool)
    base = adj.copy()
    while power:
        if power & 1:
            result = (result.astype(np.int64) @ base.astype(np.int64)) > 0
        base = (base.astype(np.int64) @ base.astype(np.int64)) > 0
        power >>= 1
    return bool(result.all())


def stationary_distribution(source_or_matrix) -> np.ndarray:
    """Unique stationary distribution of an irreducible transition matrix.

    Accepts a :class:`JointSource` of kind ``joint-markov`` or a bare
    row-stochastic matrix.  Raises :class:`SourceError` with message
    "no unique stationary distribution" for reducible chains.
    """
    if isinstance(source_or_matrix, JointSource):
        if source_or_matrix.kind != MARKOV:
            raise SourceError("stationary_distribution needs a joint-markov source")
        P = source_or_matrix.transition
    else:
        P = np.asarray(source_or_matrix, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise SourceError("transition matrix must be square")
    _check_rows(P, "transition matrix")
    if not _is_irreducible(P > 0):
        raise SourceError("no unique stationary distribution (chain is reducible)")
    k = P.shape[0]
    A = np.vstack([P.T - np.eye(k), np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.abs(pi @ P - pi).max() > STATIONARY_TOL:
        raise SourceError("stationary solve did not converge")
    return pi


@dataclass(frozen=True)
class JointSource:
    """A stationary pair process over finite alphabets.

    Build with :meth:`iid` or :meth:`markov`; the constructor validates.
    """

    x_alphabet_size: int
    y_alphabet_size: int
    kind: str
    joint: np.ndarray | None = None        # iid-pair: (|X|, |Y|) table
    transition: np.ndarray | None = None   # joint-markov: (S, S) over pair states
    stationary: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        kx, ky = self.x_alphabet_size, self.y_alphabet_size
        if kx < 2 or ky < 2:
            raise SourceError("alphabet sizes must be >= 2")
        if kx > 255 or ky > 255:
            raise SourceError("alphabet sizes must fit in one byte")
        if self.kind == IID:
            table = np.asarray(self.joint, dtype=float)
            if table.shape != (kx, ky):
                raise SourceError(f"joint table must have shape ({kx}, {ky})")
            _check_rows(table.reshape(1, -1), "joint table")
            table.setflags(write=False)
            object.__setattr__(self, "joint", table)
        elif self.kind == MARKOV:
            P = np.asarray(self.transition, dtype=float)
            S = kx * ky
            if P.shape != (S, S):
                raise SourceError(f"transition matrix must have shape ({S}, {S})")
            _check_rows(P, "transition matrix")
            pi = stationary_distribution(P)
            if not _is_primitive(P > 0):
                raise SourceError("joint-markov chain must be aperiodic")
            P.setflags(write=False)
            pi.setflags(write=False)
            object.__setattr__(self, "transition", P)
            object.__setattr__(self, "stationary", pi)
        else:
            raise SourceError(f"unknown source kind {self.kind!r}")

    @classmethod
    def iid(cls, joint) -> "JointSource":
        joint = np.asarray(joint, dtype=float)
        return cls(joint.shape[0], joint.shape[1], IID, joint=joint)

    @classmethod
    def markov(cls, transition, x_alphabet_size: int, y_alphabet_size: int) -> "JointSource":
        return cls(x_alphabet_size, y_alphabet_size, MARKOV, transition=transition)

    @property
    def n_states(self) -> int:
        return self.x_alphabet_size * self.y_alphabet_size

    def state_x(self) -> np.ndarray:
        return np.arange(self.n_states) // self.y_alphabet_size

    def state_y(self) -> np.ndarray:
        return np.arange(self.n_states) % self.y_alphabet_size

    def pair_marginal(self) -> np.ndarray:
        """Single-step distribution over pair states."""
        if self.kind == IID:
            return self.joint.ravel()
        return self.stationary

    def to_dict(self) -> dict:
        d = {"kind": self.kind,
             "x_alphabet_size": self.x_alphabet_size,
             "y_alphabet_size": self.y_alphabet_size}
        if self.kind == IID:
            d["joint"] = self.joint.tolist()
        else:
            d["transition"] = self.transition.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "JointSource":
        allowed = {"kind", "x_alphabet_size", "y_alphabet_size", "joint", "transition"}
        unknown = set(d) - allowed
        if unknown:
            raise SourceError(f"unknown source field(s): {sorted(unknown)}")
        for key in ("kind", "x_alphabet_size", "y_alphabet_size"):
            if key not in d:
                raise SourceError(f"source.{key} is required")
        kind = d["kind"]
        table_key = "joint" if kind == IID else "transition"
        if kind in (IID, MARKOV) and table_key not in d:
            raise SourceError(f"source.{table_key} is required for kind {kind!r}")
        return cls(int(d["x_alphabet_size"]), int(d["y_alphabet_size"]), kind,
                   joint=d.get("joint"), transition=d.get("transition"))


def dsbs(crossover: float) -> JointSource:
    """Doubly symmetric binary source: X a fair bit, Y = X xor Bernoulli(crossover)."""
    p = crossover
    return JointSource.iid([[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])


def copy_source() -> JointSource:
    """Y = X with X a fair bit."""
    return dsbs(0.0)


def independent_bits() -> JointSource:
    return JointSource.iid(np.full((2, 2), 0.25))


def markov_bsc(flip: float, crossover: float) -> JointSource:
    """X a symmetric binary Markov chain with the given flip rate; Y = X xor noise.

    The noise is i.i.d. Bernoulli(crossover), so the y-marginal is hidden Markov.
    """
    if not (0 < flip < 1 and 0 < crossover < 1):
        raise SourceError("flip and crossover must lie strictly in (0, 1)")
    Q = np.array([[1 - flip, flip], [flip, 1 - flip]])
    noise = np.array([[1 - crossover, crossover], [crossover, 1 - crossover]])
    P = np.zeros((4, 4))
    for x in range(2):
        for y in range(2):
            for x2 in range(2):
                for y2 in range(2):
                    P[2 * x + y, 2 * x2 + y2] = Q[x, x2] * noise[x2, y2]
    return JointSource.markov(P, 2, 2)


@dataclass(frozen=True)
class RateRegion:
    """The three Slepian-Wolf thresholds of a source, in bits/symbol."""

    h: float
    h_given_x: float
    h_given_y: float
    method: str = "exact"              # "exact" | "estimated"
    block_length: int | None = None    # block cap used for estimated entries

    @property
    def h_x(self) -> float:
        """Entropy rate of the x-marginal process."""
        return self.h - self.h_given_x

    @property
    def h_y(self) -> float:
        return self.h - self.h_given_y

    def contains(self, a: int, b: int, margin: float = 0.0) -> bool:
        """Whether (log a, log b) lies strictly inside the achievable region."""
        la = np.log2(a) if a > 0 else -np.inf
        lb = np.log2(b) if b > 0 else -np.inf
        return bool(la > self.h_given_y + margin and lb > self.h_given_x + margin
                    and la + lb > self.h + margin)


def marginal_block_entropies(source: JointSource, coord: str, k_max: int) -> np.ndarray:
    """Exact block entropies H(U_1..U_k), k = 1..k_max, of one coordinate process.

    ``coord`` is ``"x"``, ``"y"`` or ``"joint"``.  For Markov sources the
    marginal is a hidden Markov process; the forward recursion enumerates all
    words, so ``k_max`` is clipped to keep the table under ``BLOCK_TABLE_CAP``.
    """
    emit = {"x": source.state_x(), "y": source.state_y(),
            "joint": np.arange(source.n_states)}[coord]
    K = int(emit.max()) + 1
    S = source.n_states
    if source.kind == IID:
        p1 = np.bincount(emit, weights=source.joint.ravel(), minlength=K)
        return entropy_bits(p1) * np.arange(1, k_max + 1)
    P, pi = source.transition, source.stationary
    onehot = (emit[:, None] == np.arange(K)[None, :]).astype(float)  # (S, K)
    alpha = pi[None, :] * onehot.T                                   # (K, S)
    out = [entropy_bits(alpha.sum(axis=1))]
    for _ in range(1, k_max):
        if alpha.shape[0] * K * S > BLOCK_TABLE_CAP:
            break
        step = alpha @ P                                             # (W, S)
        alpha = (step[:, None, :] * onehot.T[None, :, :]).reshape(-1, S)
        out.append(entropy_bits(alpha.sum(axis=1)))
    return np.array(out)


def marginal_entropy_rates(source: JointSource, coord: str,
                           k_max: int = DEFAULT_BLOCK_CAP) -> np.ndarray:
    """Block-entropy differences h_k = H(k+1) - H(k) for k = 1..(cap)."""
    H = marginal_block_entropies(source, coord, k_max + 1)
    return np.diff(H)


def rate_region(source: JointSource, block_cap: int = DEFAULT_BLOCK_CAP) -> RateRegion:
    """Entropy rate h and the conditional rates h(.|F_X), h(.|F_Y)."""
    if source.kind == IID:
        H = entropy_bits(source.joint)
        hx = entropy_bits(source.joint.sum(axis=1))
        hy = entropy_bits(source.joint.sum(axis=0))
        return RateRegion(H, H - hx, H - hy, "exact", None)
    P, pi = source.transition, source.stationary
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(P > 0, np.log2(P), 0.0)
    h = float(-(pi[:, None] * P * logs).sum())
    hx_rates = marginal_entropy_rates(source, "x", block_cap)
    hy_rates = marginal_entropy_rates(source, "y", block_cap)
    k_used = min(len(hx_rates), len(hy_rates))
    hx, hy = float(hx_rates[k_used - 1]), float(hy_rates[k_used - 1])
    return RateRegion(h, max(h - hx, 0.0), max(h - hy, 0.0), "estimated", k_used)


@dataclass(frozen=True)
class Orbit:
    """One sampled trajectory: aligned x- and y-tracks."""

    x: np.ndarray
    y: np.ndarray
    x_alphabet_size: int
    y_alphabet_size: int
    seed: int | None = None

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.uint8)
        y = np.ascontiguousarray(self.y, dtype=np.uint8)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y tracks must be 1-d and equally long")
        if len(x) and (x.max() >= self.x_alphabet_size or y.max() >= self.y_alphabet_size):
            raise ValueError("orbit symbol outside alphabet")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def n(self) -> int:
        return len(self.x)

    def joint(self) -> np.ndarray:
        """Pair-state track ``x * |Y| + y``."""
        return (self.x.astype(np.int64) * self.y_alphabet_size + self.y).astype(np.uint16)

    def with_tracks(self, x=None, y=None) -> "Orbit":
        return Orbit(self.x if x is None else x, self.y if y is None else y,
                     self.x_alphabet_size, self.y_alphabet_size, self.seed)

    def to_bytes(self) -> bytes:
        header = _ORBIT_HEADER.pack(ORBIT_MAGIC, ORBIT_VERSION, self.x_alphabet_size,
                                    self.y_alphabet_size, self.n)
        body = np.empty(2 * self.n, dtype=np.uint8)
        body[0::2] = self.x
        body[1::2] = self.y
        return header + body.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Orbit":
        if len(data) < _ORBIT_HEADER.size:
            raise ValueError("truncated orbit header")
        magic, version, kx, ky, n = _ORBIT_HEADER.unpack_from(data)
        if magic != ORBIT_MAGIC or version != ORBIT_VERSION:
            raise ValueError("not an orbit file (bad magic/version)")
        body = np.frombuffer(data, dtype=np.uint8, offset=_ORBIT_HEADER.size)
        if len(body) != 2 * n:
            raise ValueError(f"orbit body has {len(body)} bytes, header says {2 * n}")
        return cls(body[0::2].copy(), body[1::2].copy(), kx, ky)


def dump_orbit(orbit: Orbit, path) -> None:
    Path(path).write_bytes(orbit.to_bytes())


def load_orbit(path) -> Orbit:
    return Orbit.from_bytes(Path(path).read_bytes())


def sample_orbit(source: JointSource, n: int, seed: int) -> Orbit:
    """Sample ``n`` steps of the stationary pair process under ``seed``."""
    if n < 1:
        raise ValueError("orbit length must be >= 1")
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    if source.kind == IID:
        states = rng.choice(source.n_states, size=n, p=source.joint.ravel())
    else:
        cum = [list(accumulate(row)) for row in source.transition.tolist()]
        for row in cum:
            row[-1] = 1.0
        u = rng.random(n).tolist()
        s = int(np.searchsorted(np.cumsum(source.stationary), u[0], side="right"))
        s = min(s, source.n_states - 1)
        out = [0] * n
        out[0] = s
        for i in range(1, n):
            s = bisect_right(cum[s], u[i])
            out[i] = s
        states = np.array(out, dtype=np.int64)
    ky = source.y_alphabet_size
    return Orbit((states // ky).astype(np.uint8), (states % ky).astype(np.uint8),
                 source.x_alphabet_size, ky, seed)
