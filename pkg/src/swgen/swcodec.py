"""Distributed coding of a correlated pair: building (P_X, P_Y) and decoding.

The x-side encoder paints long x-names over an x-only tower ``L`` with
codewords of ``A(M_L - ell, ell, a)``; the y-side encoder paints y-names
over a y-only tower ``S`` with codewords of ``A(M_S - ell, ell, b)``.  The
decoder sees only the two painted tracks.  It recovers both base sets from
the run-length markers, then

1. on each ``L`` block, looks for the x-name whose painted codeword matches
   ``P_X`` among the x-names jointly typical with the y-names compatible
   with the ``P_Y`` block (the L stage);
2. on each ``S`` block, looks for the y-name whose codeword matches ``P_Y``
   among the y-names jointly typical with the already decoded x positions
   (the S stage).

Finite-scale model.  Candidate sets are assembled from names observed on
the training orbit.  Names that were never observed are accounted for by a
virtual collision count: the number of further candidates sharing the
observed codeword is drawn as Poisson(2**(B - log2 |codebook|)), where
``B`` is the declared log2 bound on the candidate set.  The draw is seeded
by the lookup key, so decoding stays a pure function of its inputs.  A
stage succeeds only when exactly one observed candidate remains and the
virtual count is 0; anything else is an erasure.  Without the virtual term
a lookup table would decode any source perfectly, including ones outside
the achievable region.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .codebooks import PaintingData, codebook, make_painting_data
from .painting import (ZoneError, head_length, make_admissible, paint, recover_bases,
                       recover_bases_repaint, repaint)
from .partitions import SymbolTrack, empirical_block_entropy, partition_distance
from .seeding import derive_seed, keyed_rng
from .sources import JointSource, Orbit, RateRegion, rate_region, sample_orbit
from .towers import Tower, build_tower, names_along_tower
from .typicality import NameMap, NameModel, binary_entropy, conditional_name_map

ERASED = -1
# virtual counts above 2**60 are treated as "many" without sampling
MANY = 1 << 62
LOG2_MANY = 60.0
LOG2_NEGLIGIBLE = -64.0

CSV_COLUMNS = ("source", "a", "b", "M_S", "M_L", "ell", "eta", "coverage_S", "coverage_L",
               "psi_singleton_frac", "phi5_singleton_frac", "error_frac", "runtime_ms")


class RegionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PairParams:
    a: int = 2                    # parts of P_X
    b: int = 2                    # parts of P_Y
    ell: int = 10                 # run parameter of the painting codebooks
    eta: float = 0.02             # construction slack in the compressed-name rate
    typ_slack: float = 0.07       # width of the typicality bands, bits/symbol
    height_s: int = 2000          # M_S, y-only tower
    height_l: int = 2000          # M_L, x-only tower
    coverage_s: float = 0.99
    coverage_l: float = 0.99
    seed: int = 0
    eps0: float = 0.1             # required slack log a + log b - h
    margin: float = 0.0           # slack on the two single-rate conditions
    marker_window: int = 16
    min_blocks: int = 50
    # one repainting round on a taller x-only tower
    height_t: int = 32000
    repaint_ell: int = 40
    coverage_t: float = 0.98
    improve_eps: float = 0.004
    improve_delta: float = 0.004

    def __post_init__(self):
        if self.a < 1 or self.b < 1:
            raise ValueError("a and b must be >= 1")
        if self.ell < 1 or self.repaint_ell < 1:
            raise ValueError("run parameters must be >= 1")
        if self.height_s <= self.ell or self.height_l <= self.ell:
            raise ValueError("tower heights must exceed ell")
        if not (0 <= self.eta < 0.5 and self.typ_slack > 0):
            raise ValueError("need 0 <= eta < 1/2 and typ_slack > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PairParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown params field(s): {sorted(unknown)}")
        return cls(**d)

    def region_problems(self, region: RateRegion) -> list[str]:
        la, lb = _log2(self.a), _log2(self.b)
        out = []
        if not la > region.h_given_y + self.margin:
            out.append(f"log2 a = {la:.4f} <= h(T|F_Y) = {region.h_given_y:.4f}")
        if not lb > region.h_given_x + self.margin:
            out.append(f"log2 b = {lb:.4f} <= h(T|F_X) = {region.h_given_x:.4f}")
        if not la + lb > region.h + self.eps0:
            out.append(f"log2 a + log2 b = {la + lb:.4f} <= h + eps0 = {region.h + self.eps0:.4f}")
        return out


def _log2(k: int) -> float:
    return math.log2(k) if k > 0 else -math.inf


def f_bound(eps: float, delta: float, eps0: float, h: float, a: int, b: int,
            kx: int, ky: int) -> float:
    """2 (H(eps) + H(delta) + eps log2 kx + delta log2 ky) / (log2 a + log2 b - eps0 - h)."""
    denom = _log2(a) + _log2(b) - eps0 - h
    if not denom > 0:
        raise ValueError(f"f_bound denominator log a + log b - eps0 - h = {denom} is not positive")
    num = binary_entropy(eps) + binary_entropy(delta) + eps * math.log2(kx) + delta * math.log2(ky)
    return 2 * num / denom


# ---------------------------------------------------------------------------
# fiber bounds (log2 of declared candidate-set sizes)

@dataclass(frozen=True)
class Rates:
    h: float
    h_given_x: float
    h_given_y: float
    h_x: float
    h_y: float

    @classmethod
    def of(cls, region: RateRegion) -> "Rates":
        return cls(region.h, region.h_given_x, region.h_given_y, region.h_x, region.h_y)


def compressed_name_rate(rates: Rates, params: PairParams, ky: int) -> float:
    """Per-symbol log2 size of the y-names compatible with a long P_Y name."""
    eta = params.eta
    return (rates.h_y - _log2(params.b) + 2 * eta * (math.log2(ky) + 2)
            + binary_entropy(eta))


def l_stage_log2_bound(rates: Rates, params: PairParams, ky: int) -> float:
    """log2 bound on the x-names compatible with one P_Y name over an L block."""
    per_symbol = compressed_name_rate(rates, params, ky) + rates.h_given_y + 2 * params.typ_slack
    return params.height_l * max(per_symbol, 0.0)


def s_stage_log2_bound(rates: Rates, params: PairParams, ky: int, unknown: int) -> float:
    """log2 bound on the y-names compatible with an S block whose x is known off ``unknown`` positions."""
    e = 2 * params.typ_slack
    known = params.height_s - unknown
    return known * (rates.h_given_x + e) + unknown * min(math.log2(ky), rates.h_y + e)


def virtual_count(seed: int, key: bytes, log2_lam: float) -> int:
    """Poisson(2**log2_lam) drawn from a generator keyed on ``key``."""
    if log2_lam > LOG2_MANY:
        return MANY
    if log2_lam < LOG2_NEGLIGIBLE:
        return 0
    return int(keyed_rng(seed, key).poisson(2.0 ** log2_lam))


# ---------------------------------------------------------------------------
# codec

def _band_mask(model: NameModel, names: np.ndarray, eps: float) -> np.ndarray:
    """Names whose exact log2 probability lies within ``(h +- eps) M``."""
    if len(names) == 0:
        return np.zeros(0, dtype=bool)
    M = names.shape[1]
    lp = model.log2prob(names)
    h = model.entropy_rate
    return (lp >= -(h + eps) * M) & (lp <= -(h - eps) * M)


@dataclass
class PairCodec:
    params: PairParams
    source_alphabets: tuple[int, int]
    rates: Rates
    p_x: SymbolTrack
    p_y: SymbolTrack
    tower_s: Tower
    tower_l: Tower
    pd_f: PaintingData | None      # y-names over S -> A(M_S - ell, ell, b)
    pd_g: PaintingData | None      # x-names over L -> A(M_L - ell, ell, a)
    phi0: NameMap                  # x-name over S -> jointly typical y-names
    phi3: NameMap                  # y-name over L -> jointly typical x-names
    psi_table: dict                # P_Y name over S -> [(x bytes, y bytes)] in phi0
    phi4_table: dict               # P_Y name over L -> [(x bytes, P_X codeword bytes)]
    diagnostics: dict = field(default_factory=dict)

    @property
    def virtual_seed(self) -> int:
        return derive_seed(self.params.seed, "virtual")

    def encode(self, orbit: Orbit) -> tuple[SymbolTrack, SymbolTrack]:
        """Paint a (possibly fresh) orbit with this codec's towers rule and painting data."""
        p = self.params
        t_s = _tower(orbit, "y", p.height_s, p.coverage_s, p, "S")
        t_l = _tower(orbit, "x", p.height_l, p.coverage_l, p, "L")
        return _paint_x(orbit.x, t_l, self.pd_g, p), _paint_y(orbit.y, t_s, self.pd_f, p)


def _tower(orbit: Orbit, scope: str, height: int, target: float, p: PairParams, label: str) -> Tower:
    return build_tower(orbit, scope, height, p.marker_window, target,
                       seed=derive_seed(p.seed, "tower", label))


def _paint_x(x: np.ndarray, tower: Tower, pd: PaintingData | None, p: PairParams) -> SymbolTrack:
    # reads the x-track only
    if pd is None:
        return SymbolTrack(np.zeros(len(x), dtype=np.uint8), 1)
    return paint(tower, names_along_tower(tower, x), pd, p.ell)


def _paint_y(y: np.ndarray, tower: Tower, pd: PaintingData | None, p: PairParams) -> SymbolTrack:
    if pd is None:
        return SymbolTrack(np.zeros(len(y), dtype=np.uint8), 1)
    return paint(tower, names_along_tower(tower, y), pd, p.ell)


def _rows(names: np.ndarray) -> list[bytes]:
    names = np.ascontiguousarray(names, dtype=np.uint8)
    return [r.tobytes() for r in names]


def build_pair(orbit: Orbit, source: JointSource, params: PairParams,
               region: RateRegion | None = None) -> PairCodec:
    """Build towers, painting data, P_X, P_Y and the decoder tables from one orbit."""
    p = params
    region = rate_region(source) if region is None else region
    problems = p.region_problems(region)
    if problems:
        warnings.warn("parameters outside the rate region: " + "; ".join(problems),
                      RegionWarning, stacklevel=2)
    rates = Rates.of(region)
    kx, ky = orbit.x_alphabet_size, orbit.y_alphabet_size
    eps = p.typ_slack

    t_s = _tower(orbit, "y", p.height_s, p.coverage_s, p, "S")
    t_l = _tower(orbit, "x", p.height_l, p.coverage_l, p, "L")
    for name, t in (("S", t_s), ("L", t_l)):
        if len(t.complete_bases) == 0:
            raise ValueError(f"tower {name} has no complete blocks")
        if len(t.complete_bases) < p.min_blocks:
            raise ValueError(f"tower {name} has {len(t.complete_bases)} complete blocks, "
                             f"fewer than min_blocks={p.min_blocks}; use a longer orbit")

    pd_f = (make_painting_data(ky, p.height_s, codebook(p.height_s - p.ell, p.ell, p.b),
                               derive_seed(p.seed, "paint", "f")) if p.b >= 2 else None)
    pd_g = (make_painting_data(kx, p.height_l, codebook(p.height_l - p.ell, p.ell, p.a),
                               derive_seed(p.seed, "paint", "g")) if p.a >= 2 else None)
    p_y = _paint_y(orbit.y, t_s, pd_f, p)
    p_x = _paint_x(orbit.x, t_l, pd_g, p)

    mx, my = NameModel(source, "x"), NameModel(source, "y")
    mj, mjyx = NameModel(source, "joint"), NameModel(source, "joint_yx")

    # S side: Psi candidates are the y-names in phi0(x-name) sharing the P_Y codeword
    phi0 = conditional_name_map(t_s, orbit.x, orbit.y, eps, rates.h_given_x, mx, mj)
    xs = names_along_tower(t_s, orbit.x).names
    ys = names_along_tower(t_s, orbit.y).names
    pys = names_along_tower(t_s, p_y.values).names
    psi_table: dict[bytes, list] = {}
    in_phi0 = 0
    for xb, yb, mb in zip(_rows(xs), _rows(ys), _rows(pys)):
        if yb in phi0[xb]:
            in_phi0 += 1
            psi_table.setdefault(mb, []).append((xb, yb))

    # L side: y-names compatible with the P_Y name, then x-names jointly typical with them
    phi3 = conditional_name_map(t_l, orbit.y, orbit.x, eps, rates.h_given_y, my, mjyx)
    xl = names_along_tower(t_l, orbit.x).names
    yl = names_along_tower(t_l, orbit.y).names
    pyl = names_along_tower(t_l, p_y.values).names
    pxl = names_along_tower(t_l, p_x.values).names[:, :p.height_l - p.ell]
    phi4_table: dict[bytes, list] = {}
    in_phi4 = 0
    for xb, yb, mb, cb in zip(_rows(xl), _rows(yl), _rows(pyl), _rows(pxl)):
        if xb in phi3[yb]:
            in_phi4 += 1
            phi4_table.setdefault(mb, []).append((xb, cb))

    codec = PairCodec(p, (kx, ky), rates, p_x, p_y, t_s, t_l, pd_f, pd_g, phi0, phi3,
                      psi_table, phi4_table)
    d = codec.diagnostics
    d["region_problems"] = problems
    d["coverage_S"], d["coverage_L"] = t_s.coverage, t_l.coverage
    d["blocks_S"], d["blocks_L"] = len(t_s.complete_bases), len(t_l.complete_bases)
    d["phi0_coverage"] = in_phi0 / len(xs)
    d["phi4_coverage"] = in_phi4 / len(xl)
    d["l_stage_log2_bound"] = l_stage_log2_bound(rates, p, ky)
    d["log2_codebook_f"] = pd_f.book.log2_count() if pd_f else 0.0
    d["log2_codebook_g"] = pd_g.book.log2_count() if pd_g else 0.0
    d["phi1_defined_frac"] = _phi1_defined_fraction(codec, pys, ys, my)
    d["h_p_x_est"] = empirical_block_entropy(p_x, 8) if p_x.parts > 1 else 0.0
    d["h_p_y_est"] = empirical_block_entropy(p_y, 8) if p_y.parts > 1 else 0.0
    return codec


def _phi1_defined_fraction(codec: PairCodec, pys, ys, my: NameModel) -> float:
    """Share of S blocks where |f^-1(n) & N| stays below the cutoff 2^{M(h_Y - log b + 2 eta)}.

    ``N`` is the set of typical y-names; the unobserved part of the fiber is
    the virtual count against ``|N| <= 2^{M (h_Y + eps)}``.
    """
    p, r = codec.params, codec.rates
    if codec.pd_f is None:
        return 0.0
    M = p.height_s
    typical = _band_mask(my, ys, p.typ_slack)
    log2_lam = M * (r.h_y + p.typ_slack) - codec.pd_f.book.log2_count()
    cutoff = M * (r.h_y - _log2(p.b) + 2 * p.eta)
    defined = 0
    for ok, mb in zip(typical, _rows(pys)):
        if not ok:
            continue
        if log2_lam > LOG2_MANY:
            defined += log2_lam < cutoff
            continue
        size = 1 + virtual_count(codec.virtual_seed, b"phi1" + mb, log2_lam)
        defined += size > 0 and math.log2(size) < cutoff
    return defined / len(ys)


# ---------------------------------------------------------------------------
# decoding

@dataclass
class ReconstructionReport:
    """Decoded generator tracks (``-1`` = erasure) and stage-wise failure counts."""

    x_hat: np.ndarray
    y_hat: np.ndarray
    counts: dict
    error_frac: float | None = None
    disagreements: int | None = None

    @property
    def n(self) -> int:
        return len(self.x_hat)

    @property
    def psi_singleton_frac(self) -> float:
        c = self.counts
        return c["psi_singleton"] / c["s_blocks"] if c["s_blocks"] else 0.0

    @property
    def phi5_singleton_frac(self) -> float:
        c = self.counts
        return c["phi5_singleton"] / c["l_blocks"] if c["l_blocks"] else 0.0

    @property
    def failure_positions(self) -> int:
        c = self.counts
        return (c["x_off_tower"] + c["x_stage_failed"] + c["y_off_tower"]
                + c["y_stage_failed"] + (self.disagreements or 0))

    def score(self, x, y) -> "ReconstructionReport":
        """Fill in the error fraction: erasures plus disagreements against the true tracks."""
        x, y = np.asarray(x), np.asarray(y)
        erased = (self.x_hat == ERASED) | (self.y_hat == ERASED)
        wrong = ~erased & ((self.x_hat != x) | (self.y_hat != y))
        self.disagreements = int(np.count_nonzero(wrong))
        self.error_frac = float(np.count_nonzero(erased | wrong)) / len(x) if len(x) else 0.0
        return self

    def summary(self) -> dict:
        return {**self.counts, "psi_singleton_frac": self.psi_singleton_frac,
                "phi5_singleton_frac": self.phi5_singleton_frac,
                "error_frac": self.error_frac, "disagreements": self.disagreements}


def _blank_counts() -> dict:
    keys = ("l_blocks", "phi5_singleton", "phi5_nonsingleton", "phi5_undefined",
            "s_blocks", "psi_singleton", "psi_nonsingleton", "psi_undefined",
            "t_blocks", "t_singleton", "t_nonsingleton", "t_undefined",
            "x_off_tower", "x_stage_failed", "y_off_tower", "y_stage_failed")
    return dict.fromkeys(keys, 0)


def _classify(counts: dict, prefix: str, observed: int, virtual: int) -> bool:
    if observed == 0:
        counts[f"{prefix}_undefined"] += 1
        return False
    if observed + virtual > 1:
        counts[f"{prefix}_nonsingleton"] += 1
        return False
    counts[f"{prefix}_singleton"] += 1
    return True


def _l_stage(codec: PairCodec, px: np.ndarray, py: np.ndarray, x_hat: np.ndarray,
             counts: dict, attempted: np.ndarray) -> None:
    p = codec.params
    if codec.pd_g is None:
        return
    M, L = p.height_l, p.height_l - p.ell
    n = len(px)
    log2_lam = l_stage_log2_bound(codec.rates, p, codec.source_alphabets[1]) \
        - codec.pd_g.book.log2_count()
    for b in recover_bases(px, p.ell).tolist():
        if b + M > n:
            continue
        counts["l_blocks"] += 1
        attempted[b:b + M] = True
        mb = py[b:b + M].tobytes()
        cb = px[b:b + L].tobytes()
        cands = {xb for xb, c in codec.phi4_table.get(mb, ()) if c == cb}
        v = virtual_count(codec.virtual_seed, b"L" + mb + cb, log2_lam)
        if _classify(counts, "phi5", len(cands), v):
            x_hat[b:b + M] = np.frombuffer(next(iter(cands)), dtype=np.uint8)


def _s_stage(codec: PairCodec, py: np.ndarray, x_hat: np.ndarray, y_hat: np.ndarray,
             counts: dict, attempted: np.ndarray) -> None:
    p = codec.params
    if codec.pd_f is None:
        return
    M = p.height_s
    n = len(py)
    ky = codec.source_alphabets[1]
    log2_book = codec.pd_f.book.log2_count()
    for b in recover_bases(py, p.ell).tolist():
        if b + M > n:
            continue
        counts["s_blocks"] += 1
        attempted[b:b + M] = True
        mb = py[b:b + M].tobytes()
        xs = x_hat[b:b + M]
        known = xs != ERASED
        unknown = M - int(np.count_nonzero(known))
        kx_bytes = np.where(known, xs, 255).astype(np.uint8)
        cands = set()
        for xb, yb in codec.psi_table.get(mb, ()):
            xv = np.frombuffer(xb, dtype=np.uint8)
            if np.array_equal(xv[known], xs[known]):
                cands.add(yb)
        log2_lam = s_stage_log2_bound(codec.rates, p, ky, unknown) - log2_book
        v = virtual_count(codec.virtual_seed, b"S" + mb + kx_bytes.tobytes(), log2_lam)
        if _classify(counts, "psi", len(cands), v):
            y_hat[b:b + M] = np.frombuffer(next(iter(cands)), dtype=np.uint8)


def _finish(x_hat, y_hat, counts, x_attempted, y_attempted, truth) -> ReconstructionReport:
    counts["x_off_tower"] = int(np.count_nonzero(~x_attempted))
    counts["x_stage_failed"] = int(np.count_nonzero(x_attempted & (x_hat == ERASED)))
    counts["y_off_tower"] = int(np.count_nonzero(~y_attempted))
    counts["y_stage_failed"] = int(np.count_nonzero(y_attempted & (y_hat == ERASED)))
    rep = ReconstructionReport(x_hat, y_hat, counts)
    if truth is not None:
        rep.score(truth.x, truth.y)
    return rep


def decode(codec: PairCodec, p_x_track, p_y_track, truth: Orbit | None = None) -> ReconstructionReport:
    """Reconstruct the generator tracks from the two painted tracks.

    Only ``p_x_track``, ``p_y_track`` and the codec's tables are read;
    ``truth`` is used after decoding, to score the result.
    """
    px = np.ascontiguousarray(_vals(p_x_track), dtype=np.uint8)
    py = np.ascontiguousarray(_vals(p_y_track), dtype=np.uint8)
    if px.shape != py.shape:
        raise ValueError("P_X and P_Y tracks must have equal length")
    n = len(px)
    x_hat = np.full(n, ERASED, dtype=np.int16)
    y_hat = np.full(n, ERASED, dtype=np.int16)
    counts = _blank_counts()
    xa = np.zeros(n, dtype=bool)
    ya = np.zeros(n, dtype=bool)
    _l_stage(codec, px, py, x_hat, counts, xa)
    _s_stage(codec, py, x_hat, y_hat, counts, ya)
    return _finish(x_hat, y_hat, counts, xa, ya, truth)


def _vals(t) -> np.ndarray:
    return t.values if isinstance(t, SymbolTrack) else np.asarray(t)


# ---------------------------------------------------------------------------
# one repainting round

@dataclass
class RepaintStage:
    """Decoder state added by a repainting round on the x-only tower T."""

    tower: Tower
    pd_psi: PaintingData          # x-names over T -> A(floor(fM), repaint_ell, a)
    f: float
    head: int
    table: dict                   # head codeword -> [x-name bytes]
    ball_radius: float
    free_rate: float              # per-symbol bound for x positions left unknown


@dataclass
class ImprovementReport:
    p_x: SymbolTrack
    stage: RepaintStage
    f: float
    distance_to_old: float
    distance_to_fixed: float
    fix_distance: float
    bound: float                  # f + 2 ell_r / M_T + (1 - coverage_T)
    coverage_t: float
    before: ReconstructionReport | None = None
    after: ReconstructionReport | None = None

    def summary(self) -> dict:
        out = {"f": self.f, "head": self.stage.head, "distance_to_old": self.distance_to_old,
               "distance_to_fixed": self.distance_to_fixed, "fix_distance": self.fix_distance,
               "bound": self.bound, "coverage_T": self.coverage_t}
        if self.before is not None and self.after is not None:
            out["error_before"] = self.before.error_frac
            out["error_after"] = self.after.error_frac
            out["t_singleton_frac"] = (self.after.counts["t_singleton"] / self.after.counts["t_blocks"]
                                       if self.after.counts["t_blocks"] else 0.0)
        return out


def repaint_round(current: SymbolTrack, orbit: Orbit, a: int, f: float, height: int,
                  ell_r: int, keep: int, coverage: float, seed: int,
                  marker_window: int = 16) -> tuple[SymbolTrack, SymbolTrack, Tower, PaintingData]:
    """Make ``current`` ell_r-admissible, then repaint the first floor(f M) levels of a new x-only tower.

    Returns the repainted track, the admissible intermediate track, the tower
    and the repainting data.  Raises :class:`ZoneError` when the head and the
    zero tail do not fit in the tower height.
    """
    head = head_length(f, height)
    if head + 2 * ell_r > height:
        raise ZoneError(f"repaint zone floor(f M) + 2 ell = {head + 2 * ell_r} exceeds M = {height}")
    fixed = make_admissible(current, ell_r, keep)
    tower = build_tower(orbit, "x", height, marker_window, coverage, seed=derive_seed(seed, "tower", "T"))
    if head:
        pd = make_painting_data(orbit.x_alphabet_size, height, codebook(head, ell_r, max(a, 2)),
                                derive_seed(seed, "paint", "psi"))
    else:
        pd = None
    new = repaint(tower, fixed, names_along_tower(tower, orbit.x), pd, f, ell_r)
    return new, fixed, tower, pd


def improve_pair(codec: PairCodec, orbit: Orbit, source: JointSource | None = None,
                 f: float | None = None, current: SymbolTrack | None = None,
                 score: bool = True) -> ImprovementReport:
    """One repainting round on P_X, with the decoder extended by a T stage.

    ``f`` defaults to ``f_bound(improve_eps, improve_delta, eps0, h, a, b, kx, ky)``.
    Fix-up flips keep ``ell`` zeros before every L base so the L stage still
    finds its blocks in the copied zones.
    """
    p = codec.params
    kx, ky = codec.source_alphabets
    if f is None:
        f = f_bound(p.improve_eps, p.improve_delta, p.eps0, codec.rates.h, p.a, p.b, kx, ky)
    current = codec.p_x if current is None else current
    new, fixed, tower, pd = repaint_round(current, orbit, p.a, f, p.height_t, p.repaint_ell, p.ell,
                                          p.coverage_t, p.seed, p.marker_window)
    head = head_length(f, p.height_t)
    table: dict[bytes, list] = {}
    if pd is not None:
        tn = names_along_tower(tower, orbit.x).names
        mask = (_band_mask(NameModel(source, "x"), tn, p.typ_slack)
                if source is not None else np.ones(len(tn), dtype=bool))
        heads = names_along_tower(tower, new.values).names[:, :head]
        for ok, xb, hb in zip(mask, _rows(tn), _rows(heads)):
            if ok:
                table.setdefault(hb, []).append(xb)
    r = codec.rates
    free = min(math.log2(kx), r.h - _log2(p.b) + p.eps0 + 2 * p.eta)
    stage = RepaintStage(tower, pd, f, head, table, p.improve_eps, max(free, 0.0))
    bound = f + 2 * p.repaint_ell / p.height_t + (1 - tower.coverage)
    rep = ImprovementReport(new, stage, f, partition_distance(new, current),
                            partition_distance(new, fixed), partition_distance(fixed, current),
                            bound, tower.coverage)
    if score:
        rep.before = decode(codec, current, codec.p_y, truth=orbit)
        rep.after = decode_repainted(codec, stage, new, codec.p_y, truth=orbit)
    return rep


def _t_stage(codec: PairCodec, stage: RepaintStage, px: np.ndarray, x_hat: np.ndarray,
             counts: dict, attempted: np.ndarray) -> None:
    if stage.pd_psi is None:
        return
    M, head = stage.tower.height, stage.head
    kx = codec.source_alphabets[0]
    r = stage.ball_radius
    ball_rate = binary_entropy(r) + r * math.log2(kx)
    log2_book = stage.pd_psi.book.log2_count()
    n = len(px)
    for b in recover_bases_repaint(px, stage.pd_psi.book.ell).tolist():
        if b + M > n:
            continue
        counts["t_blocks"] += 1
        attempted[b:b + M] = True
        hb = px[b:b + head].tobytes()
        xs = x_hat[b:b + M]
        known = xs != ERASED
        nk = int(np.count_nonzero(known))
        cands = set()
        for xb in stage.table.get(hb, ()):
            xv = np.frombuffer(xb, dtype=np.uint8)
            if np.array_equal(xv[known], xs[known]):
                cands.add(xb)
        log2_lam = nk * ball_rate + (M - nk) * stage.free_rate - log2_book
        kx_bytes = np.where(known, xs, 255).astype(np.uint8)
        v = virtual_count(codec.virtual_seed, b"T" + hb + kx_bytes.tobytes(), log2_lam)
        if _classify(counts, "t", len(cands), v):
            x_hat[b:b + M] = np.frombuffer(next(iter(cands)), dtype=np.uint8)


def decode_repainted(codec: PairCodec, stage: RepaintStage, p_x_track, p_y_track,
                     truth: Orbit | None = None) -> ReconstructionReport:
    """Decode after a repainting round: L stage, then T stage, then S stage."""
    px = np.ascontiguousarray(_vals(p_x_track), dtype=np.uint8)
    py = np.ascontiguousarray(_vals(p_y_track), dtype=np.uint8)
    n = len(px)
    x_hat = np.full(n, ERASED, dtype=np.int16)
    y_hat = np.full(n, ERASED, dtype=np.int16)
    counts = _blank_counts()
    xa = np.zeros(n, dtype=bool)
    ya = np.zeros(n, dtype=bool)
    _l_stage(codec, px, py, x_hat, counts, xa)
    _t_stage(codec, stage, px, x_hat, counts, xa)
    _s_stage(codec, py, x_hat, y_hat, counts, ya)
    return _finish(x_hat, y_hat, counts, xa, ya, truth)


# ---------------------------------------------------------------------------
# experiments

def simulate(source: JointSource, n: int, params: PairParams, seed: int,
             train_test: bool = False, region: RateRegion | None = None):
    """Build on a training orbit and decode it (or a fresh orbit with ``train_test``)."""
    train = sample_orbit(source, n, derive_seed(seed, "orbit", "train"))
    codec = build_pair(train, source, params, region)
    if not train_test:
        return codec, decode(codec, codec.p_x, codec.p_y, truth=train)
    test = sample_orbit(source, n, derive_seed(seed, "orbit", "test"))
    px, py = codec.encode(test)
    return codec, decode(codec, px, py, truth=test)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    return str(v)


def _cell(source: JointSource, label: str, a: int, b: int, params: PairParams, n: int,
          seed: int, train_test: bool, region: RateRegion) -> dict:
    t0 = time.perf_counter()
    p = PairParams.from_dict({**params.to_dict(), "a": a, "b": b})
    row = {"source": label, "a": a, "b": b, "M_S": p.height_s, "M_L": p.height_l,
           "ell": p.ell, "eta": p.eta}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegionWarning)
            codec, rep = simulate(source, n, p, seed, train_test, region)
        row.update(coverage_S=codec.tower_s.coverage, coverage_L=codec.tower_l.coverage,
                   psi_singleton_frac=rep.psi_singleton_frac,
                   phi5_singleton_frac=rep.phi5_singleton_frac, error_frac=rep.error_frac)
        row["status"] = "ok"
    except Exception as exc:  # per-cell failures are recorded, the sweep continues
        row.update(coverage_S=math.nan, coverage_L=math.nan, psi_singleton_frac=math.nan,
                   phi5_singleton_frac=math.nan, error_frac=math.nan)
        row["status"] = f"{type(exc).__name__}: {exc}"
    row["runtime_ms"] = (time.perf_counter() - t0) * 1000.0
    return row


def rate_region_experiment(source: JointSource, grid, params: PairParams, n: int, seed: int,
                           label: str = "source", train_test: bool = False,
                           threads: int = 1) -> list[dict]:
    """build_pair + decode for every (a, b) of ``grid``; one row per cell, in grid order.

    The orbit seed is shared by all cells so that cells differ only in (a, b).
    """
    region = rate_region(source)
    cells = [(int(a), int(b)) for a, b in grid]
    run = lambda ab: _cell(source, label, ab[0], ab[1], params, n, seed, train_test, region)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, cells))
    return [run(ab) for ab in cells]


def rows_to_csv(rows: list[dict], include_runtime: bool = True, columns=CSV_COLUMNS) -> str:
    """Fixed-column CSV; numbers carry 9 significant digits."""
    cols = [c for c in columns if include_runtime or c != "runtime_ms"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def manifest(params: PairParams, seed: int, extra: dict | None = None) -> str:
    """JSON run manifest with the parameters and the seeds derived from ``seed``."""
    seeds = {
        "train_orbit": derive_seed(seed, "orbit", "train"),
        "test_orbit": derive_seed(seed, "orbit", "test"),
        "tower_S": derive_seed(params.seed, "tower", "S"),
        "tower_L": derive_seed(params.seed, "tower", "L"),
        "tower_T": derive_seed(params.seed, "tower", "T"),
        "paint_f": derive_seed(params.seed, "paint", "f"),
        "paint_g": derive_seed(params.seed, "paint", "g"),
        "paint_psi": derive_seed(params.seed, "paint", "psi"),
        "virtual": derive_seed(params.seed, "virtual"),
    }
    body = {"params": params.to_dict(), "seed": seed, "seeds": seeds}
    if extra:
        body.update(extra)
    return json.dumps(body, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
