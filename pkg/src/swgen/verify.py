"""Self-check suites run by ``swgen verify``.

Each suite returns :class:`Check` rows; a suite passes when all its rows do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codebooks import (brute_force_counts, codebook, count_admissible, growth_rate,
                        make_painting_data, verify_binning_lemma)
from .painting import head_length, make_admissible, paint, recover_bases, recover_bases_repaint, repaint
from .partitions import partition_distance
from .seeding import derive_seed
from .towers import Tower


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def admissible_suite(max_n: int = 14) -> list[Check]:
    out = []
    ells = (1, 2, 3, 4)
    for a in (2, 3):
        oracle = {n: brute_force_counts(n, a, ells) for n in range(1, max_n + 1)}
        for ell in ells:
            bad = [n for n in range(1, max_n + 1) if count_admissible(n, ell, a) != oracle[n][ell]]
            out.append(Check(f"count a={a} ell={ell} n<={max_n}", not bad,
                             f"mismatch at n={bad}" if bad else "exact"))
    for (n, ell, a), want in {(1, 2, 2): 1, (3, 2, 2): 3, (3, 2, 3): 8}.items():
        got = count_admissible(n, ell, a)
        out.append(Check(f"anchor |A({n},{ell},{a})|={want}", got == want, f"got {got}"))
    return out


def growth_suite() -> list[Check]:
    g1 = growth_rate(1000, 10, 2)
    g2 = growth_rate(500, 4, 3)
    return [Check("growth a=2 ell=10 n=1000 >= 0.99", g1 >= 0.99, f"{g1:.6f}"),
            Check("growth a=3 ell=4 n=500 >= log2(3)-0.05", g2 >= math.log2(3) - 0.05, f"{g2:.6f}")]


def binning_threshold(eps: float, trials: int) -> float:
    q = math.sqrt(eps)
    return 1 - q - 3 * math.sqrt(q * (1 - q) / trials)


def binning_suite(trials: int = 200, universe: int = 10_000, seed: int = 0) -> list[Check]:
    """Candidate sets of size ``a`` hashed into ``b = 1000`` bins, a/b in {0.01, 0.1}."""
    out = []
    bins = 1000
    for eps in (0.04, 0.25):
        for a in (10, 100):
            res = verify_binning_lemma(universe, a, bins, eps, trials,
                                       derive_seed(seed, "binning", eps, a))
            thr = binning_threshold(eps, trials)
            out.append(Check(f"binning eps={eps} a/b={a / bins}", res.success_fraction >= thr,
                             f"success {res.success_fraction:.4f} >= {thr:.4f}"))
    return out


def planted_instance(index: int, seed: int = 0):
    """A random tower with planted bases plus painting data, for recovery checks."""
    rng = np.random.default_rng(derive_seed(seed, "recovery", index))
    M = int(rng.integers(50, 5001))
    ell = int(rng.integers(2, 13))
    a = int(rng.integers(2, 4))
    nb = int(rng.integers(3, 12))
    gaps = M + rng.integers(0, M // 2 + 1, size=nb)
    start = int(rng.integers(0, M))
    bases = start + np.concatenate(([0], np.cumsum(gaps[:-1])))
    n = int(bases[-1] + M + rng.integers(-M // 2, M))   # the last block may be truncated
    tower = Tower(bases, M, "x", n)
    names = rng.integers(0, 2, size=(len(tower.complete_bases), M)).astype(np.uint8)
    pd = make_painting_data(2, M, codebook(M - ell, ell, a), derive_seed(seed, "pd", index))
    return tower, names, pd, ell, a, rng


def recovery_and_repaint(index: int, seed: int = 0) -> tuple[bool, bool, float, float]:
    """(recovery exact on paint and repaint, repaint distance within bound, distance, bound)."""
    tower, names, pd, ell, a, rng = planted_instance(index, seed)
    M = tower.height
    painted = paint(tower, names, pd, ell)
    ok = np.array_equal(recover_bases(painted, ell), tower.complete_bases)
    eps = float(rng.uniform(0.0, 0.5))
    ell_r = max(1, ell // 2)
    head = head_length(eps, M)
    while head + 2 * ell_r > M:
        eps /= 2
        head = head_length(eps, M)
    rpd = make_painting_data(2, M, codebook(head, ell_r, a), derive_seed(seed, "rpd", index)) if head else None
    # painted is ell-admissible off the zero gaps only, so repaint an admissible stand-in
    current = make_admissible(painted, ell_r)
    new = repaint(tower, current, names, rpd, eps, ell_r)
    ok &= np.array_equal(recover_bases_repaint(new, ell_r), tower.complete_bases) if head else True
    dist = partition_distance(new, current)
    bound = eps + 2 * ell_r / M + (1 - tower.coverage)
    return bool(ok), dist <= bound, dist, bound


def recovery_suite(instances: int = 100, seed: int = 0) -> list[Check]:
    bad = [i for i in range(instances) if not recovery_and_repaint(i, seed)[0]]
    return [Check(f"base recovery on {instances} planted instances", not bad,
                  f"failed instances {bad[:10]}" if bad else "exact")]


def repaint_suite(instances: int = 100, seed: int = 0) -> list[Check]:
    worst = 0.0
    bad = []
    for i in range(instances):
        _, ok, dist, bound = recovery_and_repaint(i, seed)
        worst = max(worst, dist - bound)
        if not ok:
            bad.append(i)
    return [Check(f"repaint distance bound on {instances} instances", not bad,
                  f"max(distance - bound) = {worst:.6f}")]


SUITES = {
    "admissible": admissible_suite,
    "growth": growth_suite,
    "binning": binning_suite,
    "recovery": recovery_suite,
    "repaint": repaint_suite,
}
