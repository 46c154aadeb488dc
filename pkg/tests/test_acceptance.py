"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
under capture) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import csv
import io
import math
import sys
import tempfile
import time
import warnings
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from swgen.cli import main as cli_main
from swgen.codebooks import brute_force_words, codebook
from swgen.config import ExperimentConfig
from swgen.partitions import SymbolTrack, empirical_block_entropy
from swgen.seeding import derive_seed
from swgen.sources import copy_source, dsbs, independent_bits, rate_region, sample_orbit
from swgen.swcodec import PairParams, RegionWarning, improve_pair, simulate
from swgen.typicality import binary_entropy
from swgen.verify import (admissible_suite, binning_suite, growth_suite, recovery_and_repaint)

E2E_SEED = 1
E2E_N = 2_000_000


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def criterion_1():
    checks, dt = _timed(admissible_suite)
    bad = [c.name for c in checks if not c.passed]
    return not bad and dt < 10, f"{len(checks)} checks, failed {bad}, {dt:.2f}s < 10s"


def criterion_2():
    checks, dt = _timed(growth_suite)
    return all(c.passed for c in checks) and dt < 5, "; ".join(f"{c.name}: {c.detail}" for c in checks) + f"; {dt:.2f}s"


def criterion_3():
    def run():
        words = 0
        for a in (2, 3):
            for ell in (1, 2, 3, 4):
                for n in range(1, 15):
                    book = codebook(n, ell, a)
                    w = brute_force_words(n, ell, a)
                    idx = np.arange(book.count)
                    if len(w) != book.count or not np.array_equal(book.unrank_many(idx), w) \
                            or not np.array_equal(book.rank_many(w), idx):
                        return False, f"exhaustive mismatch at n={n} ell={ell} a={a}"
                    words += len(w)
        rng = np.random.default_rng(derive_seed(0, "acceptance", 3))
        for ell, a in ((10, 2), (4, 3)):
            book = codebook(200, ell, a)
            for _ in range(5_000):
                i = int(rng.integers(0, 1 << 62)) * (1 << 62) + int(rng.integers(0, 1 << 62))
                i = i * book.count // (1 << 124)
                if book.rank(book.unrank(i)) != i:
                    return False, f"round trip failed at n=200 ell={ell} a={a} index {i}"
        return True, f"{words} words exhaustive, 10000 round trips at n=200"
    (ok, detail), dt = _timed(run)
    return ok and dt < 30, f"{detail}, {dt:.2f}s < 30s"


@lru_cache(maxsize=1)
def _recovery_grid():
    t0 = time.perf_counter()
    rows = [recovery_and_repaint(i) for i in range(100)]
    return rows, time.perf_counter() - t0


def criterion_4():
    rows, dt = _recovery_grid()
    bad = [i for i, r in enumerate(rows) if not r[0]]
    return not bad and dt < 60, f"exact on {100 - len(bad)}/100 instances, {dt:.2f}s < 60s"


def criterion_5():
    rows, _ = _recovery_grid()
    bad = [i for i, r in enumerate(rows) if not r[1]]
    worst = max(r[2] - r[3] for r in rows)
    return not bad, f"{100 - len(bad)}/100 within bound, max(distance - bound) = {worst:.6f}"


def criterion_6():
    checks, dt = _timed(binning_suite)
    return all(c.passed for c in checks) and dt < 120, "; ".join(c.detail for c in checks) + f"; {dt:.1f}s"


def criterion_7():
    hb = binary_entropy(0.11)
    want = {"copy": (copy_source(), (1.0, 0.0, 0.0)),
            "independent": (independent_bits(), (2.0, 1.0, 1.0)),
            "dsbs(0.11)": (dsbs(0.11), (1.0 + hb, hb, hb))}
    worst = 0.0
    for src, w in want.values():
        r = rate_region(src)
        if r.method != "exact":
            return False, "rate_region not in exact mode"
        worst = max(worst, *(abs(g - e) for g, e in zip((r.h, r.h_given_x, r.h_given_y), w)))
    coin = np.random.default_rng(derive_seed(0, "acceptance", 7)).integers(0, 2, 1_000_000)
    hk = empirical_block_entropy(SymbolTrack(coin.astype(np.uint8), 2), 8)
    return worst <= 1e-9 and abs(hk - 1) <= 0.01, f"max closed-form gap {worst:.2e}; fair coin {hk:.5f}"


@lru_cache(maxsize=1)
def _e2e():
    t0 = time.perf_counter()
    codec, rep = simulate(dsbs(0.11), E2E_N, PairParams(), E2E_SEED)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegionWarning)
        _, neg = simulate(independent_bits(), E2E_N, PairParams(), E2E_SEED)
    return codec, rep, neg, time.perf_counter() - t0


def criterion_8():
    _, rep, neg, dt = _e2e()
    ok = rep.error_frac <= 0.10 and neg.error_frac >= 0.25 and dt < 600
    return ok, f"DSBS error {rep.error_frac:.6f} <= 0.10; independent error {neg.error_frac:.6f} >= 0.25; {dt:.1f}s"


def criterion_9():
    codec, _, _, _ = _e2e()
    train = sample_orbit(dsbs(0.11), E2E_N, derive_seed(E2E_SEED, "orbit", "train"))
    s = improve_pair(codec, train, dsbs(0.11)).summary()
    rise = s["error_after"] - s["error_before"]
    ok = s["distance_to_old"] <= s["bound"] and rise <= 0.02
    return ok, (f"distance {s['distance_to_old']:.6f} <= bound {s['bound']:.6f} (f = {s['f']:.6f}); "
                f"error {s['error_before']:.6f} -> {s['error_after']:.6f}")


def _strip_runtime(path: Path) -> str:
    rows = list(csv.reader(io.StringIO(path.read_text())))
    col = rows[0].index("runtime_ms")
    return "\n".join(",".join(c for j, c in enumerate(r) if j != col) for r in rows)


def criterion_10():
    cfg = ExperimentConfig(orbit_length=E2E_N, seed=E2E_SEED, improve=True)
    texts = []
    with tempfile.TemporaryDirectory() as tmp:
        for run in ("a", "b"):
            path = Path(tmp) / f"{run}.json"
            path.write_text(cfg.to_json())
            out = Path(tmp) / run
            if cli_main(["simulate", "--config", str(path), "--out", str(out)]) != 0:
                return False, f"run {run} exited nonzero"
            texts.append((_strip_runtime(out / "simulate.csv"), _strip_runtime(out / "improve.csv")))
    same = texts[0] == texts[1]
    return same, "simulate.csv and improve.csv identical across two runs" if same else "CSV differs"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def _line(k: int, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + _line(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for k, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        results.append(ok)
        print(_line(k, ok, detail), flush=True)
    sys.exit(0 if all(results) else 1)
