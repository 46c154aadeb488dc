from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swgen.sources import Orbit, dsbs, sample_orbit
from swgen.towers import Tower, TowerError, build_tower, coverage, greedy_bases, names_along_tower


def covered_count_oracle(bases, M, n):
    mark = np.zeros(n, dtype=bool)
    for b in bases:
        if b + M <= n:
            mark[b:b + M] = True
    return mark.sum() / n


def test_exact_tiling_coverage():
    t = Tower(np.array([0, 5]), 5, "x", 10)
    assert coverage(t, 10) == 1.0


def test_half_coverage():
    assert Tower(np.array([0]), 50, "x", 100).coverage == 0.5


def test_gap_violation_rejected():
    with pytest.raises(ValueError):
        Tower(np.array([0, 3]), 5, "x", 10)


def test_height_beyond_orbit():
    o = sample_orbit(dsbs(0.1), 100, 1)
    with pytest.raises(TowerError) as err:
        build_tower(o, "x", 101, target_coverage=0.5)
    assert err.value.achieved_coverage == 0.0


def test_large_tower_reaches_target():
    o = sample_orbit(dsbs(0.11), 1_000_000, 3)
    t = build_tower(o, "y", 1000, target_coverage=0.99, seed=4)
    assert t.coverage >= 0.99
    assert np.diff(t.base_positions).min() >= 1000


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 200))
def test_coverage_matches_position_count(seed, M):
    rng = np.random.default_rng(seed)
    cand = np.sort(rng.choice(5000, size=rng.integers(1, 200), replace=False))
    t = Tower(greedy_bases(cand, M), M, "x", 5000)
    assert np.diff(t.base_positions).min(initial=M) >= M
    assert t.coverage == pytest.approx(covered_count_oracle(t.base_positions, M, 5000))
    assert t.covered_mask().mean() == pytest.approx(t.coverage)


def test_greedy_is_left_to_right():
    assert greedy_bases(np.array([0, 2, 5, 6, 11, 12]), 5).tolist() == [0, 5, 11]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_scope_invariance(seed):
    rng = np.random.default_rng(seed)
    o = sample_orbit(dsbs(0.2), 20_000, seed)
    tx = build_tower(o, "x", 100, target_coverage=0.9, seed=1)
    tx2 = build_tower(o.with_tracks(y=rng.integers(0, 2, o.n)), "x", 100, target_coverage=0.9, seed=1)
    assert np.array_equal(tx.base_positions, tx2.base_positions)
    ty = build_tower(o, "y", 100, target_coverage=0.9, seed=1)
    ty2 = build_tower(o.with_tracks(x=rng.integers(0, 2, o.n)), "y", 100, target_coverage=0.9, seed=1)
    assert np.array_equal(ty.base_positions, ty2.base_positions)


def test_determinism():
    o = sample_orbit(dsbs(0.2), 50_000, 1)
    a = build_tower(o, "joint", 200, seed=3)
    b = build_tower(o, "joint", 200, seed=3)
    assert np.array_equal(a.base_positions, b.base_positions)


def test_names_examples():
    t = Tower(np.array([0, 10]), 4, "x", 20)
    names = names_along_tower(t, np.zeros(20, dtype=np.uint8))
    assert not names.names.any() and names.names.shape == (2, 4)
    t2 = Tower(np.array([2]), 4, "x", 20)
    assert names_along_tower(t2, np.arange(20) % 2).names[0].tolist() == [0, 1, 0, 1]
    empty = Tower(np.zeros(0, dtype=np.int64), 4, "x", 20)
    assert len(names_along_tower(empty, np.zeros(20))) == 0


def test_truncated_block_dropped():
    t = Tower(np.array([0, 8]), 5, "x", 10)
    names = names_along_tower(t, np.arange(10))
    assert names.dropped == 1 and names.bases.tolist() == [0]
    assert t.coverage == 0.5 and t.truncated == 1


def test_tower_dict_round_trip():
    t = Tower(np.array([1, 9, 30]), 8, "y", 40)
    back = Tower.from_dict(t.to_dict())
    assert np.array_equal(back.base_positions, t.base_positions) and back.height == 8
    assert t.level()[9:17].tolist() == list(range(8)) and t.level()[0] == -1
