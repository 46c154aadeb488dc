from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swgen.codebooks import codebook, make_painting_data
from swgen.painting import (ZoneError, head_length, make_admissible, paint, recover_bases,
                            recover_bases_repaint, repaint)
from swgen.partitions import (SymbolTrack, empirical_block_entropy, is_admissible,
                              longest_zero_run, partition_distance)
from swgen.sources import dsbs, sample_orbit
from swgen.towers import Tower, build_tower, names_along_tower
from swgen.verify import planted_instance


def pd_with_word(word, M, ell, a=2):
    """Painting data whose value on the all-zero name is ``word`` (search over seeds)."""
    book = codebook(len(word), ell, a)
    for seed in range(1000):
        pd = make_painting_data(2, M, book, seed)
        if pd.apply(np.zeros(M)).tolist() == list(word):
            return pd
    raise AssertionError("no seed found")


def test_single_base_placement():
    pd = pd_with_word([1, 0, 1], 5, 2)
    t = Tower(np.array([0]), 5, "x", 8)
    out = paint(t, np.zeros((1, 5)), pd, 2)
    assert out.values.tolist() == [1, 0, 1, 0, 0, 0, 0, 0]
    assert recover_bases(out, 2).tolist() == [0]


def test_empty_tower_paints_zeros():
    t = Tower(np.zeros(0, dtype=np.int64), 5, "x", 20)
    pd = make_painting_data(2, 5, codebook(3, 2, 2), 1)
    out = paint(t, np.zeros((0, 5)), pd, 2)
    assert not out.values.any()
    assert recover_bases(out, 2).size == 0


def test_codeword_equality_rate_is_one_over_count(rng):
    book = codebook(3, 2, 2)
    equal = 0
    trials = 3000
    names = rng.integers(0, 2, size=(trials, 2, 6))
    for i in range(trials):
        pd = make_painting_data(2, 6, book, seed=i)
        equal += pd.index(names[i, 0]) == pd.index(names[i, 1]) and not np.array_equal(names[i, 0], names[i, 1])
    distinct = sum(not np.array_equal(n[0], n[1]) for n in names)
    rate = equal / distinct
    assert abs(rate - 1 / 3) < 4 * np.sqrt(1 / 3 * 2 / 3 / distinct)


def test_paint_errors():
    t = Tower(np.array([0]), 6, "x", 10)
    with pytest.raises(ZoneError):
        paint(t, np.zeros((1, 6)), make_painting_data(2, 6, codebook(3, 2, 2), 1), 2)
    with pytest.raises(ValueError):
        paint(t, np.zeros((2, 6)), make_painting_data(2, 6, codebook(4, 2, 2), 1), 2)


def test_all_zero_track_has_no_bases():
    assert recover_bases(np.zeros(100, dtype=np.uint8), 3).size == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_recovery_exact_on_planted_instances(index):
    tower, names, pd, ell, a, _ = planted_instance(index, seed=77)
    out = paint(tower, names, pd, ell)
    assert np.array_equal(recover_bases(out, ell), tower.complete_bases)
    assert not out.values[~tower.covered_mask()].any()      # zero off the tower


def test_recovery_on_ten_thousand_bases():
    rng = np.random.default_rng(5)
    M, ell = 30, 4
    gaps = M + rng.integers(0, 10, size=10_000)
    bases = np.concatenate(([3], 3 + np.cumsum(gaps[:-1])))
    tower = Tower(bases, M, "x", int(bases[-1] + M))
    names = rng.integers(0, 2, size=(len(bases), M))
    pd = make_painting_data(2, M, codebook(M - ell, ell, 2), 8)
    assert np.array_equal(recover_bases(paint(tower, names, pd, ell), ell), bases)


def test_repaint_diagnostic_mode():
    t = Tower(np.array([0, 30]), 20, "x", 60)
    cur = SymbolTrack(np.ones(60), 2)
    out = repaint(t, cur, np.zeros((2, 20)), None, 0.0, 0)
    assert out.values[t.covered_mask()].all() and not out.values[~t.covered_mask()].any()
    assert partition_distance(out, cur) == pytest.approx(1 - t.coverage)


def test_repaint_zones_by_hand():
    t = Tower(np.array([0]), 10, "x", 10)
    cur = SymbolTrack(np.array([1, 2, 1, 2, 1, 2, 1, 2, 1, 2]), 3)
    pd = make_painting_data(2, 10, codebook(2, 1, 2), 3)     # the only word is 1,1
    out = repaint(t, cur, np.zeros((1, 10)), pd, 0.2, 1)
    assert out.values.tolist() == [1, 1, 1, 2, 1, 2, 1, 2, 0, 0]


def test_repaint_errors():
    t = Tower(np.array([0]), 10, "x", 10)
    good = SymbolTrack(np.ones(10), 2)
    with pytest.raises(ZoneError):
        repaint(t, good, np.zeros((1, 10)), make_painting_data(2, 10, codebook(8, 2, 2), 1), 0.8, 2)
    bad = SymbolTrack(np.array([1, 0, 0, 0, 1, 1, 1, 1, 1, 1]), 2)
    with pytest.raises(ValueError, match="admissible"):
        repaint(t, bad, np.zeros((1, 10)), make_painting_data(2, 10, codebook(2, 2, 2), 1), 0.2, 2)


def test_head_length_floor():
    assert head_length(0.2, 10) == 2
    assert head_length(0.29, 10) == 2
    assert head_length(0.29, 100) == 29     # 0.29 * 100 is 28.999999999999996 in floating point


def test_repaint_pipeline_on_dsbs():
    o = sample_orbit(dsbs(0.11), 200_000, 2)
    tl = build_tower(o, "x", 500, target_coverage=0.98, seed=1)
    pl = paint(tl, names_along_tower(tl, o.x), make_painting_data(2, 500, codebook(490, 10, 2), 4), 10)
    cur = make_admissible(pl, 40, keep=10)
    tt = build_tower(o, "x", 4000, target_coverage=0.95, seed=2)
    eps = 0.25
    pd = make_painting_data(2, 4000, codebook(head_length(eps, 4000), 40, 2), 5)
    new = repaint(tt, cur, names_along_tower(tt, o.x), pd, eps, 40)
    assert np.array_equal(recover_bases_repaint(new, 40), tt.complete_bases)
    assert partition_distance(new, cur) <= eps + 80 / 4000 + (1 - tt.coverage)
    # heads start with 1 but are never preceded by 2 ell zeros inside a block
    heads = tt.complete_bases
    assert set(recover_bases_repaint(new, 40).tolist()) == set(heads.tolist())


def test_painted_track_entropy():
    o = sample_orbit(dsbs(0.11), 400_000, 8)
    t = build_tower(o, "x", 2000, target_coverage=0.98, seed=3)
    pd = make_painting_data(2, 2000, codebook(1990, 10, 2), 6)
    out = paint(t, names_along_tower(t, o.x), pd, 10)
    assert empirical_block_entropy(out, 8) >= 0.9 - 0.05


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), max_size=300), st.integers(2, 12), st.data())
def test_make_admissible_properties(xs, run, data):
    keep = data.draw(st.integers(0, run - 1))
    v = np.array(xs, dtype=np.uint8)
    out = make_admissible(v, run, keep).values
    assert len(v) == 0 or longest_zero_run(out) < run
    changed = out != v
    assert np.all(v[changed] == 0) and np.all(out[changed] == 1)
    # every original nonzero symbol keeps min(keep, original run) zeros in front
    for i in np.flatnonzero(v):
        j = i - 1
        while j >= 0 and v[j] == 0:
            j -= 1
        orig = i - j - 1
        k = i - 1
        while k >= 0 and out[k] == 0:
            k -= 1
        assert i - k - 1 >= min(keep, orig)
    if len(v):
        assert is_admissible(out, run)
