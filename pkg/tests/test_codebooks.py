from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swgen.codebooks import (AdmissibilityError, AdmissibleCodebook, brute_force_counts, brute_force_words, codebook,
                             count_admissible, enumerate_admissible, growth_rate,
                             make_painting_data, uniformity_pvalue, verify_binning_lemma)


def test_anchor_counts():
    assert count_admissible(1, 2, 2) == 1
    assert count_admissible(3, 2, 2) == 3
    assert count_admissible(3, 2, 3) == 8
    assert enumerate_admissible(3, 2, 2) == [(1, 0, 1), (1, 1, 0), (1, 1, 1)]


@pytest.mark.parametrize("a", [2, 3])
@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_counts_match_enumeration(a, ell):
    for n in range(1, 10):
        assert count_admissible(n, ell, a) == len(enumerate_admissible(n, ell, a))


def test_vectorized_oracle_matches_list_oracle():
    for a in (2, 3):
        for n in range(1, 9):
            counts = brute_force_counts(n, a, (1, 2, 3, 4))
            for ell, c in counts.items():
                assert c == len(enumerate_admissible(n, ell, a))


@pytest.mark.parametrize("n,ell,a", [(10, 3, 2), (8, 2, 3), (9, 4, 3), (6, 1, 3)])
def test_rank_unrank_lexicographic(n, ell, a):
    book = codebook(n, ell, a)
    words = enumerate_admissible(n, ell, a)
    for i, w in enumerate(words):
        assert tuple(book.unrank(i).tolist()) == w
        assert book.rank(w) == i


def test_rank_example_and_errors():
    book = codebook(3, 2, 2)
    assert book.rank([1, 1, 0]) == 1
    assert book.unrank(0).tolist() == [1, 0, 1]
    with pytest.raises(AdmissibilityError):
        book.rank([1, 0, 0])
    with pytest.raises(IndexError):
        book.unrank(3)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**400))
def test_rank_unrank_roundtrip_n200(seed):
    book = codebook(200, 5, 2)
    i = seed % book.count
    w = book.unrank(i)
    assert w[0] == 1 and w in book
    assert book.rank(w) == i


def test_growth_rates():
    assert growth_rate(50, 1, 2) == 0.0
    assert growth_rate(1000, 10, 2) >= 0.99
    assert growth_rate(500, 4, 3) >= math.log2(3) - 0.05
    # nondecreasing in ell and in a
    g = [growth_rate(200, ell, 2) for ell in range(1, 8)]
    assert all(x <= y for x, y in zip(g, g[1:]))
    assert growth_rate(200, 4, 2) <= growth_rate(200, 4, 3) <= growth_rate(200, 4, 4)


def test_invalid_codebook():
    with pytest.raises(ValueError):
        AdmissibleCodebook(0, 2, 2)
    with pytest.raises(ValueError):
        AdmissibleCodebook(4, 2, 1)


def test_painting_data_contract(rng):
    one = make_painting_data(2, 6, codebook(6, 1, 2), seed=1)
    assert one.book.count == 1 and one.apply(np.zeros(6)).tolist() == [1] * 6
    pd = make_painting_data(2, 64, codebook(60, 4, 2), seed=2)
    name = rng.integers(0, 2, 64)
    assert np.array_equal(pd.apply(name), pd.apply(name))
    other = make_painting_data(2, 64, codebook(60, 4, 2), seed=3)
    assert pd.index(name) != other.index(name)
    assert pd.apply(name) in pd.book
    with pytest.raises(ValueError):
        pd.index(np.zeros(5))


def test_painting_no_birthday_collisions(rng):
    book = codebook(64, 8, 2)
    assert book.log2_count() > 60
    pd = make_painting_data(2, 40, book, seed=9)
    names = rng.integers(0, 2, size=(100_000, 40)).astype(np.uint8)
    names = np.unique(names, axis=0)
    idx = {pd.index(nm) for nm in names}
    assert len(idx) == len(names)


def test_painting_uniformity(rng):
    pd = make_painting_data(2, 30, codebook(200, 6, 2), seed=5)
    names = rng.integers(0, 2, size=(4000, 30))
    assert uniformity_pvalue(pd, names) > 1e-4


def test_binning_examples():
    sparse = verify_binning_lemma(1000, 5, 5000 * 1000, 0.9, 20, seed=1)
    assert sparse.success_fraction == 1.0
    mid = verify_binning_lemma(10_000, 100, 1000, 0.25, 200, seed=2)
    assert mid.fiber_bound == pytest.approx(1.4)
    assert mid.success_fraction >= 0.5
    edge = verify_binning_lemma(200, 50, 50, 1.0, 10, seed=3)
    assert 0.0 <= edge.success_fraction <= 1.0


def test_binning_oracle_fiber_count():
    # a singleton candidate set always meets its own bin exactly once
    res = verify_binning_lemma(500, 1, 2, 0.5, 5, seed=4)
    assert res.success_fraction == 1.0 and np.all(res.good_fractions == 1.0)


@pytest.mark.parametrize("n,ell,a", [(10, 3, 2), (8, 2, 3), (9, 4, 3), (6, 1, 3), (1, 2, 2)])
def test_brute_force_words_matches_list_oracle(n, ell, a):
    assert [tuple(w) for w in brute_force_words(n, ell, a).tolist()] == enumerate_admissible(n, ell, a)


@pytest.mark.parametrize("n,ell,a", [(12, 3, 2), (9, 2, 3), (11, 4, 3)])
def test_batch_rank_unrank_exhaustive(n, ell, a):
    book = codebook(n, ell, a)
    words = brute_force_words(n, ell, a)
    assert len(words) == book.count
    assert np.array_equal(book.unrank_many(np.arange(book.count)), words)
    assert np.array_equal(book.rank_many(words), np.arange(book.count))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**40))
def test_batch_forms_match_scalar(seed):
    book = codebook(35, 4, 3)
    i = seed % book.count
    assert np.array_equal(book.unrank_many([i])[0], book.unrank(i))
    assert int(book.rank_many([book.unrank(i)])[0]) == book.rank(book.unrank(i))


def test_batch_errors():
    book = codebook(5, 2, 2)
    with pytest.raises(AdmissibilityError):
        book.rank_many([[1, 0, 0, 1, 1]])
    with pytest.raises(IndexError):
        book.unrank_many([book.count])
    with pytest.raises(OverflowError):
        codebook(200, 5, 2).unrank_many([0])
