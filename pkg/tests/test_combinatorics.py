import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rspap._combinatorics import (RankBijection, ZipfSampler, rank_combination,
                                  unrank_combination, unrank_combinations)


def test_zipf_pmf_two_ranks():
    z = ZipfSampler(2, 1.0)
    assert z.pmf(1) == pytest.approx(2 / 3, abs=1e-15)
    assert z.pmf(2) == pytest.approx(1 / 3, abs=1e-15)


def test_zipf_single_rank_always_one():
    z = ZipfSampler(1, 3.0)
    assert set(z.sample(np.random.default_rng(0), 1000).tolist()) == {1}


def test_zipf_first_rank_n30_matches_harmonic():
    h30 = sum(Fraction(1, i) for i in range(1, 31))
    assert ZipfSampler(30, 1.0).pmf(1) == pytest.approx(float(1 / h30), rel=1e-12)
    assert float(1 / h30) == pytest.approx(0.2503, abs=5e-5)


def test_zipf_tail_normalizer_close_to_exact():
    N, s = 200_000, 1.3
    exact = float(np.sum(np.arange(1, N + 1, dtype=np.float64) ** -s))
    approx = ZipfSampler(N, s, head=1000).total
    assert approx == pytest.approx(exact, rel=1e-6)


def test_zipf_tail_sampling_matches_exact_distribution():
    rng = np.random.default_rng(1)
    N, s = 5000, 1.1
    draws = ZipfSampler(N, s, head=50).sample(rng, 400_000)
    assert draws.min() >= 1 and draws.max() <= N
    w = np.arange(1, N + 1, dtype=np.float64) ** -s
    p = w / w.sum()
    # mass beyond the head and inside a tail window
    assert np.mean(draws > 50) == pytest.approx(p[50:].sum(), abs=4e-3)
    assert np.mean((draws > 100) & (draws <= 1000)) == pytest.approx(p[100:1000].sum(), abs=4e-3)


def test_zipf_huge_support_returns_python_ints():
    N = math.comb(150, 75)
    draws = ZipfSampler(N, 1.2).sample(np.random.default_rng(2), 2000)
    assert draws.dtype == object
    assert all(1 <= int(x) <= N for x in draws)


@pytest.mark.parametrize("N,s", [(0, 1.0), (5, 0.9), (2.5, 1.0)])
def test_zipf_rejects_bad_parameters(N, s):
    with pytest.raises(ValueError):
        ZipfSampler(N, s)


@pytest.mark.parametrize("n,k", [(5, 2), (7, 3), (6, 6), (9, 1)])
def test_unrank_matches_itertools(n, k):
    combos = list(itertools.combinations(range(n), k))
    assert [unrank_combination(r, n, k) for r in range(len(combos))] == combos
    vec = unrank_combinations(np.arange(len(combos)), n, k)
    assert [tuple(row) for row in vec.tolist()] == combos
    assert [rank_combination(c, n) for c in combos] == list(range(len(combos)))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 150).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))).flatmap(
    lambda nk: st.tuples(st.just(nk[0]), st.just(nk[1]), st.integers(0, math.comb(nk[0], nk[1]) - 1))))
def test_rank_roundtrip(nkr):
    n, k, r = nkr
    members = unrank_combination(r, n, k)
    assert len(members) == k and list(members) == sorted(set(members))
    assert rank_combination(members, n) == r


@pytest.mark.parametrize("N,limit", [(1000, 1 << 20), (5000, 10), (70000, 100)])
def test_bijection_is_permutation(N, limit):
    f = RankBijection(N, np.random.default_rng(3), materialize_limit=limit)
    out = np.asarray(f(np.arange(N)), dtype=np.int64)
    assert np.array_equal(np.sort(out), np.arange(N))


def test_big_bijection_stays_in_domain_and_injective():
    N = math.comb(150, 40)
    f = RankBijection(N, np.random.default_rng(4))
    xs = list(range(500)) + [N - 1 - i for i in range(500)]
    ys = [int(y) for y in f(xs)]
    assert all(0 <= y < N for y in ys)
    assert len(set(ys)) == len(ys)
