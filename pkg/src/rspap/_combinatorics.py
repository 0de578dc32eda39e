"""Sampling and indexing helpers for the role-set lattice.

Level ``k`` of the lattice over ``n`` roles holds ``comb(n, k)`` role sets,
which is far too many to materialize for mid levels of a 150-role policy.
Everything here therefore works on integer ranks and only turns a rank into
a concrete role set at the very end.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

# Domains up to this size get an explicit permutation array.
MATERIALIZE_LIMIT = 1 << 20
# Exact cumulative weights are tabulated for ranks up to this bound.
ZIPF_HEAD = 1 << 16
_INT64_SAFE = 1 << 62


class ZipfSampler:
    """Draws ranks in ``[1, N]`` with probability proportional to ``rank**-s``.

    Ranks up to ``min(N, head)`` are sampled exactly from a tabulated CDF.
    Beyond that the remaining mass is approximated with the midpoint integral
    of ``x**-s`` and inverted in closed form, so ``N`` may be astronomically
    large (a Python int) without any per-rank storage.
    """

    def __init__(self, N: int, s: float, head: int = ZIPF_HEAD):
        if int(N) != N or N < 1:
            raise ValueError(f"Zipf support size must be a positive integer, got {N!r}")
        if not s >= 1:
            raise ValueError(f"Zipf exponent must be >= 1, got {s!r}")
        self.N = int(N)
        self.s = float(s)
        self.k = min(self.N, head)
        weights = np.arange(1, self.k + 1, dtype=np.float64) ** -self.s
        self._cdf = np.cumsum(weights)
        self.head_mass = float(self._cdf[-1])
        self.tail_mass = self._tail_integral(self.N) if self.N > self.k else 0.0
        self.total = self.head_mass + self.tail_mass

    def _tail_integral(self, upper: int) -> float:
        a = self.k + 0.5
        b = float(upper) + 0.5
        if self.s == 1.0:
            return math.log(b / a)
        e = 1.0 - self.s
        return (a**e - b**e) / (self.s - 1.0)

    def _tail_inverse(self, t: np.ndarray) -> np.ndarray:
        a = self.k + 0.5
        if self.s == 1.0:
            return a * np.exp(t)
        e = 1.0 - self.s
        return (a**e - (self.s - 1.0) * t) ** (1.0 / e)

    def pmf(self, rank: int) -> float:
        """Exact probability of ``rank`` under the normalized weights (head only)."""
        if not 1 <= rank <= self.k:
            raise ValueError("pmf is tabulated for head ranks only")
        return rank**-self.s / self.total

    def sample(self, rng: np.random.Generator, size: int):
        """Return ``size`` ranks.

        The result is an int64 array when ``N`` fits comfortably in int64 and
        an object array of Python ints otherwise.
        """
        u = rng.random(size) * self.total
        in_head = u <= self.head_mass
        head_ranks = np.searchsorted(self._cdf, u[in_head], side="left") + 1
        big = self.N >= _INT64_SAFE
        out = np.empty(size, dtype=object if big else np.int64)
        out[in_head] = np.minimum(head_ranks, self.k)
        if in_head.all():
            return out
        t = u[~in_head] - self.head_mass
        x = self._tail_inverse(t)
        if not big:
            r = np.ceil(x - 0.5)
            r = np.clip(r, self.k + 1, self.N).astype(np.int64)
            out[~in_head] = r
            return out
        tail = []
        for xv in x:
            tail.append(self._big_rank(float(xv), rng))
        out[~in_head] = tail
        return out

    def _big_rank(self, x: float, rng: np.random.Generator) -> int:
        if not math.isfinite(x):
            return self.N
        r = math.ceil(x - 0.5)
        ulp = int(math.ulp(x))
        if ulp > 1:
            # float spacing exceeds one rank here; weights are locally flat so
            # the low digits are filled uniformly
            nbytes = (ulp.bit_length() + 7) // 8 + 8
            r += int.from_bytes(rng.bytes(nbytes), "little") % ulp
        return min(max(r, self.k + 1), self.N)


@lru_cache(maxsize=None)
def _comb_table(n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(math.comb(a, b) for b in range(n + 1)) for a in range(n + 1))


def unrank_combination(rank: int, n: int, k: int) -> tuple[int, ...]:
    """The ``rank``-th (0-based) k-subset of ``range(n)`` in lexicographic order."""
    table = _comb_table(n)
    if not 0 <= rank < table[n][k]:
        raise ValueError(f"rank {rank} outside [0, C({n},{k}))")
    out = []
    e = 0
    while k > 0:
        c = table[n - e - 1][k - 1]
        if rank < c:
            out.append(e)
            k -= 1
        else:
            rank -= c
        e += 1
    return tuple(out)


def unrank_combinations(ranks: np.ndarray, n: int, k: int) -> np.ndarray:
    """Vectorized :func:`unrank_combination` for int64 ranks; returns (len, k)."""
    ranks = np.asarray(ranks, dtype=np.int64).copy()
    out = np.empty((ranks.size, k), dtype=np.int64)
    filled = np.zeros(ranks.size, dtype=np.int64)
    rows = np.arange(ranks.size)
    for e in range(n):
        remaining = k - filled
        active = remaining > 0
        if not active.any():
            break
        # clipping is safe: every live rank is below C(n, k) < 2**62
        c = np.array([min(math.comb(n - e - 1, r - 1), _INT64_SAFE) if r > 0 else 0
                      for r in range(k + 1)], dtype=np.int64)
        thresh = c[remaining]
        take = active & (ranks < thresh)
        out[rows[take], filled[take]] = e
        filled[take] += 1
        skip = active & ~take
        ranks[skip] -= thresh[skip]
    return out


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


class RankBijection:
    """A seeded bijection on ``[0, N)``.

    Small domains use an explicit permutation. Larger ones use a four-round
    balanced Feistel network on the smallest even bit width covering ``N``,
    with cycle walking to stay inside the domain.
    """

    ROUNDS = 4

    def __init__(self, N: int, rng: np.random.Generator, materialize_limit: int = MATERIALIZE_LIMIT):
        self.N = int(N)
        self._perm = None
        if self.N <= materialize_limit:
            self._perm = rng.permutation(self.N)
            return
        bits = max(2, (self.N - 1).bit_length())
        self.half = (bits + 1) // 2
        self.mask = (1 << self.half) - 1
        self.keys = [int(k) for k in rng.integers(0, 2**63, size=self.ROUNDS)]
        self._vector = 2 * self.half <= 62

    def _round_py(self, r: int, i: int) -> int:
        # multiply-xorshift mixing on arbitrary-width ints
        x = (r ^ self.keys[i]) & self.mask
        for c in (0xBF58476D1CE4E5B9, 0x94D049BB133111EB):
            x = ((x ^ (x >> 29)) * (c | (self.keys[i] << 64) | 1)) & self.mask
        return x ^ (x >> 31)

    def _encrypt_py(self, x: int) -> int:
        left, right = x >> self.half, x & self.mask
        for i in range(self.ROUNDS):
            left, right = right, left ^ self._round_py(right, i)
        return (left << self.half) | right

    def _encrypt_vec(self, x: np.ndarray) -> np.ndarray:
        half = np.uint64(self.half)
        mask = np.uint64(self.mask)
        left, right = x >> half, x & mask
        for key in self.keys:
            f = _splitmix(right ^ np.uint64(key)) & mask
            left, right = right, left ^ f
        return (left << half) | right

    def __call__(self, ranks):
        """Map 0-based ranks (array) through the bijection."""
        if self._perm is not None:
            return self._perm[np.asarray(ranks, dtype=np.int64)]
        if self._vector:
            x = np.asarray(ranks, dtype=np.int64).astype(np.uint64)
            n = np.uint64(self.N)
            out = self._encrypt_vec(x)
            todo = out >= n
            while todo.any():
                out[todo] = self._encrypt_vec(out[todo])
                todo = out >= n
            return out.astype(np.int64)
        result = np.empty(len(ranks), dtype=object)
        for j, r in enumerate(ranks):
            y = self._encrypt_py(int(r))
            while y >= self.N:
                y = self._encrypt_py(y)
            result[j] = y
        return result


def rank_combination(members, n: int) -> int:
    """Inverse of :func:`unrank_combination`."""
    table = _comb_table(n)
    k = len(members)
    rank = 0
    prev = -1
    for i, c in enumerate(members):
        for e in range(prev + 1, c):
            rank += table[n - e - 1][k - i - 1]
        prev = c
    return rank
