"""Entropy, divergence and mutual information over discrete pmfs, in bits.

The two sensitive-property functions live here as well. Both compare the
(location type, time slot) distribution seen through a role set's data with
the distribution of the whole bound dataset.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .checkins import N_CATEGORIES, N_CELLS, N_SLOTS, DegenerateInputError, JointPmf, cells_of

_TOL = 1e-9


class PropertyKind(str, enum.Enum):
    KLD = "KLD"
    MI = "MI"


def _as_pmf(p, name="pmf") -> np.ndarray:
    arr = np.asarray(p.probs if isinstance(p, JointPmf) else p, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has negative or non-finite entries")
    total = arr.sum()
    if abs(total - 1.0) > _TOL:
        raise ValueError(f"{name} sums to {total!r}, expected 1")
    return arr


def _xlog2x_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz] / q[nz])
    return out


def entropy(pmf) -> float:
    """Shannon entropy ``-sum p log2 p`` with ``0 log 0 = 0``."""
    p = _as_pmf(pmf)
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log2(nz))))


def kl_divergence(p, q) -> float:
    """``D(p || q)`` in bits.

    Raises ``ValueError`` when ``p`` puts mass where ``q`` has none.
    """
    p = _as_pmf(p, "p")
    q = _as_pmf(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    if np.any((p > 0) & (q == 0)):
        raise ValueError("support of p is not contained in support of q")
    return float(max(0.0, _xlog2x_ratio(p, q).sum()))


def mutual_information(joint) -> float:
    """``I(X;Y)`` of a 2-d joint pmf, in bits."""
    pxy = _as_pmf(joint, "joint")
    if pxy.ndim != 2:
        raise ValueError("joint pmf must be two-dimensional")
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    return float(max(0.0, _xlog2x_ratio(pxy, px * py).sum()))


def conditional_entropy(joint) -> float:
    """``H(X|Y)`` for a joint laid out as ``[x, y]``."""
    pxy = _as_pmf(joint, "joint")
    py = pxy.sum(axis=0)
    return entropy(pxy) - entropy(py)


# batch versions over count grids, used when evaluating thousands of role sets

def _batch_kld(counts: np.ndarray, ref: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / totals
        terms = np.where(counts > 0, p * np.log2(p / ref), 0.0)
    return np.maximum(terms.sum(axis=1), 0.0)


def _batch_mi(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1)
    grid = counts.reshape(-1, N_CATEGORIES, N_SLOTS)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = grid / totals[:, None, None]
        px = p.sum(axis=2, keepdims=True)
        py = p.sum(axis=1, keepdims=True)
        terms = np.where(grid > 0, p * np.log2(p / (px * py)), 0.0)
    return np.maximum(terms.sum(axis=(1, 2)), 0.0)


@dataclass(frozen=True)
class PropertyContext:
    """Everything needed to score a role set's dataset.

    ``cells`` holds the flattened (category, slot) cell of every record in
    the corpus; ``support`` restricts the global distribution to the records
    actually bound to a profile (all records when omitted).
    """

    cells: np.ndarray
    kind: PropertyKind
    support: np.ndarray | None = None
    global_counts: np.ndarray = field(init=False, repr=False)
    global_pmf: JointPmf = field(init=False, repr=False)
    global_mi: float = field(init=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.ndim != 1 or cells.size == 0:
            raise DegenerateInputError("property context needs a non-empty corpus")
        if cells.min() < 0 or cells.max() >= N_CELLS:
            raise ValueError("cell index out of range")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "kind", PropertyKind(self.kind))
        idx = cells if self.support is None else cells[np.unique(np.asarray(self.support, dtype=np.int64))]
        if idx.size == 0:
            raise DegenerateInputError("global dataset is empty")
        counts = np.bincount(idx, minlength=N_CELLS).astype(np.float64)
        object.__setattr__(self, "global_counts", counts)
        pmf = JointPmf(counts.reshape(N_CATEGORIES, N_SLOTS) / counts.sum(), int(counts.sum()))
        object.__setattr__(self, "global_pmf", pmf)
        object.__setattr__(self, "global_mi", float(_batch_mi(counts[None, :])[0]))

    @classmethod
    def from_entries(cls, entries, kind, support=None) -> "PropertyContext":
        return cls(cells_of(entries), kind, support)

    def counts_of(self, dataset) -> np.ndarray:
        idx = np.unique(np.asarray(dataset, dtype=np.int64))
        return np.bincount(self.cells[idx], minlength=N_CELLS).astype(np.float64)

    def values_from_counts(self, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Score a batch of (B, 60) count grids; returns ``(values, empty)``.

        Empty grids score 0 and are flagged rather than raising.
        """
        counts = np.atleast_2d(np.asarray(counts, dtype=np.float64))
        empty = counts.sum(axis=1) <= 0
        values = np.zeros(counts.shape[0])
        live = ~empty
        if live.any():
            c = counts[live]
            if self.kind is PropertyKind.KLD:
                ref = self.global_counts / self.global_counts.sum()
                if np.any((c > 0) & (ref == 0)):
                    raise ValueError("dataset has records outside the global support")
                values[live] = _batch_kld(c, ref)
            else:
                values[live] = np.abs(_batch_mi(c) - self.global_mi)
        return values, empty

    def __call__(self, dataset) -> float:
        return property_value(self, dataset)


def property_value(ctx: PropertyContext, dataset) -> float:
    """Sensitive-property value of a set of record indices.

    KLD kind: divergence of the dataset's joint pmf from the global one.
    MI kind: absolute gap between the dataset's and the global mutual
    information.
    """
    dataset = np.asarray(dataset, dtype=np.int64)
    if dataset.size == 0:
        raise DegenerateInputError("property of an empty dataset is undefined")
    if dataset.min() < 0 or dataset.max() >= ctx.cells.size:
        raise IndexError("record index out of range")
    values, _ = ctx.values_from_counts(ctx.counts_of(dataset))
    return float(values[0])


def monotonicity_curve(ctx: PropertyContext, fractions, trials: int,
                       rng: np.random.Generator, nested: bool = True) -> list[float]:
    """Mean property value of random subsets at each size fraction.

    Subsets are drawn without replacement from the context's global dataset.
    With ``nested`` each trial shuffles the dataset once and grows a single
    subset through the fractions, so consecutive sizes share their records;
    otherwise every (fraction, trial) draws a fresh subset.
    """
    fractions = [float(f) for f in fractions]
    if not fractions:
        raise ValueError("no fractions given")
    if any(b < a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("fractions must be sorted ascending")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    pool = np.arange(ctx.cells.size) if ctx.support is None else np.unique(ctx.support)
    sizes = []
    for f in fractions:
        if not 0 < f <= 1:
            raise ValueError(f"fraction {f} outside (0, 1]")
        size = int(round(f * pool.size))
        if size < 1:
            raise ValueError(f"fraction {f} selects no records from {pool.size}")
        sizes.append(size)
    sums = np.zeros(len(sizes))
    for _ in range(trials):
        if nested:
            perm = rng.permutation(pool)
            for i, size in enumerate(sizes):
                sums[i] += property_value(ctx, perm[:size])
        else:
            for i, size in enumerate(sizes):
                sums[i] += property_value(ctx, rng.choice(pool, size=size, replace=False))
    return (sums / trials).tolist()
