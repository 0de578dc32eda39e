"""RBAC policies, Zipfian workloads and the sensitive property profile.

A profile partitions the data objects by the exact set of roles that may
read them. Each partition records its size and, once a dataset is bound,
which records it holds. Property values are then evaluated for every role
set up to a truncation level; a role set reads everything any of its
members can read.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

import numpy as np

from ._combinatorics import (
    MATERIALIZE_LIMIT,
    RankBijection,
    ZipfSampler,
    rank_combination,
    unrank_combination,
    unrank_combinations,
)
from .checkins import N_CELLS
from .measures import PropertyContext, PropertyKind

log = logging.getLogger(__name__)

RoleSet = tuple[int, ...]

DEFAULT_LEVEL = 3


class EvaluationError(RuntimeError):
    """A property function failed on a particular role set."""

    def __init__(self, role_set: RoleSet, cause: Exception):
        super().__init__(f"property evaluation failed for role set {list(role_set)}: {cause}")
        self.role_set = role_set


class BindingWarning(UserWarning):
    pass


def make_role_set(members: Iterable[int], n: int | None = None) -> RoleSet:
    rs = tuple(sorted(set(int(m) for m in members)))
    if not rs:
        raise ValueError("a role set must be non-empty")
    if rs[0] < 0 or (n is not None and rs[-1] >= n):
        raise ValueError(f"role index out of range in {list(rs)}")
    return rs


@dataclass(frozen=True)
class RbacPolicy:
    """Role-to-object permissions as a bipartite graph."""

    n: int
    object_count: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a policy needs at least one role")
        if self.object_count < 0:
            raise ValueError("object_count must be non-negative")
        edges = frozenset((int(r), int(o)) for r, o in self.edges)
        for r, o in edges:
            if not (0 <= r < self.n and 0 <= o < self.object_count):
                raise ValueError(f"edge ({r}, {o}) references an unknown role or object")
        object.__setattr__(self, "edges", edges)

    def out_degree(self, role: int) -> int:
        return sum(1 for r, _ in self.edges if r == role)

    def in_degree(self, obj: int) -> int:
        return sum(1 for _, o in self.edges if o == obj)

    def roles_of(self, obj: int) -> RoleSet:
        return tuple(sorted(r for r, o in self.edges if o == obj))

    def partitions(self) -> dict[RoleSet, list[int]]:
        """Objects grouped by the exact set of roles that can access them."""
        owners: dict[int, list[int]] = {}
        for r, o in sorted(self.edges):
            owners.setdefault(o, []).append(r)
        groups: dict[RoleSet, list[int]] = {}
        for o in sorted(owners):
            groups.setdefault(tuple(owners[o]), []).append(o)
        return dict(sorted(groups.items()))


class SensitivityClass(str, enum.Enum):
    HSD = "HSD"
    MSD = "MSD"
    LSD = "LSD"


def classify_sensitivity(s: float) -> SensitivityClass:
    if not s >= 1:
        raise ValueError(f"Zipf parameter must be >= 1, got {s!r}")
    if s >= 2:
        return SensitivityClass.HSD
    if s >= 1.5:
        return SensitivityClass.MSD
    return SensitivityClass.LSD


def zipf_sample(N: int, s: float, rng: np.random.Generator) -> int:
    """One Zipf-distributed rank in ``[1, N]``."""
    return int(ZipfSampler(N, s).sample(rng, 1)[0])


@dataclass
class SppEntry:
    role_set: RoleSet
    cardinality: int
    property_value: float | None = None
    entry_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


@dataclass(frozen=True)
class LevelValues:
    """Property values of every k-subset of roles, in lexicographic order."""

    k: int
    role_sets: np.ndarray
    values: np.ndarray
    empty: np.ndarray


@dataclass(frozen=True)
class SensitivePropertyProfile:
    n: int
    partitions: Mapping[RoleSet, SppEntry]
    s: float | None = None
    truncation_level: int = DEFAULT_LEVEL
    property_kind: PropertyKind | None = None
    levels: tuple[LevelValues, ...] = ()
    bound: bool = False
    overflow: bool = False

    @property
    def total_cardinality(self) -> int:
        return sum(e.cardinality for e in self.partitions.values())

    @property
    def evaluated(self) -> bool:
        return len(self.levels) > 0

    def _level_index(self, roles) -> tuple[LevelValues, int]:
        rs = make_role_set(roles, self.n)
        if not self.evaluated:
            raise RuntimeError("profile has not been evaluated")
        if len(rs) > len(self.levels):
            raise KeyError(f"role set {list(rs)} is above the truncation level")
        return self.levels[len(rs) - 1], rank_combination(rs, self.n)

    def value(self, roles) -> float:
        lv, i = self._level_index(roles)
        return float(lv.values[i])

    def is_empty(self, roles) -> bool:
        lv, i = self._level_index(roles)
        return bool(lv.empty[i])

    def singleton_values(self) -> np.ndarray:
        if not self.evaluated:
            raise RuntimeError("profile has not been evaluated")
        return self.levels[0].values.copy()

    def role_has_data(self) -> np.ndarray:
        has = np.zeros(self.n, dtype=bool)
        for rs, e in self.partitions.items():
            if e.cardinality > 0:
                has[list(rs)] = True
        return has

    def level_totals(self) -> np.ndarray:
        """Number of objects at each lattice level (index 0 is level 1)."""
        out = np.zeros(self.n, dtype=np.int64)
        for rs, e in self.partitions.items():
            out[len(rs) - 1] += e.cardinality
        return out

    def to_json(self) -> dict:
        rows: dict[RoleSet, dict] = {}
        for rs, e in self.partitions.items():
            rows[rs] = {"roles": list(rs), "cardinality": int(e.cardinality),
                        "property_value": None, "entry_ids": e.entry_ids.tolist()}
        for lv in self.levels:
            for rs, v in zip(map(tuple, lv.role_sets.tolist()), lv.values.tolist()):
                row = rows.get(rs)
                if row is None:
                    rows[rs] = {"roles": list(rs), "cardinality": 0,
                                "property_value": v, "entry_ids": []}
                else:
                    row["property_value"] = v
        return {
            "n": self.n,
            "L": self.truncation_level,
            "s": self.s,
            "property_kind": None if self.property_kind is None else self.property_kind.value,
            "partitions": [rows[k] for k in sorted(rows)],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SensitivePropertyProfile":
        n = int(doc["n"])
        L = int(doc.get("L", DEFAULT_LEVEL))
        kind = doc.get("property_kind")
        parts: dict[RoleSet, SppEntry] = {}
        values: dict[RoleSet, float] = {}
        all_ids = []
        for row in doc["partitions"]:
            rs = make_role_set(row["roles"], n)
            ids = np.asarray(row.get("entry_ids", []), dtype=np.int64)
            card = int(row["cardinality"])
            if ids.size and ids.size != card:
                raise ValueError(f"partition {list(rs)}: {ids.size} ids for cardinality {card}")
            if card > 0:
                parts[rs] = SppEntry(rs, card, None, ids)
                all_ids.append(ids)
            if row.get("property_value") is not None:
                values[rs] = float(row["property_value"])
        bound = any(e.entry_ids.size for e in parts.values())
        ids = np.concatenate(all_ids) if all_ids else np.empty(0, dtype=np.int64)
        prof = cls(n=n, partitions=dict(sorted(parts.items())), s=doc.get("s"),
                   truncation_level=L, bound=bound,
                   overflow=bool(bound and np.unique(ids).size < ids.size))
        if kind is None:
            return prof
        has = prof.role_has_data()
        levels = []
        for k in range(1, L + 1):
            sets = _combinations_array(n, k)
            vals = np.zeros(len(sets))
            empty = ~has[sets].any(axis=1)
            for i, rs in enumerate(map(tuple, sets.tolist())):
                if rs in values:
                    vals[i] = values[rs]
                elif not empty[i]:
                    raise ValueError(f"missing property value for role set {list(rs)}")
            levels.append(LevelValues(k, sets, vals, empty))
        prof = replace(prof, property_kind=PropertyKind(kind), levels=tuple(levels))
        return _with_partition_values(prof)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "SensitivePropertyProfile":
        return cls.from_json(json.loads(text))


def _combinations_array(n: int, k: int) -> np.ndarray:
    if k > n:
        return np.empty((0, k), dtype=np.int64)
    count = math.comb(n, k)
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), k)),
                       dtype=np.int64, count=count * k)
    return flat.reshape(count, k)


def enumerate_role_sets(n: int, L: int) -> list[RoleSet]:
    """All role sets of size 1..L, ordered by size then lexicographically."""
    return [rs for k in range(1, min(L, n) + 1) for rs in itertools.combinations(range(n), k)]


def generate_workload(n: int, object_count: int, s: float, rng: np.random.Generator,
                      materialize_limit: int = MATERIALIZE_LIMIT) -> SensitivePropertyProfile:
    """Spread ``object_count`` objects over the role-set lattice.

    Each object first draws a lattice level from a Zipf law over ``1..n``;
    then a Zipf rank over the ``C(n, level)`` role sets of that level, which a
    per-level seeded bijection maps onto a concrete role set.
    """
    if n < 1 or int(n) != n:
        raise ValueError(f"role count must be a positive integer, got {n!r}")
    if object_count < 1 or int(object_count) != object_count:
        raise ValueError(f"object_count must be a positive integer, got {object_count!r}")
    if not s >= 1:
        raise ValueError(f"Zipf parameter must be >= 1, got {s!r}")
    levels = ZipfSampler(n, s).sample(rng, object_count)
    buckets = np.bincount(levels, minlength=n + 1)[1:]
    counts: Counter = Counter()
    for level in range(1, n + 1):
        b = int(buckets[level - 1])
        if b == 0:
            continue
        size = math.comb(n, level)
        ranks = ZipfSampler(size, s).sample(rng, b)
        bij = RankBijection(size, rng, materialize_limit)
        if size < (1 << 62):
            idx = bij(np.asarray(ranks, dtype=np.int64) - 1)
            uniq, mult = np.unique(idx, return_counts=True)
            sets = unrank_combinations(uniq, n, level)
            for rs, c in zip(map(tuple, sets.tolist()), mult.tolist()):
                counts[rs] += c
        else:
            for r, c in Counter(int(x) for x in ranks).items():
                y = int(bij([r - 1])[0])
                counts[unrank_combination(y, n, level)] += c
    parts = {rs: SppEntry(rs, c) for rs, c in sorted(counts.items())}
    return SensitivePropertyProfile(n=n, partitions=parts, s=float(s))


def profile_from_policy(policy: RbacPolicy) -> SensitivePropertyProfile:
    """Profile skeleton whose partitions are the policy's exact-set groups.

    Object ``o`` becomes record ``o``, so the skeleton comes out already bound.
    """
    parts = {rs: SppEntry(rs, len(objs), None, np.asarray(objs, dtype=np.int64))
             for rs, objs in policy.partitions().items()}
    return SensitivePropertyProfile(n=policy.n, partitions=parts, bound=True)


def bind_dataset(profile: SensitivePropertyProfile, entries, rng: np.random.Generator) -> SensitivePropertyProfile:
    """Give every partition as many record indices as its cardinality.

    Records come from one seeded shuffle of the dataset, so partitions are
    disjoint. When the dataset runs out, the remainder is drawn with
    replacement and the profile is flagged ``overflow``.
    """
    size = entries if isinstance(entries, (int, np.integer)) else len(entries)
    if size <= 0:
        raise ValueError("cannot bind a profile to an empty dataset")
    total = profile.total_cardinality
    perm = rng.permutation(size)
    overflow = total > size
    if overflow:
        warnings.warn(f"profile needs {total} records but the dataset has {size}; "
                      "sampling the remainder with replacement", BindingWarning, stacklevel=2)
        perm = np.concatenate([perm, rng.integers(0, size, size=total - size)])
    parts = {}
    pos = 0
    for rs, e in profile.partitions.items():
        ids = np.sort(perm[pos:pos + e.cardinality])
        pos += e.cardinality
        parts[rs] = SppEntry(rs, e.cardinality, None, ids)
    return replace(profile, partitions=parts, bound=True, overflow=overflow,
                   levels=(), property_kind=None)


def _role_index(profile: SensitivePropertyProfile) -> list[list[np.ndarray]]:
    per_role: list[list[np.ndarray]] = [[] for _ in range(profile.n)]
    for rs, e in profile.partitions.items():
        if e.entry_ids.size:
            for r in rs:
                per_role[r].append(e.entry_ids)
    return per_role


def _union(chunks: list[np.ndarray]) -> np.ndarray:
    if not chunks:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(chunks))


def role_dataset(profile: SensitivePropertyProfile, roles) -> np.ndarray:
    """Sorted record indices readable by at least one member of ``roles``."""
    rs = make_role_set(roles, profile.n)
    if not profile.bound:
        raise RuntimeError("profile has no bound dataset")
    chunks = [e.entry_ids for p, e in profile.partitions.items()
              if e.entry_ids.size and not set(p).isdisjoint(rs)]
    return _union(chunks)


def evaluate_profile(profile: SensitivePropertyProfile,
                     property_fn: PropertyContext | Callable[[np.ndarray], float],
                     level: int = DEFAULT_LEVEL) -> SensitivePropertyProfile:
    """Property values for every role set of size ``<= level``.

    ``property_fn`` is either a :class:`PropertyContext` or any callable
    mapping an array of record indices to a non-negative float. Role sets
    whose dataset is empty get value 0 and are flagged.
    """
    if not profile.bound:
        raise RuntimeError("bind a dataset before evaluating the profile")
    if level < 1:
        raise ValueError("truncation level must be >= 1")
    L = min(level, profile.n)
    if isinstance(property_fn, PropertyContext) and not profile.overflow and L <= 3:
        levels = _fast_levels(profile, property_fn, L)
    else:
        levels = _generic_levels(profile, property_fn, L)
    kind = property_fn.kind if isinstance(property_fn, PropertyContext) else None
    out = replace(profile, truncation_level=level, levels=tuple(levels), property_kind=kind)
    return _with_partition_values(out)


def _with_partition_values(profile: SensitivePropertyProfile) -> SensitivePropertyProfile:
    parts = {}
    for rs, e in profile.partitions.items():
        v = profile.value(rs) if len(rs) <= len(profile.levels) else None
        parts[rs] = SppEntry(rs, e.cardinality, v, e.entry_ids)
    return replace(profile, partitions=parts)


def _generic_levels(profile, property_fn, L) -> list[LevelValues]:
    per_role = [_union(chunks) for chunks in _role_index(profile)]
    levels = []
    for k in range(1, L + 1):
        sets = _combinations_array(profile.n, k)
        vals = np.zeros(len(sets))
        empty = np.zeros(len(sets), dtype=bool)
        for i, rs in enumerate(sets.tolist()):
            ids = _union([per_role[r] for r in rs])
            if ids.size == 0:
                empty[i] = True
                continue
            try:
                v = float(property_fn(ids))
            except Exception as exc:  # noqa: BLE001 - re-raised with the role set attached
                raise EvaluationError(tuple(rs), exc) from exc
            if not (v >= 0 and math.isfinite(v)):
                raise EvaluationError(tuple(rs), ValueError(f"invalid property value {v!r}"))
            vals[i] = v
        levels.append(LevelValues(k, sets, vals, empty))
    return levels


def _fast_levels(profile: SensitivePropertyProfile, ctx: PropertyContext, L: int) -> list[LevelValues]:
    # Count grids of role-set unions by inclusion-exclusion over partition
    # count grids: S1[a] sums partitions containing a, S2[a,b] those
    # containing both, S3 those containing all three.
    n = profile.n
    parts = [(rs, e.entry_ids) for rs, e in profile.partitions.items() if e.entry_ids.size]
    if not parts:
        return _generic_levels(profile, ctx, L)
    sizes = np.array([ids.size for _, ids in parts])
    pid = np.repeat(np.arange(len(parts)), sizes)
    cells = ctx.cells[np.concatenate([ids for _, ids in parts])]
    uniq, w = np.unique(pid * N_CELLS + cells, return_counts=True)
    upid, ucell = uniq // N_CELLS, uniq % N_CELLS
    order = np.argsort(ucell, kind="stable")
    upid, ucell, w = upid[order], ucell[order], w[order].astype(np.float32)
    member = np.zeros((len(parts), n), dtype=np.float32)
    for j, (rs, _) in enumerate(parts):
        member[j, list(rs)] = 1.0
    xu = member[upid]
    bounds = np.searchsorted(ucell, np.arange(N_CELLS + 1))
    slices = [(c, bounds[c], bounds[c + 1]) for c in range(N_CELLS) if bounds[c + 1] > bounds[c]]

    s1 = np.zeros((n, N_CELLS))
    for c, lo, hi in slices:
        s1[:, c] = w[lo:hi] @ xu[lo:hi]
    levels = []
    sets1 = _combinations_array(n, 1)
    v, e = ctx.values_from_counts(s1)
    levels.append(LevelValues(1, sets1, v, e))
    if L == 1:
        return levels

    s2 = np.zeros((n, n, N_CELLS))
    for c, lo, hi in slices:
        x = xu[lo:hi]
        s2[:, :, c] = np.rint((x * w[lo:hi, None]).T @ x)
    sets2 = _combinations_array(n, 2)
    a, b = sets2[:, 0], sets2[:, 1]
    v, e = ctx.values_from_counts(s1[a] + s1[b] - s2[a, b])
    levels.append(LevelValues(2, sets2, v, e))
    if L == 2:
        return levels

    sets3 = _combinations_array(n, 3)
    vals3 = np.zeros(len(sets3))
    empty3 = np.zeros(len(sets3), dtype=bool)
    pos = 0
    for a in range(n - 2):
        iu_b, iu_d = np.triu_indices(n - a - 1, 1)
        bb, dd = iu_b + a + 1, iu_d + a + 1
        s3 = np.zeros((n - a - 1, n - a - 1, N_CELLS))
        for c, lo, hi in slices:
            x = xu[lo:hi]
            rows = x[:, a] > 0
            if not rows.any():
                continue
            y = x[rows][:, a + 1:]
            s3[:, :, c] = np.rint((y * w[lo:hi][rows, None]).T @ y)
        counts = (s1[a] + s1[bb] + s1[dd] - s2[a, bb] - s2[a, dd] - s2[bb, dd]
                  + s3[iu_b, iu_d])
        v, e = ctx.values_from_counts(counts)
        vals3[pos:pos + len(v)] = v
        empty3[pos:pos + len(v)] = e
        pos += len(v)
    levels.append(LevelValues(3, sets3, vals3, empty3))
    return levels


def is_union_monotone(profile: SensitivePropertyProfile, tol: float = 1e-12) -> bool:
    """True when no evaluated role set scores above any of its members.

    Under this condition every disclosure gain is bounded by the attacking
    role's own property value. A member without data scores 0, so any set
    holding one fails unless the set scores 0 too.
    """
    if not profile.evaluated:
        raise RuntimeError("profile has not been evaluated")
    single = profile.levels[0].values
    for lv in profile.levels[1:]:
        live = ~lv.empty
        if not live.any():
            continue
        bound = single[lv.role_sets[live]].min(axis=1)
        if np.any(lv.values[live] > bound + tol):
            return False
    return True
