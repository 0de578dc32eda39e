"""Disclosure risk of role-to-VM assignments and the solvers that minimize it.

Risk of role ``i`` under assignment ``V`` is the largest, over stored role
sets ``A`` containing ``i``, of ``g_i^A`` times the leakage between ``i``'s VM
and the VM of every other member of ``A``. Two heuristics (top-down
clustering and neighbor-based best fit) and an exhaustive oracle are given.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .rbac import SensitivePropertyProfile
from .vuln import VulnerabilityMatrix

MAX_LEVEL = 3
EXACT_BUDGET = 10**7
_REL_TOL = 1e-12


class CapacityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DisclosureTable:
    """Dense disclosure gains of every role against every stored role set.

    ``g2[i, j]`` is ``g_i^{i,j}``; ``g3[i, j, k]`` is ``g_i^{i,j,k}`` and is
    zero whenever two indices coincide. Sets with no data contribute zero.
    ``c`` is the symmetric pairwise weight ``g2 + g2.T``.
    """

    f1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    level: int

    @property
    def n(self) -> int:
        return self.f1.size

    @property
    def c(self) -> np.ndarray:
        return self.g2 + self.g2.T

    def g(self, i: int, roles) -> float:
        rs = sorted(set(int(r) for r in roles))
        if i not in rs:
            raise ValueError(f"role {i} is not a member of {rs}")
        others = [r for r in rs if r != i]
        if len(others) == 0:
            return 0.0
        if len(rs) > self.level:
            raise KeyError(f"role set {rs} is above the truncation level")
        if len(others) == 1:
            return float(self.g2[i, others[0]])
        return float(self.g3[i, others[0], others[1]])


def build_disclosure_table(profile: SensitivePropertyProfile) -> DisclosureTable:
    if not profile.evaluated:
        raise RuntimeError("profile has not been evaluated")
    L = len(profile.levels)
    if profile.truncation_level > MAX_LEVEL:
        raise ValueError(f"disclosure tables support truncation levels up to {MAX_LEVEL}")
    n = profile.n
    f1 = profile.levels[0].values.copy()
    g2 = np.zeros((n, n))
    g3 = np.zeros((n, n, n))
    if L >= 2:
        lv = profile.levels[1]
        a, b = lv.role_sets[:, 0], lv.role_sets[:, 1]
        v = np.where(lv.empty, np.nan, lv.values)
        g2[a, b] = np.abs(v - f1[a])
        g2[b, a] = np.abs(v - f1[b])
    if L >= 3:
        lv = profile.levels[2]
        v = np.where(lv.empty, np.nan, lv.values)
        for x, y, z in itertools.permutations(range(3)):
            i, j, k = lv.role_sets[:, x], lv.role_sets[:, y], lv.role_sets[:, z]
            g3[i, j, k] = np.abs(v - f1[i])
    # role sets without data were marked nan above; they cannot disclose
    np.nan_to_num(g2, copy=False, nan=0.0)
    np.nan_to_num(g3, copy=False, nan=0.0)
    return DisclosureTable(f1, g2, g3, min(L, profile.truncation_level))


def table_from_values(f1, pair_values=None, triple_values=None) -> DisclosureTable:
    """Table built straight from property values keyed by role-set tuples.

    Missing pairs and triples are treated as sets without data.
    """
    f1 = np.asarray(f1, dtype=np.float64)
    n = f1.size
    g2 = np.zeros((n, n))
    g3 = np.zeros((n, n, n))
    level = 1
    for rs, v in (pair_values or {}).items():
        a, b = sorted(rs)
        g2[a, b] = abs(v - f1[a])
        g2[b, a] = abs(v - f1[b])
        level = max(level, 2)
    for rs, v in (triple_values or {}).items():
        for i, j, k in itertools.permutations(sorted(rs)):
            g3[i, j, k] = abs(v - f1[i])
        level = 3
    return DisclosureTable(f1, g2, g3, level)


@dataclass(frozen=True)
class Assignment:
    vm_of: tuple
    m: int

    def __post_init__(self):
        vm = tuple(int(v) for v in self.vm_of)
        if not vm:
            raise ValueError("an assignment needs at least one role")
        if any(not 0 <= v < self.m for v in vm):
            raise ValueError(f"VM index outside [0, {self.m})")
        object.__setattr__(self, "vm_of", vm)

    @property
    def n(self) -> int:
        return len(self.vm_of)

    def array(self) -> np.ndarray:
        return np.asarray(self.vm_of, dtype=np.int64)


def _check(table: DisclosureTable, vm: np.ndarray, D: VulnerabilityMatrix):
    if vm.shape[-1] != table.n:
        raise ValueError(f"assignment covers {vm.shape[-1]} roles, table has {table.n}")
    if vm.size and (vm.min() < 0 or vm.max() >= D.m):
        raise ValueError("assignment references a VM outside the matrix")


def _risk_rows(table: DisclosureTable, d: np.ndarray, vms: np.ndarray, roles=None) -> np.ndarray:
    """Per-role risk for a batch of assignments ``vms`` of shape (B, n)."""
    roles = np.arange(table.n) if roles is None else np.asarray(roles)
    dr = d[vms[:, roles, None], vms[:, None, :]]
    pair = (table.g2[roles] * dr).max(axis=2)
    if table.level < 3:
        return np.maximum(pair, 0.0)
    triple = (table.g3[roles] * dr[:, :, :, None]) * dr[:, :, None, :]
    return np.maximum(pair, triple.max(axis=(2, 3)))


def _ordered_sum(rows: np.ndarray) -> np.ndarray:
    # sequential over roles so batched and single evaluations agree bit for bit
    total = np.zeros(rows.shape[0])
    for j in range(rows.shape[1]):
        total = total + rows[:, j]
    return total


def _as_vm(I) -> np.ndarray:
    return I.array() if isinstance(I, Assignment) else np.asarray(I, dtype=np.int64)


def per_role_risk(I, table: DisclosureTable, D: VulnerabilityMatrix) -> np.ndarray:
    vm = _as_vm(I)
    _check(table, vm, D)
    return _risk_rows(table, D.d, vm[None, :])[0]


def risk_of_role(i: int, I, table: DisclosureTable, D: VulnerabilityMatrix) -> float:
    vm = _as_vm(I)
    _check(table, vm, D)
    if not 0 <= i < table.n:
        raise ValueError(f"role {i} is not in the assignment")
    return float(_risk_rows(table, D.d, vm[None, :], [i])[0, 0])


def total_risk(I, table: DisclosureTable, D: VulnerabilityMatrix) -> float:
    vm = _as_vm(I)
    _check(table, vm, D)
    return float(_ordered_sum(_risk_rows(table, D.d, vm[None, :]))[0])


# ---------------------------------------------------------------- exact oracle

def solve_exact(table: DisclosureTable, D: VulnerabilityMatrix,
                budget: int = EXACT_BUDGET) -> tuple[Assignment, float]:
    """Enumerate all ``m**n`` assignments; lexicographically first minimizer."""
    n, m = table.n, D.m
    space = m**n
    if space > budget:
        raise CapacityError(f"exact search needs m^n = {m}^{n} = {space} evaluations, budget is {budget}")
    weights = m ** np.arange(n - 1, -1, -1, dtype=np.int64)
    chunk = max(1, min(space, 4_000_000 // max(1, n**3)))
    best_val, best_idx = math.inf, -1
    for start in range(0, space, chunk):
        idx = np.arange(start, min(space, start + chunk), dtype=np.int64)
        vms = (idx[:, None] // weights[None, :]) % m
        totals = _ordered_sum(_risk_rows(table, D.d, vms))
        k = int(np.argmin(totals))
        if totals[k] < best_val:
            best_val, best_idx = float(totals[k]), int(idx[k])
    vm = tuple(int(x) for x in (best_idx // weights) % m)
    return Assignment(vm, m), best_val


# ---------------------------------------------------------------- NBH

def solve_nbh(table: DisclosureTable, D: VulnerabilityMatrix) -> Assignment:
    """Best-fit placement driven by pairwise disclosure weights."""
    n, m = table.n, D.m
    d = D.d
    if m == 1:
        return Assignment((0,) * n, m)
    diag = np.diag(d)
    if n == 1:
        return Assignment((int(np.argmin(diag)),), m)
    C = table.c
    vm = np.full(n, -1, dtype=np.int64)

    # seed: the heaviest role pair on the least leaky VM pair
    iu = np.triu_indices(m, 1)
    p = int(np.argmin(d[iu]))
    q, l = int(iu[0][p]), int(iu[1][p])
    ir = np.triu_indices(n, 1)
    p = int(np.argmax(C[ir]))
    i, j = int(ir[0][p]), int(ir[1][p])
    # orient the seed without looking at labels: the more exposed role gets
    # the less leaky VM
    if diag[l] < diag[q]:
        q, l = l, q
    if C[j].sum() > C[i].sum():
        i, j = j, i
    vm[i], vm[j] = q, l
    free_vms = [v for v in range(m) if v not in (q, l)]

    while free_vms and (vm < 0).any():
        assigned = np.flatnonzero(vm >= 0)
        free = np.flatnonzero(vm < 0)
        sub = C[np.ix_(assigned, free)]
        a, f = np.unravel_index(int(np.argmax(sub)), sub.shape)
        a, f = int(assigned[a]), int(free[f])
        leak = d[vm[a], free_vms]
        target = free_vms[int(np.argmin(leak))]
        vm[f] = target
        free_vms.remove(target)

    for r in np.flatnonzero(vm < 0):
        B = np.zeros(m)
        placed = vm >= 0
        for v in range(m):
            on_v = placed & (vm == v)
            if on_v.any():
                B[v] = C[r, on_v].max() * diag[v]
        vm[r] = int(np.argmin(B))
    return Assignment(tuple(vm.tolist()), m)


# ---------------------------------------------------------------- TDH

class _Cluster:
    """Member set of a TDH cluster plus each member's best attack value.

    For clusters above the truncation level a member's value is its best gain
    over stored subsets of the cluster, tracked with the (j, k) pair that
    attains it so removals only rescan the members they affect.
    """

    def __init__(self, members, hc, table):
        self.members = sorted(int(x) for x in members)
        self.hc = hc
        self.table = table
        self.h = {}
        self.arg = {}
        self._rescan(self.members)

    def _best(self, x, pool):
        if len(pool) == 0:
            return 0.0, (x, x)
        sub = self.hc[x][np.ix_(pool, pool)]
        flat = int(np.argmax(sub))
        a, b = divmod(flat, len(pool))
        return float(sub.flat[flat]), (pool[a], pool[b])

    def _rescan(self, xs, exclude=None):
        pool = [y for y in self.members if y != exclude]
        out = {}
        for x in xs:
            out[x] = self._best(x, pool)
        if exclude is None:
            for x, (v, a) in out.items():
                self.h[x], self.arg[x] = v, a
        return out

    def small_score(self, members) -> float:
        k = len(members)
        t = self.table
        if k <= 1:
            return 0.0
        if k == 2:
            a, b = members
            return float(t.g2[a, b] + t.g2[b, a])
        a, b, c = members
        return float(t.g3[a, b, c] + t.g3[b, a, c] + t.g3[c, a, b])

    def score(self) -> float:
        if len(self.members) <= self.table.level:
            return self.small_score(self.members)
        return float(sum(self.h[x] for x in self.members))

    def score_without(self, r):
        rest = [x for x in self.members if x != r]
        if len(rest) <= self.table.level:
            return self.small_score(rest), None
        hit = [x for x in rest if r in self.arg[x]]
        fresh = self._rescan(hit, exclude=r)
        total = sum(fresh[x][0] if x in fresh else self.h[x] for x in rest)
        return float(total), fresh

    def score_with(self, r):
        grown = sorted(self.members + [r])
        if len(grown) <= self.table.level:
            return self.small_score(grown), None
        fresh = {}
        for x in self.members:
            row = self.hc[x][r, grown]
            k = int(np.argmax(row))
            if row[k] > self.h[x]:
                fresh[x] = (float(row[k]), (r, grown[k]))
        fresh[r] = self._best(r, grown)
        total = sum(fresh[x][0] if x in fresh else self.h[x] for x in grown)
        return float(total), fresh

    def remove(self, r, fresh):
        self.members.remove(r)
        self.h.pop(r, None)
        self.arg.pop(r, None)
        if fresh is None:
            self._rescan(self.members)
        else:
            for x, (v, a) in fresh.items():
                self.h[x], self.arg[x] = v, a

    def add(self, r, fresh):
        self.members = sorted(self.members + [r])
        if fresh is None:
            self._rescan(self.members)
        else:
            for x, (v, a) in fresh.items():
                self.h[x], self.arg[x] = v, a


def _closure(table: DisclosureTable) -> np.ndarray:
    # hc[r, j, k]: gain of r from the stored set {r, j, k}; pairs on the diagonal
    n = table.n
    hc = table.g3.copy() if table.level >= 3 else np.zeros((n, n, n))
    jj = np.arange(n)
    hc[:, jj, jj] = table.g2
    hc[jj, jj, :] = 0.0
    hc[jj, :, jj] = 0.0
    return hc


def _split(cluster: _Cluster, hc, table) -> _Cluster:
    order = sorted(cluster.members, key=lambda x: (-cluster.h.get(x, 0.0), x))
    new = _Cluster([], hc, table)
    dis = cluster.score()
    moved = False
    for r in order:
        if len(cluster.members) == 1:
            break
        s1, f1 = cluster.score_without(r)
        s2, f2 = new.score_with(r)
        if s1 + s2 < dis:
            cluster.remove(r, f1)
            new.add(r, f2)
            dis = cluster.score() + new.score()
            moved = True
    if not moved:
        # every move raised the score; still split off the strongest attacker
        r = order[0]
        _, f1 = cluster.score_without(r)
        _, f2 = new.score_with(r)
        cluster.remove(r, f1)
        new.add(r, f2)
    return new


def tdh_clusters(table: DisclosureTable, m: int) -> list[list[int]]:
    """Phase one of TDH: divisive clustering into at most ``m`` clusters,
    returned in descending score order."""
    hc = _closure(table)
    clusters = [_Cluster(range(table.n), hc, table)]
    while len(clusters) < m:
        target = next((c for c in clusters if len(c.members) >= 2), None)
        if target is None:
            break
        clusters.append(_split(target, hc, table))
        clusters.sort(key=lambda c: -c.score())
    return [c.members for c in clusters]


class _RiskState:
    """Per-role risk under a changing assignment, with the attaining pair."""

    def __init__(self, table: DisclosureTable, d: np.ndarray, vm: np.ndarray):
        self.t = table
        self.d = d
        self.vm = vm.copy()
        n = table.n
        self.risk = np.zeros(n)
        self.arg = [(0, 0)] * n
        for j in range(n):
            self._refresh(j)

    def _row_terms(self, j, dj):
        pair = self.t.g2[j] * dj
        tri = (self.t.g3[j] * dj[:, None]) * dj[None, :]
        tri[np.arange(dj.size), np.arange(dj.size)] = pair
        return tri

    def _refresh(self, j, exclude=None):
        dj = self.d[self.vm[j], self.vm]
        terms = self._row_terms(j, dj)
        if exclude is not None:
            terms[exclude, :] = 0.0
            terms[:, exclude] = 0.0
        flat = int(np.argmax(terms))
        k, l = divmod(flat, terms.shape[1])
        val = max(float(terms[k, l]), 0.0)
        if exclude is None:
            self.risk[j], self.arg[j] = val, (k, l)
        return val

    def _incoming(self, i):
        # w[j]: best gain of j from any stored set holding i, before the
        # leakage factor between j and i's VM is applied
        t = self.t
        w = t.g2[:, i].copy()
        if t.level >= 3:
            dr = self.d[self.vm[:, None], self.vm[None, :]]
            w = np.maximum(w, (t.g3[:, i, :] * dr).max(axis=1))
        w[i] = 0.0
        return w

    def moves_for(self, i):
        """Total risk if role ``i`` moved to each VM."""
        t, d, vm = self.t, self.d, self.vm
        # gains only meet the leakage through the partners' VMs, so take the
        # best gain per occupied VM (pair) first; scaling by d >= 0 keeps maxima
        order = np.argsort(vm, kind="stable")
        used, starts = np.unique(vm[order], return_index=True)
        P = d[:, used]
        g2 = np.maximum.reduceat(t.g2[i][order], starts)
        own = (g2[None, :] * P).max(axis=1)
        if t.level >= 3:
            g3 = t.g3[i][np.ix_(order, order)]
            g3 = np.maximum.reduceat(np.maximum.reduceat(g3, starts, axis=0), starts, axis=1)
            tri = (g3[None, :, :] * P[:, :, None]) * P[:, None, :]
            own = np.maximum(own, tri.max(axis=(1, 2)))
        own = np.maximum(own, 0.0)
        rex = self.risk.copy()
        for j in range(t.n):
            if j != i and i in self.arg[j]:
                rex[j] = self._refresh(j, exclude=i)
        w = self._incoming(i)
        # new_other[q, j] = max(rex_j, d[vm_j, q] * w_j)
        new_other = np.maximum(rex[None, :], d[vm].T * w[None, :])
        new_other[:, i] = own
        return _ordered_sum(new_other)

    def move(self, i, q):
        w = self._incoming(i)
        self.vm[i] = q
        reach = self.d[self.vm, q] * w
        for j in range(self.t.n):
            if j == i or i in self.arg[j] or reach[j] >= self.risk[j]:
                self._refresh(j)

    def total(self) -> float:
        return float(_ordered_sum(self.risk[None, :])[0])


def improve(table: DisclosureTable, D: VulnerabilityMatrix, vm: np.ndarray,
            max_sweeps: int = 1000) -> np.ndarray:
    """Single-role moves, swept over all roles, while total risk strictly drops."""
    state = _RiskState(table, D.d, vm)
    current = state.total()
    for _ in range(max_sweeps):
        moved = False
        for i in range(table.n):
            totals = state.moves_for(i)
            q = int(np.argmin(totals))
            if q != state.vm[i] and totals[q] < current - _REL_TOL * max(current, 1e-300):
                state.move(i, q)
                current = state.total()
                moved = True
        if not moved:
            break
    return state.vm


def solve_tdh(table: DisclosureTable, D: VulnerabilityMatrix) -> Assignment:
    """Top-down clustering, cluster-to-VM matching, then local improvement."""
    n, m = table.n, D.m
    if m == 1:
        return Assignment((0,) * n, m)
    clusters = tdh_clusters(table, m)
    order = np.argsort(np.diag(D.d), kind="stable")
    vm = np.zeros(n, dtype=np.int64)
    for c, q in zip(clusters, order):
        vm[c] = q
    vm = improve(table, D, vm)
    return Assignment(tuple(vm.tolist()), m)


SOLVERS = {"tdh": solve_tdh, "nbh": solve_nbh}


def assignment_to_json(I: Assignment, table: DisclosureTable, D: VulnerabilityMatrix,
                       heuristic: str, seed=None) -> dict:
    per = per_role_risk(I, table, D)
    return {"heuristic": heuristic, "seed": seed, "vm_of": list(I.vm_of),
            "total_risk": total_risk(I, table, D), "per_role_risk": per.tolist()}


def assignment_from_json(doc: dict, m: int) -> Assignment:
    return Assignment(tuple(doc["vm_of"]), m)


def dumps(doc: dict) -> str:
    return json.dumps(doc)
