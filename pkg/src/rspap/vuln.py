"""VM vulnerability matrices with physical-cluster block structure."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DEFAULT_INTRA = (0.5, 1.0)
DEFAULT_CROSS = (0.05, 0.45)
MAX_CLUSTERS = 6
MAX_CLUSTER_SIZE = 32


@dataclass(frozen=True)
class Violation:
    kind: str
    i: int
    j: int
    detail: str

    def __str__(self):
        return f"{self.kind} at ({self.i}, {self.j}): {self.detail}"


@dataclass(frozen=True, eq=False)
class VulnerabilityMatrix:
    """Leakage probabilities between VMs.

    ``d[q, q]`` is the leakage between roles colocated on VM ``q``;
    ``d[q, l]`` the leakage across two VMs of the same cluster. VMs in
    different clusters never leak.
    """

    d: np.ndarray
    cluster_of: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64)
        c = np.array(self.cluster_of, dtype=np.int64)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise ValueError(f"vulnerability matrix must be square and non-empty, got {d.shape}")
        if c.shape != (d.shape[0],):
            raise ValueError("cluster_of must have one entry per VM")
        d.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "cluster_of", c)

    @property
    def m(self) -> int:
        return self.d.shape[0]

    @property
    def cluster_sizes(self) -> list[int]:
        _, counts = np.unique(self.cluster_of, return_counts=True)
        return counts.tolist()

    def __eq__(self, other):
        if not isinstance(other, VulnerabilityMatrix):
            return NotImplemented
        return np.array_equal(self.d, other.d) and np.array_equal(self.cluster_of, other.cluster_of)

    def to_json(self) -> dict:
        return {"m": self.m, "cluster_sizes": self.cluster_sizes, "d": self.d.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "VulnerabilityMatrix":
        sizes = [int(x) for x in doc["cluster_sizes"]]
        d = np.asarray(doc["d"], dtype=np.float64)
        if sum(sizes) != d.shape[0] or int(doc.get("m", d.shape[0])) != d.shape[0]:
            raise ValueError("cluster_sizes and m disagree with the matrix shape")
        return cls(d, np.repeat(np.arange(len(sizes)), sizes))

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "VulnerabilityMatrix":
        return cls.from_json(json.loads(text))


def _check_range(name, r, closed_zero: bool):
    lo, hi = (float(x) for x in r)
    if not lo <= hi:
        raise ValueError(f"{name} range [{lo}, {hi}] is not ordered")
    if lo <= 0 or hi > 1 or (not closed_zero and hi >= 1):
        raise ValueError(f"{name} range [{lo}, {hi}] is outside (0, 1]")
    return lo, hi


def generate_vuln_matrix(cluster_sizes, rng: np.random.Generator,
                         intra_vm_range=DEFAULT_INTRA, cross_vm_range=DEFAULT_CROSS,
                         max_clusters: int = MAX_CLUSTERS,
                         max_cluster_size: int = MAX_CLUSTER_SIZE) -> VulnerabilityMatrix:
    sizes = [int(x) for x in cluster_sizes]
    if not 1 <= len(sizes) <= max_clusters:
        raise ValueError(f"need 1..{max_clusters} clusters, got {len(sizes)}")
    if any(not 1 <= x <= max_cluster_size for x in sizes):
        raise ValueError(f"cluster sizes must lie in 1..{max_cluster_size}, got {sizes}")
    ilo, ihi = _check_range("intra-VM", intra_vm_range, True)
    clo, chi = _check_range("cross-VM", cross_vm_range, False)
    if chi >= ilo:
        raise ValueError("cross-VM leakage must stay below intra-VM leakage: "
                         f"upper cross bound {chi} >= lower intra bound {ilo}")
    m = sum(sizes)
    cluster_of = np.repeat(np.arange(len(sizes)), sizes)
    d = np.zeros((m, m))
    start = 0
    for size in sizes:
        block = rng.uniform(clo, chi, size=(size, size))
        block = np.triu(block, 1)
        block = block + block.T
        block[np.diag_indices(size)] = rng.uniform(ilo, ihi, size=size)
        d[start:start + size, start:start + size] = block
        start += size
    return VulnerabilityMatrix(d, cluster_of)


def validate(matrix: VulnerabilityMatrix) -> Violation | None:
    """First broken invariant, or ``None`` when the matrix is well formed."""
    d, c = matrix.d, matrix.cluster_of
    m = d.shape[0]
    for q in range(m):
        for l in range(m):
            v = d[q, l]
            if not (0.0 <= v <= 1.0):
                return Violation("range", q, l, f"entry {v!r} outside [0, 1]")
    for q in range(m):
        if d[q, q] <= 0:
            return Violation("diagonal", q, q, "intra-VM leakage must be positive")
    for q in range(m):
        for l in range(q + 1, m):
            if d[q, l] != d[l, q]:
                return Violation("symmetry", q, l, f"{d[q, l]!r} != {d[l, q]!r}")
            if c[q] != c[l]:
                if d[q, l] != 0:
                    return Violation("isolation", q, l, "VMs in different clusters must not leak")
            elif d[q, l] >= min(d[q, q], d[l, l]):
                return Violation("ordering", q, l, "cross-VM leakage not below intra-VM leakage")
    return None


def even_cluster_sizes(m: int, max_clusters: int = MAX_CLUSTERS,
                       max_cluster_size: int = MAX_CLUSTER_SIZE) -> list[int]:
    """Split ``m`` VMs into as few near-equal clusters as the caps allow."""
    if m < 1:
        raise ValueError("need at least one VM")
    k = -(-m // max_cluster_size)
    if k > max_clusters:
        raise ValueError(f"{m} VMs do not fit in {max_clusters} clusters of {max_cluster_size}")
    base, extra = divmod(m, k)
    return [base + 1] * extra + [base] * (k - extra)
