"""Attackability, quality of risk reduction and the discrimination index."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .assignment import Assignment, DisclosureTable, per_role_risk
from .measures import DegenerateInputError
from .rbac import SensitivePropertyProfile, is_union_monotone
from .vuln import VulnerabilityMatrix


def property_attackability(profile: SensitivePropertyProfile) -> tuple[float, list[float]]:
    """Sum of single-role property values, with the per-role values."""
    per = profile.singleton_values()
    return float(per.sum()), per.tolist()


def quality_of_risk_reduction(pa: float, total_risk: float) -> float:
    if not pa > 0:
        raise DegenerateInputError("risk reduction is undefined when attackability is 0")
    return (pa - total_risk) / pa


def discrimination_index(per_role_delta) -> float:
    """One minus Jain's fairness index of the per-role reductions."""
    x = np.asarray(per_role_delta, dtype=np.float64)
    if x.size == 0:
        raise DegenerateInputError("no roles left to compare")
    # equal shares are perfectly fair; skip the rounding of the quotient
    if np.all(x == x[0]):
        return 0.0
    # the index is scale free; normalizing keeps tiny or huge shares from
    # underflowing or overflowing when squared
    x = x / np.max(np.abs(x))
    sq = float(np.sum(x * x))
    s = float(np.sum(x))
    return 1.0 - (s * s) / (x.size * sq)


@dataclass
class RiskReport:
    per_role_risk: list
    total_risk: float
    pa: float
    per_role_pa: list
    delta: float | None
    per_role_delta: list
    di: float | None
    excluded_roles: list
    monotone: bool
    delta_in_range: bool | None

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def build_report(I: Assignment, table: DisclosureTable, D: VulnerabilityMatrix,
                 profile: SensitivePropertyProfile) -> RiskReport:
    per_risk = per_role_risk(I, table, D)
    total = 0.0
    for r in per_risk:
        total += float(r)
    pa, per_pa = property_attackability(profile)
    f = np.asarray(per_pa)
    included = f > 0
    excluded = np.flatnonzero(~included).tolist()
    per_delta = ((f[included] - per_risk[included]) / f[included]).tolist()
    delta = quality_of_risk_reduction(pa, total) if pa > 0 else None
    di = discrimination_index(per_delta) if per_delta else None
    return RiskReport(
        per_role_risk=per_risk.tolist(),
        total_risk=total,
        pa=pa,
        per_role_pa=per_pa,
        delta=delta,
        per_role_delta=per_delta,
        di=di,
        excluded_roles=excluded,
        monotone=is_union_monotone(profile),
        delta_in_range=None if delta is None else bool(0.0 <= delta <= 1.0),
    )
