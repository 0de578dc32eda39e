from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_instance
from rspap.assignment import Assignment, solve_nbh, solve_tdh, table_from_values
from rspap.measures import DegenerateInputError
from rspap.metrics import (build_report, discrimination_index, property_attackability,
                           quality_of_risk_reduction)
from rspap.rbac import LevelValues, SensitivePropertyProfile, generate_workload
from rspap.vuln import VulnerabilityMatrix


def hand_profile(f1, pairs=()):
    """Profile holding only hand-set property values."""
    n = len(f1)
    levels = [LevelValues(1, np.arange(n)[:, None], np.asarray(f1, float), np.zeros(n, bool))]
    if pairs:
        rs = np.array([p for p, _ in pairs])
        levels.append(LevelValues(2, rs, np.array([v for _, v in pairs]), np.zeros(len(pairs), bool)))
    return SensitivePropertyProfile(n, {}, truncation_level=len(levels), levels=tuple(levels))


def test_pa_examples():
    pa, per = property_attackability(hand_profile([0.2, 0.3]))
    assert pa == pytest.approx(0.5, abs=1e-15) and per == [0.2, 0.3]
    assert property_attackability(hand_profile([0.0, 0.0, 0.0]))[0] == 0.0
    pa, _ = property_attackability(hand_profile([0.4, 0.1, 0.25, 0.05]))
    assert pa == pytest.approx(0.8, abs=1e-15)


def test_pa_needs_evaluated_profile():
    with pytest.raises(RuntimeError):
        property_attackability(generate_workload(3, 20, 1.2, np.random.default_rng(0)))


def test_delta_examples():
    assert quality_of_risk_reduction(0.5, 0.0) == 1.0
    assert quality_of_risk_reduction(0.5, 0.5) == 0.0
    assert quality_of_risk_reduction(0.5, 0.15) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(DegenerateInputError):
        quality_of_risk_reduction(0.0, 0.1)


def test_di_examples():
    assert discrimination_index([0.4, 0.4, 0.4]) == 0.0
    assert discrimination_index([1.0, 0.0]) == 0.5
    assert discrimination_index([0.2, 0.4, 0.6]) == pytest.approx(1 - 1.44 / 1.68, abs=1e-12)
    assert discrimination_index([0.2, 0.4, 0.6]) == pytest.approx(0.142857, abs=1e-6)
    assert discrimination_index([0.0, 0.0]) == 0.0
    assert discrimination_index([0.3]) == 0.0
    with pytest.raises(DegenerateInputError):
        discrimination_index([])


def test_two_role_report():
    prof = hand_profile([0.2, 0.3], [((0, 1), 0.1)])
    t = table_from_values([0.2, 0.3], {(0, 1): 0.1})
    D = VulnerabilityMatrix(np.array([[0.5]]), [0])
    rep = build_report(Assignment((0, 0), 1), t, D, prof)
    assert rep.total_risk == pytest.approx(0.15, abs=1e-15)
    assert rep.pa == pytest.approx(0.5, abs=1e-15)
    assert rep.delta == pytest.approx(0.7, abs=1e-12)
    np.testing.assert_allclose(rep.per_role_delta, [0.75, 2 / 3], atol=1e-12)
    # exact rational evaluation of the index for (3/4, 2/3)
    a, b = Fraction(3, 4), Fraction(2, 3)
    di = 1 - (a + b) ** 2 / (2 * (a * a + b * b))
    assert rep.di == pytest.approx(float(di), abs=1e-12)
    assert rep.di == pytest.approx(0.003448, abs=1e-6)
    assert rep.monotone and rep.delta_in_range and rep.excluded_roles == []


def test_zero_vulnerability_report(corpus_cells):
    prof, t, _ = small_instance(8, 3, 2, corpus_cells)
    Z = VulnerabilityMatrix(np.zeros((3, 3)), [0, 0, 0])
    rep = build_report(solve_tdh(t, Z), t, Z, prof)
    assert rep.delta == 1.0 and rep.di == 0.0 and all(r == 0 for r in rep.per_role_risk)


def test_single_role_report():
    prof = hand_profile([0.3])
    t = table_from_values([0.3])
    D = VulnerabilityMatrix(np.array([[0.5]]), [0])
    rep = build_report(Assignment((0,), 1), t, D, prof)
    assert rep.di == 0.0 and rep.delta == 1.0


def test_roles_without_attackability_are_excluded():
    prof = hand_profile([0.0, 0.3, 0.2], [((0, 1), 0.1), ((1, 2), 0.25)])
    t = table_from_values([0.0, 0.3, 0.2], {(0, 1): 0.1, (1, 2): 0.25})
    D = VulnerabilityMatrix(np.array([[0.5]]), [0])
    rep = build_report(Assignment((0, 0, 0), 1), t, D, prof)
    assert rep.excluded_roles == [0] and len(rep.per_role_delta) == 2
    assert not rep.monotone  # {0,1} scores above its empty-valued member


def test_all_zero_attackability_is_degenerate():
    prof = hand_profile([0.0, 0.0])
    t = table_from_values([0.0, 0.0])
    D = VulnerabilityMatrix(np.array([[0.5]]), [0])
    rep = build_report(Assignment((0, 0), 1), t, D, prof)
    assert rep.delta is None and rep.di is None and rep.delta_in_range is None


def test_report_invariants_on_generated_instances(corpus_cells):
    for seed in range(6):
        prof, t, D = small_instance(12, 4, seed, corpus_cells, clusters=[2, 2])
        for solver in (solve_tdh, solve_nbh):
            rep = build_report(solver(t, D), t, D, prof)
            assert rep.total_risk == pytest.approx(sum(rep.per_role_risk), abs=1e-9)
            assert rep.pa == pytest.approx(sum(rep.per_role_pa), abs=1e-9)
            n_inc = len(rep.per_role_delta)
            assert -1e-12 <= rep.di <= 1 - 1 / n_inc + 1e-12 or min(rep.per_role_delta) < 0
            if rep.monotone:
                assert 0 <= rep.delta <= 1
            doc = rep.to_json()
            assert set(doc) >= {"per_role_risk", "total_risk", "pa", "delta", "di", "excluded_roles"}


nonneg = st.lists(st.floats(0, 1e3, allow_subnormal=False), min_size=1, max_size=40).filter(
    lambda x: sum(x) > 0)


@settings(max_examples=300, deadline=None)
@given(nonneg)
def test_di_bounds(x):
    di = discrimination_index(x)
    assert -1e-12 <= di <= 1 - 1 / len(x) + 1e-12


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_subnormal=False), min_size=1, max_size=40))
def test_di_in_unit_interval_for_any_sign(x):
    di = discrimination_index(x)
    assert -1e-12 <= di <= 1 + 1e-12


@settings(max_examples=200, deadline=None)
@given(nonneg, st.floats(1e-3, 1e3))
def test_di_scale_invariance(x, c):
    assert discrimination_index(np.asarray(x) * c) == pytest.approx(discrimination_index(x), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3, allow_subnormal=False), st.integers(1, 200))
def test_di_exactly_zero_for_equal_shares(v, n):
    assert discrimination_index([v] * n) == 0.0
