import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import entropy as sp_entropy

from rspap.checkins import JointPmf
from rspap.measures import (DegenerateInputError, PropertyContext, PropertyKind,
                            conditional_entropy, entropy, kl_divergence, monotonicity_curve,
                            mutual_information, property_value)


def test_entropy_examples():
    assert entropy([0.25] * 4) == 2.0
    assert entropy([0, 1, 0]) == 0.0
    assert entropy([0.25, 0.75]) == pytest.approx(0.8112781244591328, abs=1e-12)
    assert entropy([0.25, 0.75]) == pytest.approx(sp_entropy([0.25, 0.75], base=2), abs=1e-12)


@pytest.mark.parametrize("bad", [[0.5, 0.6], [-0.1, 1.1], [np.nan, 1.0], []])
def test_entropy_domain_errors(bad):
    with pytest.raises(ValueError):
        entropy(bad)


def test_kld_examples():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.20751874963942196, abs=1e-12)
    assert kl_divergence([1, 0], [0.5, 0.5]) == 1.0


def test_kld_support_error():
    with pytest.raises(ValueError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])


def test_mi_examples():
    assert mutual_information(np.outer([0.3, 0.7], [0.6, 0.4])) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information([[0.5, 0], [0, 0.5]]) == 1.0
    assert mutual_information([[0.4, 0.1], [0.1, 0.4]]) == pytest.approx(0.2780719051126377, abs=1e-12)


def test_mi_accepts_joint_pmf():
    g = np.zeros((15, 4))
    g[0, 0] = g[1, 1] = 0.5
    assert mutual_information(JointPmf(g, 2)) == 1.0


def _pmf(shape):
    return arrays(np.float64, shape, elements=st.one_of(st.just(0.0), st.floats(1e-6, 1))).filter(lambda a: a.sum() > 1e-3).map(
        lambda a: a / a.sum())


@settings(max_examples=300, deadline=None)
@given(_pmf(8), _pmf(8))
def test_kld_matches_scipy(p, q):
    q = 0.5 * q + 0.5 / q.size
    q = q / q.sum()
    assert kl_divergence(p, q) == pytest.approx(sp_entropy(p, q, base=2), abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(_pmf((5, 4)))
def test_mi_identities(j):
    mi = mutual_information(j)
    px, py = j.sum(1), j.sum(0)
    assert mi == pytest.approx(kl_divergence(j.ravel(), np.outer(px, py).ravel()), abs=1e-9)
    assert mi == pytest.approx(mutual_information(j.T), abs=1e-9)
    assert mi == pytest.approx(entropy(px) - conditional_entropy(j), abs=1e-9)
    assert mi == pytest.approx(entropy(py) - conditional_entropy(j.T), abs=1e-9)
    assert -1e-9 <= mi <= min(entropy(px), entropy(py)) + 1e-9


def toy_ctx(kind):
    # six records over cells: (1,1) x3, (1,2) x2, (2,1) x1
    cells = np.array([0, 0, 0, 1, 1, 4])
    return PropertyContext(cells, kind)


def test_property_whole_corpus_is_zero():
    for kind in PropertyKind:
        assert property_value(toy_ctx(kind), np.arange(6)) == pytest.approx(0.0, abs=1e-15)


def test_property_toy_subset_by_hand():
    # subset {record 0, record 3}: P_A = (1/2 at (1,1), 1/2 at (1,2));
    # P_G = (1/2, 1/3, 1/6) at (1,1), (1,2), (2,1)
    ctx = toy_ctx(PropertyKind.KLD)
    expected = 0.5 * math.log2(0.5 / 0.5) + 0.5 * math.log2(0.5 / (1 / 3))
    assert property_value(ctx, [0, 3]) == pytest.approx(expected, abs=1e-12)
    # MI: the subset is a single category, so MI_A = 0 and the value is MI_G
    mi_ctx = toy_ctx(PropertyKind.MI)
    g = np.array([[0.5, 1 / 3], [1 / 6, 0]])
    assert property_value(mi_ctx, [0, 3]) == pytest.approx(mutual_information(g), abs=1e-12)


def test_property_errors():
    ctx = toy_ctx(PropertyKind.KLD)
    with pytest.raises(DegenerateInputError):
        property_value(ctx, [])
    with pytest.raises(IndexError):
        property_value(ctx, [6])


def test_batch_values_agree_with_pmf_functions():
    rng = np.random.default_rng(0)
    cells = rng.integers(0, 60, 5000)
    for kind in PropertyKind:
        ctx = PropertyContext(cells, kind)
        sub = rng.choice(5000, 700, replace=False)
        counts = np.bincount(cells[sub], minlength=60)
        pa = (counts / counts.sum()).reshape(15, 4)
        if kind is PropertyKind.KLD:
            ref = kl_divergence(pa.ravel(), ctx.global_pmf.probs.ravel())
        else:
            ref = abs(mutual_information(pa) - mutual_information(ctx.global_pmf.probs))
        assert property_value(ctx, sub) == pytest.approx(ref, abs=1e-12)


def test_subset_kld_is_always_finite():
    rng = np.random.default_rng(1)
    cells = rng.integers(0, 7, 300) * 3
    ctx = PropertyContext(cells, PropertyKind.KLD)
    for _ in range(50):
        v = property_value(ctx, rng.choice(300, int(rng.integers(1, 300)), replace=False))
        assert math.isfinite(v) and v >= 0


@pytest.mark.parametrize("nested", [True, False])
def test_monotonicity_curve_basic(nested):
    rng = np.random.default_rng(2)
    cells = rng.integers(0, 60, 4000)
    for kind in PropertyKind:
        ctx = PropertyContext(cells, kind)
        curve = monotonicity_curve(ctx, [0.5, 1.0], 3, rng, nested=nested)
        assert len(curve) == 2 and curve[1] == pytest.approx(0.0, abs=1e-15)
        assert curve[0] >= curve[1]


def test_monotonicity_curve_errors():
    ctx = toy_ctx(PropertyKind.KLD)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        monotonicity_curve(ctx, [0.05], 1, rng)
    with pytest.raises(ValueError):
        monotonicity_curve(ctx, [0.9, 0.5], 1, rng)
    with pytest.raises(ValueError):
        monotonicity_curve(ctx, [0.5], 0, rng)
    with pytest.raises(ValueError):
        monotonicity_curve(ctx, [1.5], 1, rng)


def test_context_support_restricts_global():
    cells = np.array([0, 1, 2, 3])
    ctx = PropertyContext(cells, PropertyKind.KLD, support=[0, 1])
    np.testing.assert_allclose(ctx.global_pmf.probs.ravel()[:4], [0.5, 0.5, 0, 0])
    with pytest.raises(ValueError):
        property_value(ctx, [2])
