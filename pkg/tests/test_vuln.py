import numpy as np
import pytest

from rspap.vuln import (VulnerabilityMatrix, even_cluster_sizes, generate_vuln_matrix,
                        validate)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_single_vm():
    D = generate_vuln_matrix([1], rng())
    assert D.d.shape == (1, 1) and 0.5 <= D.d[0, 0] <= 1.0
    assert validate(D) is None


def test_block_diagonal_isolation():
    D = generate_vuln_matrix([2, 2], rng())
    assert D.m == 4 and D.cluster_sizes == [2, 2]
    assert np.all(D.d[:2, 2:] == 0) and np.all(D.d[2:, :2] == 0)
    assert np.all(D.d[:2, :2] > 0)


def test_ordering_over_many_seeds():
    for seed in range(100):
        d = generate_vuln_matrix([3], rng(seed), (0.5, 1.0), (0.05, 0.45)).d
        off = d[~np.eye(3, dtype=bool)]
        assert off.max() < np.diag(d).min()
        assert np.array_equal(d, d.T)


def test_entry_ranges():
    D = generate_vuln_matrix([5, 3, 1], rng(3), (0.6, 0.9), (0.1, 0.2))
    diag = np.diag(D.d)
    assert diag.min() >= 0.6 and diag.max() <= 0.9
    within = D.cluster_of[:, None] == D.cluster_of[None, :]
    off = D.d[within & ~np.eye(D.m, dtype=bool)]
    assert off.min() >= 0.1 and off.max() <= 0.2
    assert validate(D) is None


@pytest.mark.parametrize("sizes,intra,cross", [
    ([2], (0.5, 1.0), (0.3, 0.6)),       # overlapping ranges
    ([2], (0.9, 0.5), (0.05, 0.45)),     # unordered
    ([2], (0.5, 1.0), (0.0, 0.45)),      # zero cross bound
    ([], (0.5, 1.0), (0.05, 0.45)),
    ([1] * 7, (0.5, 1.0), (0.05, 0.45)),
    ([33], (0.5, 1.0), (0.05, 0.45)),
    ([0], (0.5, 1.0), (0.05, 0.45)),
])
def test_parameter_errors(sizes, intra, cross):
    with pytest.raises(ValueError):
        generate_vuln_matrix(sizes, rng(), intra, cross)


def test_caps_are_configurable():
    D = generate_vuln_matrix([40], rng(), max_cluster_size=40)
    assert D.m == 40


def test_validate_reports_asymmetry():
    d = np.array([[0.8, 0.2, 0.0], [0.3, 0.9, 0.0], [0.0, 0.0, 0.7]])
    v = validate(VulnerabilityMatrix(d, [0, 0, 1]))
    assert (v.kind, v.i, v.j) == ("symmetry", 0, 1)


def test_validate_reports_negative_entry():
    d = np.array([[0.8, -0.1], [-0.1, 0.9]])
    v = validate(VulnerabilityMatrix(d, [0, 0]))
    assert v.kind == "range" and (v.i, v.j) == (0, 1)


@pytest.mark.parametrize("d,cl,kind", [
    ([[0.0, 0.0], [0.0, 0.5]], [0, 1], "diagonal"),
    ([[0.8, 0.1], [0.1, 0.9]], [0, 1], "isolation"),
    ([[0.8, 0.85], [0.85, 0.9]], [0, 0], "ordering"),
])
def test_validate_other_invariants(d, cl, kind):
    assert validate(VulnerabilityMatrix(np.array(d), cl)).kind == kind


def test_json_roundtrip():
    D = generate_vuln_matrix([4, 2], rng(9))
    doc = D.to_json()
    assert set(doc) == {"m", "cluster_sizes", "d"} and doc["cluster_sizes"] == [4, 2]
    assert VulnerabilityMatrix.loads(D.dumps()) == D
    with pytest.raises(ValueError):
        VulnerabilityMatrix.from_json({"m": 6, "cluster_sizes": [4, 1], "d": doc["d"]})


def test_determinism_and_immutability():
    a = generate_vuln_matrix([6, 6], rng(5))
    b = generate_vuln_matrix([6, 6], rng(5))
    assert a == b and a != generate_vuln_matrix([6, 6], rng(6))
    with pytest.raises(ValueError):
        a.d[0, 0] = 0.1


def test_cross_cluster_products_vanish():
    D = generate_vuln_matrix([3, 3], rng(2))
    for q in range(3):
        for l in range(3, 6):
            assert D.d[q, l] * D.d[q, q] == 0.0


@pytest.mark.parametrize("m,sizes", [(1, [1]), (30, [30]), (32, [32]), (33, [17, 16]),
                                     (64, [32, 32]), (100, [25, 25, 25, 25])])
def test_even_cluster_sizes(m, sizes):
    assert even_cluster_sizes(m) == sizes


def test_even_cluster_sizes_limits():
    with pytest.raises(ValueError):
        even_cluster_sizes(0)
    with pytest.raises(ValueError):
        even_cluster_sizes(6 * 32 + 1)
