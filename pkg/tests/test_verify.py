import math

import numpy as np
import pytest

from instances import F_2, F_H, F_LC, F_SH, poly, quadratic_form
from slc.distributions import KernelSpec, SubsetWeightFn, random_psd
from slc.polynomial import hessian_at
from slc.verify import (
    DECOMPOSABLE,
    TOO_MANY_POSITIVE,
    is_m_convex_support,
    is_slc_homogeneous,
    log_submodularity_gap,
    pair_gaps,
    positive_eigenvalue_count,
    two_by_two_slc,
)
from slc.greedy import gamma_weak

REFERENCE_EIGENVALUES = [
    (F_H, [-3.1, 0.4, 4.7], False),
    (F_SH, [-3.1, -1.0, 0.3, 3.8], False),
    (F_LC, [-10.9, -2.2, -0.4, 13.6], True),
    (F_2, [-105.2, -4.0, 0.8, 108.4], False),
]


@pytest.mark.parametrize("f,eigs,slc", REFERENCE_EIGENVALUES)
def test_reference_eigenvalues_and_verdicts(f, eigs, slc):
    H = hessian_at(f, np.ones(f.num_vars))
    assert np.allclose(np.linalg.eigvalsh(H), eigs, atol=0.05)
    verdict = is_slc_homogeneous(f)
    assert verdict.is_slc is slc
    if not slc:
        assert verdict.failure_kind == TOO_MANY_POSITIVE
        assert np.allclose(verdict.eigenvalues_at_failure, eigs, atol=0.05)


def test_positive_eigenvalue_counts():
    assert positive_eigenvalue_count(hessian_at(F_H, np.ones(3))) == 2
    assert positive_eigenvalue_count(hessian_at(F_LC, np.ones(4))) == 1
    assert positive_eigenvalue_count(np.eye(3)) == 3


def test_positive_eigenvalue_count_tolerance_band():
    assert positive_eigenvalue_count(np.diag([1e-12, 1.0]), tol=1e-9) == 1


def test_positive_eigenvalue_count_errors():
    with pytest.raises(ValueError):
        positive_eigenvalue_count(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        positive_eigenvalue_count(np.eye(2), tol=0.0)
    with pytest.raises(ValueError):
        positive_eigenvalue_count(np.ones(3))


@pytest.mark.parametrize("seed", range(10))
def test_eigenvalue_count_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(5, 5))
    M = A + A.T
    p = rng.permutation(5)
    assert positive_eigenvalue_count(M) == positive_eigenvalue_count(M[np.ix_(p, p)])


def test_verdict_fields():
    ok = is_slc_homogeneous(F_LC)
    assert ok.failing_multi_index is None and ok.failure_kind is None
    bad = is_slc_homogeneous(F_H)
    assert bad.failing_multi_index == (0, 0, 0)
    assert bad.as_dict()["failure_kind"] == TOO_MANY_POSITIVE


def test_decomposable_derivative_reported():
    f = poly(4, [(1, (1, 1, 0, 0)), (1, (0, 0, 1, 1))])
    verdict = is_slc_homogeneous(f)
    assert not verdict.is_slc and verdict.failure_kind == DECOMPOSABLE


def test_low_degree_is_trivially_slc():
    assert is_slc_homogeneous(poly(2, [(1, (1, 0)), (2, (0, 1))])).is_slc


def test_non_homogeneous_rejected():
    with pytest.raises(ValueError):
        is_slc_homogeneous(poly(2, [(1, (0, 0)), (1, (1, 1))]))


def test_cubic_with_zero_derivatives():
    # e_3(x1..x4): every derivative is an elementary symmetric polynomial
    f = poly(4, [(1, e) for e in [(1, 1, 1, 0), (1, 1, 0, 1), (1, 0, 1, 1), (0, 1, 1, 1)]])
    assert is_slc_homogeneous(f).is_slc


@pytest.mark.parametrize("args,expected", [((1, 2, 1, 3), True), ((1, 1, 1, 3), False), ((0, 2, 5, 7), True)])
def test_two_by_two(args, expected):
    assert two_by_two_slc(*args) is expected


def test_two_by_two_rejects_negative():
    with pytest.raises(ValueError):
        two_by_two_slc(1, -1, 1, 1)


def test_two_by_two_against_eigenvalue_test():
    rng = np.random.default_rng(2024)
    for a, b, c, d in rng.uniform(0, 5, size=(500, 4)):
        if abs(2 * b * c - a * d) <= 1e-9:
            continue
        Q = quadratic_form(a, b, c, d)
        by_eigen = positive_eigenvalue_count(hessian_at(Q, np.ones(4))) <= 1
        assert by_eigen == two_by_two_slc(a, b, c, d)
        assert is_slc_homogeneous(Q).is_slc == by_eigen


def test_m_convex_support():
    assert is_m_convex_support(poly(2, [(1, (1, 0)), (1, (0, 1))]))
    assert not is_m_convex_support(poly(2, [(1, (2, 0)), (1, (0, 2))]))
    assert is_m_convex_support(poly(3, [(4, (1, 1, 0))]))


def test_log_submodularity_gap_examples():
    diag = SubsetWeightFn.sqrt_det(KernelSpec(np.diag([4.0, 9.0]), "custom", 0), 2)
    assert abs(log_submodularity_gap(diag)) < 1e-12
    assert log_submodularity_gap(SubsetWeightFn.modular([2.0, 0.5, 3.0])) == pytest.approx(0.0, abs=1e-12)
    corr = SubsetWeightFn.sqrt_det(KernelSpec(np.array([[1.0, 0.9], [0.9, 1.0]]), "custom", 0), 2)
    assert log_submodularity_gap(corr) == pytest.approx(0.5 * math.log(0.19), rel=1e-12)


def test_log_submodularity_gap_needs_quadruple():
    with pytest.raises(ValueError):
        log_submodularity_gap(SubsetWeightFn.uniform(1))
    with pytest.raises(ValueError):
        log_submodularity_gap(SubsetWeightFn.uniform(3, 1))


@pytest.mark.parametrize("seed", range(6))
def test_sqrt_det_weak_log_submodular(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    d = int(rng.integers(2, n + 1))
    nu = SubsetWeightFn.sqrt_det(random_psd(n, rng.uniform(0.05, 5, n), seed), d, float(rng.uniform(0, 1)))
    assert max(pair_gaps(nu)) <= math.log(gamma_weak(d)) + 1e-12
