import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import F_H, F_LC, poly
from slc.polynomial import (
    SparsePolynomial,
    eval_poly,
    hessian_at,
    is_indecomposable,
    partial_derivative,
    read_polynomial,
    write_polynomial,
)

# 1 + 2y + z + 3yz in (y, z)
P = poly(2, [(1, (0, 0)), (2, (1, 0)), (1, (0, 1)), (3, (1, 1))])


def test_zero_terms_pruned_and_merged():
    p = SparsePolynomial(2, {(1, 0): 0.0, (0, 1): 2.0})
    assert p.terms == {(0, 1): 2.0}
    assert (p + p).coefficient((0, 1)) == 4.0


@pytest.mark.parametrize("terms", [{(1,): -1.0}, {(-1,): 1.0}, {(1, 0): 1.0}])
def test_invalid_terms_rejected(terms):
    with pytest.raises(ValueError):
        SparsePolynomial(1, terms)


def test_degree_and_shape_queries():
    assert P.degree() == 2
    assert SparsePolynomial.zero(3).degree() == -1
    assert not P.is_homogeneous()
    assert F_H.is_homogeneous()
    assert P.is_multiaffine() and not F_H.is_multiaffine()
    assert F_H.var_degrees() == [2, 1, 1]


@pytest.mark.parametrize("point,expected", [((0, 0), 1.0), ((1, 1), 7.0)])
def test_eval(point, expected):
    assert eval_poly(P, point) == expected


def test_eval_monomial():
    assert poly(2, [(1, (1, 1))])((2, 3)) == 6.0


def test_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_poly(P, (1, 2, 3))


def test_partial_derivatives():
    assert partial_derivative(P, (1, 0)) == poly(2, [(2, (0, 0)), (3, (0, 1))])
    c = 3.5
    assert partial_derivative(poly(1, [(c / 2, (2,))]), (2,)) == poly(1, [(c, (0,))])
    assert partial_derivative(poly(2, [(4, (0, 0))]), (0, 1)).is_zero()


def test_hessian_of_f_h():
    H = hessian_at(F_H, np.random.default_rng(0).uniform(0, 3, 3))
    assert np.array_equal(H, [[2, 2, 1], [2, 0, 3], [1, 3, 0]])


def test_hessian_of_monomial():
    assert np.array_equal(hessian_at(poly(2, [(1, (1, 1))]), (5, 7)), [[0, 1], [1, 0]])


def test_hessian_of_log_concave_quadratic():
    expected = [[0, 10, 3, 2], [10, 0, 2, 6], [3, 2, 0, 1], [2, 6, 1, 0]]
    assert np.array_equal(hessian_at(F_LC, np.ones(4)), expected)


@pytest.mark.parametrize(
    "p,expected",
    [
        (poly(3, [(1, (1, 1, 0)), (1, (0, 1, 1))]), True),
        (poly(4, [(1, (1, 1, 0, 0)), (1, (0, 0, 1, 1))]), False),
        (poly(1, [(1, (1,))]), True),
        (poly(3, [(1, (1, 1, 1))]), True),
        (SparsePolynomial.zero(2), True),
    ],
)
def test_indecomposable(p, expected):
    assert is_indecomposable(p) is expected


def test_text_roundtrip():
    buf = io.StringIO()
    write_polynomial(F_H, buf)
    buf.seek(0)
    assert read_polynomial(buf) == F_H


def test_text_parse_comments_and_errors():
    assert read_polynomial(io.StringIO("# f\n1 0 0\n\n2 1 0  # y\n")) == poly(2, [(1, (0, 0)), (2, (1, 0))])
    with pytest.raises(ValueError):
        read_polynomial(io.StringIO("1 0 0\n2 1\n"))
    with pytest.raises(ValueError):
        read_polynomial(io.StringIO("# nothing\n"))
    with pytest.raises(ValueError):
        read_polynomial(io.StringIO("x 1\n"))


exponents = st.lists(st.integers(0, 2), min_size=3, max_size=3).filter(lambda e: sum(e) <= 4)
polys = st.dictionaries(exponents.map(tuple), st.floats(0.1, 10), min_size=1, max_size=6).map(
    lambda t: SparsePolynomial(3, t)
)
points = st.lists(st.floats(0.1, 2.0), min_size=3, max_size=3)
alphas = st.lists(st.integers(0, 2), min_size=3, max_size=3).filter(lambda a: 0 < sum(a) <= 2)


def _finite_difference(p, alpha, x, h=1e-3):
    # central differences, one coordinate at a time
    def diff(fn, i, order):
        if order == 0:
            return fn
        if order == 1:
            return lambda y: (fn(_shift(y, i, h)) - fn(_shift(y, i, -h))) / (2 * h)
        return lambda y: (fn(_shift(y, i, h)) - 2 * fn(y) + fn(_shift(y, i, -h))) / h**2

    fn = lambda y: eval_poly(p, y)  # noqa: E731
    for i, a in enumerate(alpha):
        fn = diff(fn, i, a)
    return fn(np.asarray(x, dtype=float))


def _shift(y, i, h):
    z = np.array(y, dtype=float)
    z[i] += h
    return z


@settings(max_examples=60, deadline=None)
@given(polys, alphas, points)
def test_derivative_matches_finite_differences(p, alpha, x):
    exact = eval_poly(partial_derivative(p, alpha), x)
    approx = _finite_difference(p, alpha, x)
    assert math.isclose(exact, approx, rel_tol=1e-6, abs_tol=1e-6)


@settings(max_examples=20, deadline=None)
@given(polys, points)
def test_hessian_equals_iterated_derivatives(p, x):
    H = hessian_at(p, x)
    for i in range(3):
        for j in range(3):
            a = [0, 0, 0]
            a[i] += 1
            inner = partial_derivative(p, a)
            b = [0, 0, 0]
            b[j] += 1
            assert H[i, j] == eval_poly(partial_derivative(inner, b), x)


@settings(max_examples=40, deadline=None)
@given(polys, polys, alphas)
def test_derivative_is_linear(p, q, alpha):
    lhs = partial_derivative(p + q, alpha)
    rhs = partial_derivative(p, alpha) + partial_derivative(q, alpha)
    assert lhs.terms.keys() == rhs.terms.keys()
    for e, c in lhs.items():
        assert math.isclose(c, rhs.coefficient(e), rel_tol=1e-12)
