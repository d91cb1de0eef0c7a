import itertools
import math

import numpy as np
import pytest

from slipstokes.quadrature import MAX_DEGREE, quadrature_for, reference_volume


def monomial_integral(powers):
    # int over the reference simplex of prod x_i^a_i = prod a_i! / (d + sum a)!
    d = len(powers)
    return math.prod(math.factorial(a) for a in powers) / math.factorial(d + sum(powers))


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("degree", range(0, 11))
def test_monomials_integrated_exactly(dim, degree):
    rule = quadrature_for(dim, degree)
    x = rule.cartesian
    for powers in itertools.product(range(degree + 1), repeat=dim):
        if sum(powers) > degree:
            continue
        val = rule.weights @ np.prod(x ** np.array(powers), axis=1)
        assert val == pytest.approx(monomial_integral(powers), rel=1e-13, abs=1e-15)


def test_x_squared_over_triangle():
    rule = quadrature_for(2, 2)
    assert rule.weights @ rule.cartesian[:, 0] ** 2 == pytest.approx(1 / 12, rel=1e-14)


def test_degree_zero_triangle_is_centroid():
    rule = quadrature_for(2, 0)
    assert rule.weights.tolist() == pytest.approx([0.5])
    np.testing.assert_allclose(rule.points, [[1 / 3, 1 / 3, 1 / 3]])


def test_degree_one_tet_weights_sum():
    assert quadrature_for(3, 1).weights.sum() == pytest.approx(1 / 6, rel=1e-15)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_positive_weights_inside_simplex(dim):
    for degree in range(0, MAX_DEGREE[dim] + 1):
        rule = quadrature_for(dim, degree)
        assert (rule.weights > 0).all()
        assert (rule.points >= 0).all()
        np.testing.assert_allclose(rule.points.sum(axis=1), 1.0)
        assert rule.weights.sum() == pytest.approx(reference_volume(dim), rel=1e-13)


@pytest.mark.parametrize("dim, degree", [(4, 1), (2, -1), (2, 99)])
def test_unsupported_requests(dim, degree):
    with pytest.raises(ValueError):
        quadrature_for(dim, degree)
