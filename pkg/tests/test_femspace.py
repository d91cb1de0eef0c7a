import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slipstokes.cases import cavity_mesh
from slipstokes.femspace import (DiscreteField, FunctionSpace, LagrangeElement, eval_basis,
                                 interpolate)
from slipstokes.mesh import generate_structured_cube
from slipstokes.quadrature import quadrature_for

ELEMENTS = [(d, k) for d in (2, 3) for k in (1, 2)]


@pytest.mark.parametrize("dim, degree", ELEMENTS)
def test_nodal_basis_is_kronecker(dim, degree):
    el = LagrangeElement(dim, degree)
    np.testing.assert_allclose(el.values(el.nodes), np.eye(el.n_local), atol=1e-15)


@pytest.mark.parametrize("dim, degree", ELEMENTS)
def test_partition_of_unity(dim, degree, rng):
    el = LagrangeElement(dim, degree)
    bary = rng.dirichlet(np.ones(dim + 1), 50)
    np.testing.assert_allclose(el.values(bary).sum(axis=1), 1.0, atol=1e-14)
    mesh = cavity_mesh(2) if dim == 2 else generate_structured_cube(1)
    V = FunctionSpace(mesh, degree)
    tab = V.tabulate_cells(quadrature_for(dim, 3))
    np.testing.assert_allclose(tab.grads.sum(axis=2), 0.0, atol=1e-12)


@pytest.mark.parametrize("dim, degree", ELEMENTS)
def test_derivatives_match_finite_differences(dim, degree, rng):
    mesh = cavity_mesh(2) if dim == 2 else generate_structured_cube(1)
    V = FunctionSpace(mesh, degree)
    x0 = rng.dirichlet(np.ones(dim + 1))[1:] * 0.8 + 0.05
    _, g, H = eval_basis(V, 1, x0)
    coords = V.cell_coords[1]
    J = (coords[1:] - coords[0]).T
    # physical derivative via the chain rule on reference coordinates
    eps = 1e-6
    fd = []
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = eps
        vp = eval_basis(V, 1, x0 + e)[0]
        vm = eval_basis(V, 1, x0 - e)[0]
        fd.append((vp - vm) / (2 * eps))
    ref_grad = np.array(fd).T
    np.testing.assert_allclose(g @ J, ref_grad, atol=1e-8)
    if degree == 1:
        assert np.abs(H).max() == 0


@pytest.mark.parametrize("dim, degree", ELEMENTS)
def test_polynomials_reproduced_exactly(dim, degree, rng):
    mesh = cavity_mesh(3) if dim == 2 else generate_structured_cube(2)
    V = FunctionSpace(mesh, degree)
    c = rng.normal(size=(dim + 1, dim + 1))

    def poly(x):
        lin = c[0, 0] + x @ c[0, 1:]
        if degree == 2:
            lin = lin + x[:, 0] * (x @ c[1, 1:]) + c[2, 0] * x[:, -1] ** 2
        return lin

    u = interpolate(V, poly)
    tab = V.tabulate_cells(quadrature_for(dim, 4))
    vals = u.evaluate(tab, np.arange(mesh.n_cells))[0][..., 0]
    np.testing.assert_allclose(vals, poly(tab.points.reshape(-1, dim)).reshape(vals.shape),
                               atol=1e-12)


@pytest.mark.parametrize("dim, degree", ELEMENTS)
def test_continuity_across_faces(dim, degree, rng):
    mesh = cavity_mesh(3) if dim == 2 else generate_structured_cube(2)
    V = FunctionSpace(mesh, degree)
    u = DiscreteField(V, rng.normal(size=V.n_dofs))
    # evaluate both neighbours at random points of shared faces
    faces = {}
    for k, cell in enumerate(mesh.cells):
        for j in range(dim + 1):
            key = tuple(sorted(np.delete(cell, j)))
            faces.setdefault(key, []).append(k)
    checked = 0
    for key, owners in faces.items():
        if len(owners) != 2:
            continue
        w = rng.dirichlet(np.ones(dim))
        x = w @ mesh.vertices[list(key)]
        vals = []
        for k in owners:
            coords = V.cell_coords[k]
            ref = np.linalg.solve((coords[1:] - coords[0]).T, x - coords[0])
            phi = eval_basis(V, k, ref)[0]
            vals.append(phi @ u.coefficients[V.cell_nodes[k]])
        assert vals[0] == pytest.approx(vals[1], abs=1e-12)
        checked += 1
    assert checked > 5


def test_p2_dof_counts():
    m = cavity_mesh(4)
    assert FunctionSpace(m, 2).n_nodes == 9 * 9
    assert FunctionSpace(m, 2, 2).n_dofs == 2 * 81
    c = generate_structured_cube(2)
    assert FunctionSpace(c, 2).n_nodes == 5 ** 3


def test_interleaved_vector_dofs():
    V = FunctionSpace(cavity_mesh(2), 1, 2)
    np.testing.assert_array_equal(V.cell_dofs[0][:2], 2 * V.cell_nodes[0, 0] + np.arange(2))


def test_facet_tabulation_points_lie_on_facets():
    m = cavity_mesh(3)
    V = FunctionSpace(m, 2)
    tab = V.tabulate_facets(np.arange(m.n_facets), quadrature_for(1, 4))
    for k in range(m.n_facets):
        a, b = m.vertices[m.facets[k]]
        d = tab.points[k] - a
        cross = d[:, 0] * (b - a)[1] - d[:, 1] * (b - a)[0]
        np.testing.assert_allclose(cross, 0, atol=1e-14)
    np.testing.assert_allclose(tab.weights.sum(axis=1), m.facet_measures)


def test_bad_coefficients_and_degree():
    V = FunctionSpace(cavity_mesh(2), 1)
    with pytest.raises(ValueError):
        DiscreteField(V, np.zeros(3))
    with pytest.raises(ValueError):
        LagrangeElement(2, 3)
    with pytest.raises(ValueError):
        eval_basis(V, 0, [0.9, 0.9])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
def test_p2_tet_partition_of_unity_property(w):
    b = np.array(w) / sum(w)
    el = LagrangeElement(3, 2)
    assert el.values(b).sum() == pytest.approx(1.0, abs=1e-14)
    # derivative of the sum along any direction inside the simplex plane vanishes
    total = el.bary_gradients(b)[0].sum(axis=0)
    np.testing.assert_allclose(total[1:] - total[0], 0.0, atol=1e-12)
