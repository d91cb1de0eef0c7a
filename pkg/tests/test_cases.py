import numpy as np
import pytest

from slipstokes.cases import (CYLINDER_H, cavity_mesh, NACA_FAR_FIELD, BuiltinCase, case_cavity2d,
                              case_cylinder3d, case_manufactured_pressure2d, case_naca2d,
                              case_patch_affine3d, case_patch_constant_flow, cylinder_inflow,
                              get_case)
from slipstokes.quadrature import quadrature_for

EXACT_CASES = [case_cavity2d(), case_cavity2d(nu=0.37), case_manufactured_pressure2d(),
               case_manufactured_pressure2d(nu=2.0), case_patch_constant_flow(2),
               case_patch_constant_flow(3, a=2.5), case_patch_affine3d(nu=0.5)]
IDS = [f"{c.name}-nu{c.nu}" for c in EXACT_CASES]


def fd_source(case, x, h=1e-4):
    """-div sigma(u, p) from central differences of the exact u and p callables."""
    d = case.dim
    nu = case.nu

    def grad_u(y):  # (d, d) by differences of u
        out = np.zeros((d, d))
        for b in range(d):
            e = np.zeros(d)
            e[b] = h
            out[:, b] = (case.exact.u((y + e)[None])[0] - case.exact.u((y - e)[None])[0]) / (2 * h)
        return out

    def sigma(y):
        g = grad_u(y)
        return nu * (g + g.T) - case.exact.p(y[None])[0] * np.eye(d)

    div = np.zeros(d)
    for b in range(d):
        e = np.zeros(d)
        e[b] = h
        div += (sigma(x + e)[:, b] - sigma(x - e)[:, b]) / (2 * h)
    return -div


@pytest.mark.parametrize("case", EXACT_CASES, ids=IDS)
def test_source_matches_finite_differences(case):
    rng = np.random.default_rng(7)
    lo = -1.0 if case.name.startswith(("cavity", "manufactured")) else 0.0
    x = rng.uniform(lo + 0.05, 0.95, (20, case.dim))
    f = case.f(x)
    fd = np.array([fd_source(case, xi) for xi in x])
    assert np.abs(f - fd).max() <= 1e-6 * max(1.0, np.abs(f).max())


@pytest.mark.parametrize("case", EXACT_CASES, ids=IDS)
def test_exact_gradients_and_stress_consistent(case):
    rng = np.random.default_rng(3)
    x = rng.uniform(0.05, 0.95, (10, case.dim))
    g = case.exact.grad_u(x)
    sig = case.exact.sigma(x)
    expected = case.nu * (g + np.swapaxes(g, 1, 2)) - case.exact.p(x)[:, None, None] * np.eye(
        case.dim)
    np.testing.assert_allclose(sig, expected, atol=1e-13)
    h = 1e-6
    for b in range(case.dim):
        e = np.zeros(case.dim)
        e[b] = h
        fd = (case.exact.u(x + e) - case.exact.u(x - e)) / (2 * h)
        np.testing.assert_allclose(g[:, :, b], fd, atol=1e-7)


def test_cavity_slip_data_vanishes():
    case = case_cavity2d()
    x = np.column_stack([np.linspace(-1, 1, 21), -np.ones(21)])
    np.testing.assert_allclose(case.g(x), 0.0, atol=1e-15)
    np.testing.assert_allclose(case.exact.p(x), 0.0)
    n = np.tile([0.0, -1.0], (21, 1))
    t = np.tile([1.0, 0.0], (21, 1))
    # s_1 = sigma n . t = -sigma_xy on y = -1
    sxy = case.exact.sigma(x)[:, 0, 1]
    np.testing.assert_allclose(case.s[0](x, n, t), -sxy)


def test_manufactured_pressure_properties():
    case = case_manufactured_pressure2d()
    rng = np.random.default_rng(11)
    x = rng.uniform(-1, 1, (50, 2))
    assert np.abs(np.trace(case.exact.grad_u(x), axis1=1, axis2=2)).max() <= 1e-12
    # zero mean follows from p(-x, y) = -p(x, y)
    np.testing.assert_allclose(case.exact.p(x * [-1, 1]), -case.exact.p(x), atol=1e-15)
    mesh = cavity_mesh(8)
    rule = quadrature_for(2, 12)
    pts = np.einsum("qa,kab->kqb", rule.points, mesh.vertices[mesh.cells])
    total = np.sum(2 * mesh.cell_volumes[:, None] * rule.weights * case.exact.p(
        pts.reshape(-1, 2)).reshape(pts.shape[:2]))
    assert abs(total) < 1e-12
    edges = np.array([[-1, 0.3], [1, -0.2], [0.4, 1], [0.1, -1]])
    np.testing.assert_allclose(case.exact.u(edges), 0.0, atol=1e-15)


def test_cylinder_inflow_profile():
    H = CYLINDER_H
    u = cylinder_inflow(np.array([[0.0, H / 2, H / 2]]))
    assert u[0, 0] == pytest.approx(0.45, rel=1e-14)
    assert not u[0, 1:].any()
    walls = np.array([[0, 0, 0.2], [0, H, 0.1], [0, 0.3, 0], [0, 0.1, H]])
    np.testing.assert_allclose(cylinder_inflow(walls), 0.0, atol=1e-16)
    case = case_cylinder3d()
    assert case.nu == pytest.approx(1e-3) and case.exact is None


def test_naca_far_field():
    case = case_naca2d()
    x = np.random.default_rng(0).uniform(-5, 5, (7, 2))
    np.testing.assert_allclose(case.h_dirichlet(x), np.tile(NACA_FAR_FIELD, (7, 1)))
    assert case.g is None and case.s is None


def test_get_case_dispatch():
    for name in BuiltinCase:
        case = get_case(name.value, dim=3 if name.value.endswith("3d") else 2)
        assert case.name.startswith(name.value.split("-")[0][:5])
    assert get_case("patch-constant", 3).dim == 3
    assert get_case("cavity2d", nu=0.5).nu == 0.5
    with pytest.raises(ValueError):
        get_case("unknown")
