import numpy as np
import pytest
import scipy.sparse as sp

from slipstokes.analysis import error_norms
from slipstokes.assembly import ProblemConfig, assemble, make_spaces
from slipstokes.cases import case_cavity2d, case_manufactured_pressure2d, cavity_mesh
from slipstokes.linsolve import (SingularSystemError, relative_residual, solve_direct,
                                 solve_iterative, solve_stokes)


@pytest.fixture(scope="module")
def system16():
    mesh = cavity_mesh(16)
    spaces = make_spaces(mesh, 1)
    return assemble(mesh, spaces, ProblemConfig(beta=0.007), case_cavity2d())


def test_one_by_one():
    rep = solve_direct((sp.csr_matrix([[4.0]]), np.array([2.0])))
    assert rep.solution.tolist() == [0.5]
    assert rep.residual == 0.0
    rep = solve_iterative((sp.csr_matrix([[4.0]]), np.array([2.0])))
    assert rep.solution[0] == pytest.approx(0.5, rel=1e-12)


def test_zero_rhs_gives_exact_zero(system16):
    b = np.zeros(system16.size)
    for rep in (solve_direct(system16, rhs=b), solve_iterative(system16, rhs=b)):
        assert not rep.solution.any()
        assert rep.residual == 0.0


def test_direct_residual_is_recomputed(system16):
    rep = solve_direct(system16)
    assert rep.residual == pytest.approx(
        relative_residual(system16.matrix, rep.solution, system16.rhs), rel=1e-12, abs=1e-18)
    assert rep.residual < 1e-12
    assert rep.iterations == 0


def test_iterative_agrees_with_direct(system16):
    tol = 1e-10
    d = solve_direct(system16)
    it = solve_iterative(system16, tol=tol)
    assert it.converged and it.residual <= tol
    err = np.linalg.norm(it.solution - d.solution) / np.linalg.norm(d.solution)
    assert err <= 10 * tol


def test_identity_converges_immediately():
    n = 50
    rep = solve_iterative((sp.identity(n, format="csr"), np.arange(1.0, n + 1)), tol=1e-12)
    assert rep.converged
    assert rep.iterations <= 2
    np.testing.assert_allclose(rep.solution, np.arange(1.0, n + 1), rtol=1e-12)


def test_max_iter_zero_flags_nonconvergence(system16):
    rep = solve_iterative(system16, max_iter=0)
    assert not rep.converged
    assert rep.residual == pytest.approx(1.0)
    with pytest.raises(ValueError):
        solve_iterative(system16, tol=0)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        solve_direct((sp.identity(3), np.ones(2)))


def test_exactly_singular_reports_pivot():
    A = sp.csr_matrix(np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 2.0]]))
    with pytest.raises(SingularSystemError) as info:
        solve_direct((A, np.ones(3)))
    assert info.value.pivot == 1


def test_unconstrained_pressure_constant_is_diagnosed():
    # without the mean-value multiplier and with beta = 0 the constant pressure is a null
    # mode; an incompatible right-hand side must be reported, with a pressure pivot
    mesh = cavity_mesh(8)
    spaces = make_spaces(mesh, 1)
    s = assemble(mesh, spaces, ProblemConfig.unchecked(beta=0.0, gamma0=10.0), case_cavity2d(),
                 check=False)
    A = s.matrix[:-1, :-1]
    b = s.rhs[:-1].copy()
    b[s.pressure_slice] += 1.0
    with pytest.raises(SingularSystemError) as info:
        solve_direct((A, b))
    assert s.n_velocity <= info.value.pivot < s.n_velocity + s.n_pressure


def test_unstabilized_equal_order_is_worse():
    # Nitsche's boundary pressure coupling keeps beta = 0 nonsingular on these meshes,
    # but the discrete inf-sup constant decays and the pressure error is larger
    case = case_manufactured_pressure2d()
    ratios, errs = [], {}
    for beta in (0.0, 0.007):
        for n in (4, 8):
            mesh = cavity_mesh(n)
            spaces = make_spaces(mesh, 1)
            s = assemble(mesh, spaces, ProblemConfig.unchecked(beta=beta, gamma0=10.0), case,
                         check=False)
            sv = np.linalg.svd(s.matrix.toarray(), compute_uv=False)
            ratios.append(sv[-1] / sv[0])
            u, p = s.split(solve_direct(s).solution)
            errs[beta, n] = error_norms(case.exact, u, p).err_p_L2
    assert errs[0.0, 8] > 1.5 * errs[0.007, 8]
    assert ratios[1] < ratios[0]


def test_solve_stokes_zero_mean_pressure(system16):
    from slipstokes.assembly import pressure_mean_functional
    mesh = cavity_mesh(8)
    for method in ("direct", "iterative"):
        sol = solve_stokes(mesh, ProblemConfig(beta=0.007), case_manufactured_pressure2d(),
                           method=method)
        m = pressure_mean_functional(sol.pressure.space)
        assert abs(m @ sol.pressure.coefficients) < 1e-12
    with pytest.raises(ValueError):
        solve_stokes(mesh, ProblemConfig(), case_cavity2d(), method="magic")
