"""Direct and Krylov solvers for assembled saddle-point systems."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (AssembledSystem, ProblemConfig, assemble, make_spaces,
                       pressure_mean_functional)
from .femspace import DiscreteField

log = logging.getLogger(__name__)

MAX_DIRECT_UNKNOWNS = 2_000_000
DENSE_DIAGNOSTIC_LIMIT = 4000
RESIDUAL_FALLBACK = 1e-11
SINGULAR_PIVOT_RATIO = 1e-14


class SingularSystemError(RuntimeError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


@dataclass
class SolveReport:
    solution: np.ndarray
    residual: float
    method: str
    iterations: int
    wall_time: float
    converged: bool = True
    refinement_steps: int = 0


def _matrix_rhs(system, rhs=None):
    if hasattr(system, "matrix"):
        A = system.matrix
        b = system.rhs if rhs is None else rhs
    else:
        A, b = system
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError("matrix must be square and match the right-hand side")
    return A, b


def relative_residual(A, x, b) -> float:
    r = np.linalg.norm(A @ x - b)
    nb = np.linalg.norm(b)
    return float(r / nb) if nb > 0 else float(r)


def _zero_pivot(A):
    if A.shape[0] > DENSE_DIAGNOSTIC_LIMIT:
        return None
    _, _, U = scipy.linalg.lu(A.toarray())
    diag = np.abs(np.diag(U))
    small = np.flatnonzero(diag <= 1e-13 * max(diag.max(), 1.0))
    return int(small[0]) if small.size else int(np.argmin(diag))


def _tiny_pivot(lu):
    """Original column of the smallest U pivot if it is negligible, else None."""
    d = np.abs(lu.U.diagonal())
    j = int(np.argmin(d))
    if d[j] > SINGULAR_PIVOT_RATIO * d.max():
        return None
    return int(np.flatnonzero(lu.perm_c == j)[0])


def _factor(A, static):
    if static:
        # symmetric-pattern minimum degree with diagonal pivots; fast for these saddle systems
        return spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                         options={"SymmetricMode": True})
    return spla.splu(A, permc_spec="COLAMD")


def solve_direct(system, rhs=None, refine_tol: float = 1e-13, max_refine: int = 3) -> SolveReport:
    """Sparse LU solve with iterative refinement.

    The first attempt factors with static diagonal pivoting on a minimum
    degree ordering of ``A + A^T``; if refinement cannot bring the relative
    residual below ``RESIDUAL_FALLBACK`` the matrix is refactored with
    partial pivoting (COLAMD).  ``system`` is an
    :class:`~slipstokes.assembly.AssembledSystem` or a ``(matrix, rhs)``
    pair.  Raises :class:`SingularSystemError` when both factorizations
    break down, or when the pivoted factor has a negligible pivot and the
    residual cannot be reduced (inconsistent singular system).
    """
    A, b = _matrix_rhs(system, rhs)
    if A.shape[0] > MAX_DIRECT_UNKNOWNS:
        raise MemoryError(f"{A.shape[0]} unknowns exceed the direct solver limit")
    t0 = time.perf_counter()
    if not b.any():
        return SolveReport(np.zeros_like(b), 0.0, "superlu", 0, time.perf_counter() - t0)
    best = None
    error = None
    for static in (True, False):
        try:
            lu = _factor(A, static)
        except RuntimeError as exc:
            error = exc
            continue
        x = lu.solve(b)
        res = relative_residual(A, x, b)
        steps = 0
        while np.isfinite(res) and res > refine_tol and steps < max_refine:
            x_new = x + lu.solve(b - A @ x)
            res_new = relative_residual(A, x_new, b)
            steps += 1
            if not res_new < res:
                break
            x, res = x_new, res_new
        method = "superlu-static" if static else "superlu-colamd"
        if not static and not res <= RESIDUAL_FALLBACK:
            pivot = _tiny_pivot(lu)
            if pivot is not None:
                raise SingularSystemError(
                    f"matrix is numerically singular (negligible pivot at column {pivot}, "
                    f"relative residual {res:.2e})", pivot=pivot)
        if np.isfinite(res) and (best is None or res < best.residual):
            best = SolveReport(x, res, method, 0, 0.0, refinement_steps=steps)
        if best is not None and best.residual <= RESIDUAL_FALLBACK:
            break
    if best is None:
        pivot = _zero_pivot(A)
        raise SingularSystemError(f"sparse LU failed ({error}); zero pivot near row {pivot}",
                                  pivot=pivot)
    best.wall_time = time.perf_counter() - t0
    return best


def solve_iterative(system, tol: float = 1e-10, max_iter: int = 500, rhs=None,
                    drop_tol: float = 1e-5, fill_factor: float = 20.0) -> SolveReport:
    """Restarted GMRES preconditioned by an incomplete LU factorization.

    Stops once the true relative residual is below ``tol``.  Non-convergence
    is flagged in the report, not raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, b = _matrix_rhs(system, rhs)
    t0 = time.perf_counter()
    x = np.zeros_like(b)
    if not b.any():
        return SolveReport(x, 0.0, "gmres+ilu", 0, time.perf_counter() - t0)
    if max_iter <= 0:
        return SolveReport(x, relative_residual(A, x, b), "gmres+ilu", 0,
                           time.perf_counter() - t0, converged=False)
    ilu = spla.spilu(A, drop_tol=drop_tol, fill_factor=fill_factor)
    M = spla.LinearOperator(A.shape, ilu.solve)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    res = relative_residual(A, x, b)
    # outer loop guards against the inner stopping test using the preconditioned residual
    while res > tol and iterations < max_iter:
        r = b - A @ x
        dx, _ = spla.gmres(A, r, M=M, rtol=tol * np.linalg.norm(b) / np.linalg.norm(r) * 0.1,
                           atol=0.0, restart=min(100, max_iter), maxiter=max_iter - iterations,
                           callback=count, callback_type="pr_norm")
        x = x + dx
        new = relative_residual(A, x, b)
        if not new < res:
            break
        res = new
    converged = res <= tol
    if not converged:
        log.warning("GMRES stopped at relative residual %.3e after %d iterations", res, iterations)
    return SolveReport(x, res, "gmres+ilu", iterations, time.perf_counter() - t0, converged)


@dataclass
class StokesSolution:
    velocity: DiscreteField
    pressure: DiscreteField
    report: SolveReport
    system: AssembledSystem
    config: ProblemConfig


def solve_stokes(mesh, config, case, spaces=None, method: str = "direct",
                 tol: float = 1e-10, max_iter: int = 1000) -> StokesSolution:
    """Assemble and solve; the pressure is shifted to exactly zero discrete mean."""
    spaces = spaces or make_spaces(mesh, config.degree)
    system = assemble(mesh, spaces, config, case)
    if method == "direct":
        report = solve_direct(system)
    elif method == "iterative":
        report = solve_iterative(system, tol=tol, max_iter=max_iter)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    u, p = system.split(report.solution)
    mean = pressure_mean_functional(spaces.pressure)
    p.coefficients = p.coefficients - (mean @ p.coefficients) / mean.sum()
    return StokesSolution(u, p, report, system, config)
