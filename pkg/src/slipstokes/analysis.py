"""Error norms, the mesh-dependent stability norm, convergence studies,
inverse/trace constant estimation and parameter selection."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .assembly import (HIGH_ORDER, CaseDefinition, ProblemConfig, Spaces, assemble,
                       local_to_global, make_spaces, pressure_mean_functional, vector_basis)
from .femspace import DiscreteField, FunctionSpace, LagrangeElement, facet_bary_to_cell, \
    tabulate
from .linsolve import solve_stokes
from .mesh import BoundaryTag, SimplicialMesh
from .quadrature import quadrature_for

BETA_SAFETY = 0.5
GAMMA_SAFETY = 2.0
DEFAULT_GAMMA0 = 10.0

CSV_COLUMNS = ("h", "err_p_L2", "order_p", "err_u_L2", "order_u_L2", "err_u_H1",
               "order_u_H1", "slip_violation")


@dataclass
class ErrorReport:
    h: float
    err_p_L2: float
    err_u_L2: float
    err_u_H1: float
    slip_violation: float | None = None
    triple_norm: float | None = None
    residual: float | None = None
    orders: dict = field(default_factory=dict)


@dataclass
class ConstantEstimates:
    C_in: float
    C_tr: float
    cell_C_in: np.ndarray
    cell_C_tr: np.ndarray  # (nc, d+1), one value per face of each cell


# -- norms ---------------------------------------------------------------------

def _sym(g):
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def triple_norm(mesh: SimplicialMesh, spaces: Spaces, config: ProblemConfig, fields) -> float:
    """Stability norm of ``(v, q)``: viscous energy, scaled boundary and pressure-gradient terms."""
    v, q = fields
    V, Q = spaces
    if v.space is not V or q.space is not Q:
        raise ValueError("fields do not live on the given spaces")
    nu = config.nu
    d = mesh.dim
    cells = np.arange(mesh.n_cells)
    tab = Q.tabulate_cells(quadrature_for(d, 2 * config.degree))
    _, vg, _ = v.evaluate(tab, cells)
    _, qg, _ = q.evaluate(tab, cells)
    ev = _sym(vg)
    total = nu * np.sum(tab.weights * np.einsum("kqab,kqab->kq", ev, ev))
    total += np.sum(mesh.cell_diameters[:, None] ** 2 / nu * tab.weights
                    * np.einsum("kqa,kqa->kq", qg[:, :, 0], qg[:, :, 0]))
    frule = quadrature_for(d - 1, 2 * config.degree)
    for tag in (BoundaryTag.DIRICHLET, BoundaryTag.SLIP):
        facets = mesh.facets_with(tag)
        if facets.size == 0:
            continue
        ftab = Q.tabulate_facets(facets, frule)
        vv = v.evaluate(ftab, mesh.facet_cells[facets])[0]
        if tag == BoundaryTag.SLIP:
            vn = np.einsum("kqa,ka->kq", vv, mesh.facet_normals[facets])
            sq = vn**2
        else:
            sq = np.einsum("kqa,kqa->kq", vv, vv)
        total += np.sum(nu / mesh.facet_diameters[facets][:, None] * ftab.weights * sq)
    return float(math.sqrt(max(total, 0.0)))


def norm_matrix(mesh: SimplicialMesh, spaces: Spaces, config: ProblemConfig) -> sp.csr_matrix:
    """Block-diagonal matrix ``N`` with ``x^T N x`` equal to the squared triple norm.

    The trailing multiplier row/column is zero so ``N`` matches system vectors.
    """
    V, Q = spaces
    d = mesh.dim
    nu = config.nu
    tab = Q.tabulate_cells(quadrature_for(d, 2 * config.degree))
    vb = vector_basis(tab)
    w = tab.weights
    A = nu * np.einsum("kq,kqmab,kqnab->kmn", w, vb.eps, vb.eps)
    S = (mesh.cell_diameters**2 / nu)[:, None, None] * np.einsum(
        "kq,kqja,kqia->kij", w, vb.gphi, vb.gphi)
    nvl = A.shape[1]
    blocks = [np.block([[A, np.zeros((A.shape[0], nvl, S.shape[1]))],
                        [np.zeros((A.shape[0], S.shape[1], nvl)), S]])]
    dofs = [local_to_global(spaces, np.arange(mesh.n_cells))]
    frule = quadrature_for(d - 1, 2 * config.degree)
    for tag in (BoundaryTag.DIRICHLET, BoundaryTag.SLIP):
        facets = mesh.facets_with(tag)
        if facets.size == 0:
            continue
        ftab = Q.tabulate_facets(facets, frule)
        fb = vector_basis(ftab)
        n = mesh.facet_normals[facets]
        if tag == BoundaryTag.SLIP:
            vn = np.einsum("kqma,ka->kqm", fb.val, n)
            mass = np.einsum("kq,kqs,kqr->krs", ftab.weights, vn, vn)
        else:
            mass = np.einsum("kq,kqsa,kqra->krs", ftab.weights, fb.val, fb.val)
        mass *= (nu / mesh.facet_diameters[facets])[:, None, None]
        nb, nl = mass.shape[0], fb.phi.shape[2]
        full = np.zeros((nb, nvl + nl, nvl + nl))
        full[:, :nvl, :nvl] = mass
        blocks.append(full)
        dofs.append(local_to_global(spaces, mesh.facet_cells[facets]))
    size = V.n_dofs + Q.n_dofs + 1
    rows = np.concatenate([np.repeat(g, g.shape[1], axis=1).ravel() for g in dofs])
    cols = np.concatenate([np.tile(g, (1, g.shape[1])).ravel() for g in dofs])
    vals = np.concatenate([b.ravel() for b in blocks])
    return sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def error_norms(exact, velocity: DiscreteField, pressure: DiscreteField,
                g: Callable | None = None, quad_degree: int | None = None) -> ErrorReport:
    """L2/H1 velocity and L2 pressure errors against callable exact fields.

    ``quad_degree`` overrides the default (high) quadrature degree.
    """
    if exact is None:
        raise ValueError("case has no exact solution")
    V = velocity.space
    mesh = V.mesh
    d = mesh.dim
    cells = np.arange(mesh.n_cells)
    tab = V.tabulate_cells(quadrature_for(d, quad_degree or HIGH_ORDER[d]))
    x = tab.points.reshape(-1, d)
    nb, nq = tab.weights.shape
    uv, ug, _ = velocity.evaluate(tab, cells)
    pv = pressure.evaluate(tab, cells)[0][..., 0]
    eu = exact.u(x).reshape(nb, nq, d) - uv
    eg = exact.grad_u(x).reshape(nb, nq, d, d) - ug
    ep = exact.p(x).reshape(nb, nq) - pv
    w = tab.weights
    return ErrorReport(
        h=mesh.h,
        err_p_L2=float(math.sqrt(np.sum(w * ep**2))),
        err_u_L2=float(math.sqrt(np.sum(w * np.einsum("kqa,kqa->kq", eu, eu)))),
        err_u_H1=float(math.sqrt(np.sum(w * np.einsum("kqab,kqab->kq", eg, eg)))),
        slip_violation=slip_violation(velocity, g) if mesh.facets_with(BoundaryTag.SLIP).size
        else None,
    )


def slip_violation(velocity: DiscreteField, g: Callable | None = None) -> float:
    """L2 norm of ``u_h . n - g`` over the slip boundary."""
    V = velocity.space
    mesh = V.mesh
    facets = mesh.facets_with(BoundaryTag.SLIP)
    if facets.size == 0:
        raise ValueError("mesh has no slip facets")
    d = mesh.dim
    ftab = V.tabulate_facets(facets, quadrature_for(d - 1, HIGH_ORDER[d]))
    uv = velocity.evaluate(ftab, mesh.facet_cells[facets])[0]
    un = np.einsum("kqa,ka->kq", uv, mesh.facet_normals[facets])
    if g is not None:
        un = un - np.asarray(g(ftab.points.reshape(-1, d))).reshape(un.shape)
    return float(math.sqrt(np.sum(ftab.weights * un**2)))


# -- convergence ---------------------------------------------------------------

def convergence_orders(hs: Sequence[float], errors: Sequence[float]) -> list:
    """Orders ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``; ``None`` where undefined."""
    out = [None]
    for i in range(1, len(hs)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 > 0 and e1 > 0 and hs[i - 1] != hs[i]:
            out.append(math.log(e0 / e1) / math.log(hs[i - 1] / hs[i]))
        else:
            out.append(None)
    return out


@dataclass
class ConvergenceStudy:
    reports: list
    configs: list
    solutions: list = field(default_factory=list, repr=False)
    failed: bool = False

    def to_csv(self) -> str:
        return convergence_csv(self.reports)


def _fill_orders(reports):
    hs = [r.h for r in reports]
    for key in ("err_p_L2", "err_u_L2", "err_u_H1"):
        for r, o in zip(reports, convergence_orders(hs, [getattr(r, key) for r in reports])):
            r.orders[key] = o


def convergence_study(case: CaseDefinition, config: ProblemConfig, levels: Sequence[int],
                      mesh_factory: Callable[[int], SimplicialMesh],
                      auto_beta: bool = False, keep_solutions: bool = False,
                      residual_tol: float = 1e-8, auto_gamma0: bool = False,
                      on_level: Callable | None = None) -> ConvergenceStudy:
    """One solve per mesh level; errors and orders between consecutive levels.

    ``auto_beta`` / ``auto_gamma0`` replace the corresponding parameter by the
    value of :func:`select_parameters` on each mesh.  ``on_level(n, mesh,
    solution, report)`` is called after every solve.
    """
    if len(levels) < 2:
        raise ValueError("a convergence study needs at least two levels")
    reports, configs, sols = [], [], []
    failed = False
    for n in levels:
        mesh = mesh_factory(n)
        spaces = make_spaces(mesh, config.degree)
        cfg = config
        if auto_beta or auto_gamma0:
            est = estimate_constants(mesh, spaces.pressure)
            beta, gamma0 = select_parameters(config.theta, est, config.gamma0)
            cfg = ProblemConfig(config.nu, config.theta,
                                gamma0 if auto_gamma0 else config.gamma0,
                                beta if auto_beta else config.beta, config.degree)
        try:
            sol = solve_stokes(mesh, cfg, case, spaces)
        except RuntimeError:
            failed = True
            break
        rep = error_norms(case.exact, sol.velocity, sol.pressure, case.g)
        rep.residual = sol.report.residual
        reports.append(rep)
        configs.append(cfg)
        if keep_solutions:
            sols.append(sol)
        if on_level is not None:
            on_level(n, mesh, sol, rep)
        if sol.report.residual > residual_tol:
            failed = True
    _fill_orders(reports)
    return ConvergenceStudy(reports, configs, sols, failed)


def _fmt(v):
    return "---" if v is None else f"{v:.6g}"


def convergence_csv(reports: Sequence[ErrorReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([_fmt(r.h), _fmt(r.err_p_L2), _fmt(r.orders.get("err_p_L2")),
                    _fmt(r.err_u_L2), _fmt(r.orders.get("err_u_L2")), _fmt(r.err_u_H1),
                    _fmt(r.orders.get("err_u_H1")), _fmt(r.slip_violation)])
    return buf.getvalue()


# -- constants and parameters ---------------------------------------------------

def _batched_max_gen_eig(A, B):
    """Largest eigenvalue of ``A x = lambda B x`` for stacks of SPD ``B``."""
    L = np.linalg.cholesky(B)
    Linv = np.linalg.inv(L)
    C = Linv @ A @ np.swapaxes(Linv, -1, -2)
    return np.linalg.eigvalsh(0.5 * (C + np.swapaxes(C, -1, -2)))[..., -1]


def _reference_face_mass(element: LagrangeElement, dim: int, degree: int):
    """Face mass matrices on faces of unit measure, one per face (in cell-local numbering)."""
    rule = quadrature_for(dim - 1, 2 * degree)
    out = []
    for j in range(dim + 1):
        phi = element.values(facet_bary_to_cell(rule.points, j, dim))
        out.append(math.factorial(dim - 1) * np.einsum("q,qi,qk->ik", rule.weights, phi, phi))
    return np.array(out)


def estimate_constants(mesh: SimplicialMesh, space: FunctionSpace) -> ConstantEstimates:
    """Inverse and discrete trace constants from local generalized eigenproblems.

    ``C_in`` compares one derivative level with the next on ``P_l(K)``: for
    degree 1 it is ``h_K sqrt(lambda_max(stiffness, mass))``; for degree 2 it
    bounds second derivatives by first derivatives (the pairing used by the
    residual stabilization), i.e. ``h_K sqrt(lambda_max(hessian energy,
    stiffness))`` on the complement of constants.  ``C_tr`` is
    ``h_K^{1/2} sqrt(lambda_max(face mass, cell mass))`` over all faces.
    """
    d = mesh.dim
    l = space.degree
    el = space.element
    coords = space.cell_coords
    rule = quadrature_for(d, 2 * l)
    tab = tabulate(el, coords, rule.points, rule.weights)
    w = tab.weights
    mass = np.einsum("kq,qi,qj->kij", w, tab.values, tab.values)
    stiff = np.einsum("kq,kqia,kqja->kij", w, tab.grads, tab.grads)
    vol = mesh.cell_volumes
    hK = mesh.cell_diameters
    if l == 1:
        lam = _batched_max_gen_eig(stiff, mass)
    else:
        hess = np.einsum("k,kiab,kjab->kij", vol, tab.hess, tab.hess)
        # project out constants (the common kernel) with an orthonormal basis of 1^perp
        n = el.n_local
        Z = np.linalg.qr(np.hstack([np.ones((n, 1)), np.eye(n)[:, : n - 1]]))[0][:, 1:]
        lam = _batched_max_gen_eig(Z.T @ hess @ Z, Z.T @ stiff @ Z)
    if (lam <= 0).any() or not np.isfinite(lam).all():
        raise ValueError("degenerate cell in constant estimation")
    cell_C_in = hK * np.sqrt(lam)

    # mass / |K| and the unit-measure face mass are affine invariants
    ref_mass = mass[:1] / vol[0]
    face_mass = _reference_face_mass(el, d, l)
    mu = np.array([_batched_max_gen_eig(face_mass[j][None], ref_mass)[0] for j in range(d + 1)])
    face_meas = _face_measures(coords)
    cell_C_tr = np.sqrt(hK[:, None] * face_meas / vol[:, None] * mu)
    return ConstantEstimates(float(cell_C_in.max()), float(cell_C_tr.max()), cell_C_in, cell_C_tr)


def _face_measures(coords):
    nc, k, d = coords.shape
    out = np.zeros((nc, k))
    for j in range(k):
        x = np.delete(coords, j, axis=1)
        if d == 2:
            out[:, j] = np.linalg.norm(x[:, 1] - x[:, 0], axis=1)
        else:
            out[:, j] = 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1)
    return out


def select_parameters(theta: int, estimates: ConstantEstimates,
                      gamma0: float = DEFAULT_GAMMA0) -> tuple[float, float]:
    """Stabilization and Nitsche parameters satisfying the coercivity bounds.

    ``theta = -1``: ``beta = 0.5 / C_in^2`` and any ``gamma0 > 0`` (the given
    one).  ``theta in {0, 1}``: ``beta = 0.5 / (C_tr^2 + C_in^2)`` and
    ``gamma0 = 2 C_tr^2 (1 + 2 C_in^2) / beta``.
    """
    c_in2 = estimates.C_in**2
    c_tr2 = estimates.C_tr**2
    if theta == -1:
        return BETA_SAFETY / c_in2, float(gamma0)
    if theta not in (0, 1):
        raise ValueError("theta must be -1, 0 or 1")
    beta = BETA_SAFETY / (c_tr2 + c_in2)
    return beta, GAMMA_SAFETY * c_tr2 * (1.0 + 2.0 * c_in2) / beta


def random_fields(spaces: Spaces, rng: np.random.Generator, pressure_scale: float = 1.0):
    """Uniform [-1, 1] coefficients; pressure scaled and shifted to zero mean."""
    V, Q = spaces
    u = rng.uniform(-1.0, 1.0, V.n_dofs)
    p = pressure_scale * rng.uniform(-1.0, 1.0, Q.n_dofs)
    mean = pressure_mean_functional(Q)
    p -= (mean @ p) / mean.sum()
    return DiscreteField(V, u), DiscreteField(Q, p)


def coercivity_probe(mesh: SimplicialMesh, spaces: Spaces, config: ProblemConfig,
                     n_samples: int = 200, seed: int = 0) -> float:
    """Smallest sampled ratio ``B_S(x, x) / |||x|||^2`` over random fields.

    Pressure samples carry the factor ``nu`` (the natural pressure scale of
    viscous flow) so the ratio is independent of the viscosity.
    """
    system = assemble(mesh, spaces, config, CaseDefinition("probe", mesh.dim), check=False)
    N = norm_matrix(mesh, spaces, config)
    rng = np.random.default_rng(seed)
    best = math.inf
    for _ in range(n_samples):
        u, p = random_fields(spaces, rng, pressure_scale=config.nu)
        x = system.pack(u, p)
        best = min(best, float(x @ (system.matrix @ x)) / float(x @ (N @ x)))
    return best
