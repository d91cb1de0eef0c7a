"""Assembly of the stabilized Nitsche system for Stokes flow with slip walls.

The discrete problem couples equal-order velocity/pressure Lagrange spaces.
Dirichlet walls and slip walls (``u.n = g``) are both imposed weakly; the
``theta`` parameter selects the symmetric (1), incomplete (0) or
skew-symmetric (-1) Nitsche variant.  Pressure stability comes from the
residual term ``(beta/nu) sum_K h_K^2 (-2 nu div eps(u) + grad p, grad q)_K``.

Global unknown layout: velocity dofs (components interleaved per node),
then pressure dofs, then one multiplier enforcing ``int p = 0``.  Local
element matrices use the same ordering: ``d * nloc`` velocity entries
followed by ``nloc`` pressure entries.  Matrices are indexed
``[test, trial]``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .femspace import DiscreteField, FunctionSpace, Tabulation
from .mesh import BoundaryTag, SimplicialMesh
from .quadrature import quadrature_for

HIGH_ORDER = {2: 8, 3: 6}

VectorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemConfig:
    nu: float = 1.0
    theta: int = -1
    gamma0: float = 10.0
    beta: float = 0.1
    degree: int = 1

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.theta not in (-1, 0, 1):
            raise ValueError("theta must be -1, 0 or 1")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")

    @classmethod
    def unchecked(cls, **kwargs) -> "ProblemConfig":
        """Build without validation (e.g. ``beta=0`` for instability diagnostics)."""
        obj = object.__new__(cls)
        for f in dataclasses.fields(cls):
            object.__setattr__(obj, f.name, kwargs.get(f.name, f.default))
        return obj


@dataclass(frozen=True)
class ExactSolution:
    u: VectorFn
    grad_u: VectorFn  # (n, d, d), grad_u[:, a, b] = d u_a / d x_b
    p: VectorFn
    grad_p: VectorFn | None = None
    sigma: VectorFn | None = None  # (n, d, d) Cauchy stress


@dataclass(frozen=True)
class CaseDefinition:
    """Data of one Stokes problem.

    ``f``, ``h_dirichlet`` map points ``(n, d)`` to ``(n, d)``; ``g`` maps to
    ``(n,)``.  Each entry of ``s`` is called as ``s_i(x, normals, tangents_i)``
    with per-point ``(n, d)`` frames and returns ``(n,)``.  ``None`` means zero.
    """

    name: str
    dim: int
    f: VectorFn | None = None
    h_dirichlet: VectorFn | None = None
    g: VectorFn | None = None
    s: Sequence[Callable] | None = None
    exact: ExactSolution | None = None
    nu: float | None = None


class Spaces(NamedTuple):
    velocity: FunctionSpace
    pressure: FunctionSpace


def make_spaces(mesh: SimplicialMesh, degree: int) -> Spaces:
    return Spaces(FunctionSpace(mesh, degree, mesh.dim), FunctionSpace(mesh, degree, 1))


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_velocity: int
    n_pressure: int
    spaces: Spaces

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def velocity_slice(self) -> slice:
        return slice(0, self.n_velocity)

    @property
    def pressure_slice(self) -> slice:
        return slice(self.n_velocity, self.n_velocity + self.n_pressure)

    def split(self, x):
        """Velocity and pressure fields of a solution vector."""
        x = np.asarray(x)
        return (DiscreteField(self.spaces.velocity, x[self.velocity_slice]),
                DiscreteField(self.spaces.pressure, x[self.pressure_slice]))

    def pack(self, u: DiscreteField, p: DiscreteField, multiplier: float = 0.0):
        return np.concatenate([u.coefficients, p.coefficients, [multiplier]])


def apply_operator(system: AssembledSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (system.size,):
        raise ValueError(f"expected vector of length {system.size}, got {x.shape}")
    return system.matrix @ x


# -- local kernels -----------------------------------------------------------

class VectorBasis(NamedTuple):
    val: np.ndarray     # (nb, nq, nv, d)
    grad: np.ndarray    # (nb, nq, nv, d, d)
    eps: np.ndarray     # (nb, nq, nv, d, d)
    div: np.ndarray     # (nb, nq, nv)
    div_eps: np.ndarray  # (nb, nv, d)
    phi: np.ndarray     # (nb, nq, nloc) scalar basis
    gphi: np.ndarray    # (nb, nq, nloc, d)


def vector_basis(tab: Tabulation) -> VectorBasis:
    nb, nq, nl, d = tab.grads.shape
    phi = np.broadcast_to(tab.values, (nb, nq, nl))
    eye = np.eye(d)
    val = np.einsum("kqi,ca->kqica", phi, eye).reshape(nb, nq, nl * d, d)
    grad = np.einsum("ca,kqib->kqicab", eye, tab.grads).reshape(nb, nq, nl * d, d, d)
    eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    div = tab.grads.reshape(nb, nq, nl * d)
    lap = np.trace(tab.hess, axis1=-2, axis2=-1)
    div_eps = 0.5 * (np.einsum("ki,ca->kica", lap, eye) + tab.hess)
    return VectorBasis(val, grad, eps, div, div_eps.reshape(nb, nl * d, d), phi, tab.grads)


def cell_blocks(tab: Tabulation, h_cell, config: ProblemConfig) -> np.ndarray:
    """Local matrices (nb, ntot, ntot) of the volume and stabilization terms."""
    vb = vector_basis(tab)
    w = tab.weights
    nu, beta = config.nu, config.beta
    tau = beta / nu * np.asarray(h_cell) ** 2
    A = 2.0 * nu * np.einsum("kq,kqmab,kqnab->kmn", w, vb.eps, vb.eps)
    B = -np.einsum("kq,kqm,kqj->kmj", w, vb.div, vb.phi)
    resid = -2.0 * nu * vb.div_eps
    C = np.einsum("kq,kqn,kqi->kin", w, vb.div, vb.phi)
    C += tau[:, None, None] * np.einsum("kq,kna,kqia->kin", w, resid, vb.gphi)
    S = tau[:, None, None] * np.einsum("kq,kqja,kqia->kij", w, vb.gphi, vb.gphi)
    return np.block([[A, B], [C, S]])


def facet_blocks(tab: Tabulation, normals, h_facet, tag: BoundaryTag,
                 config: ProblemConfig) -> np.ndarray:
    """Local matrices (nb, ntot, ntot) of the Nitsche terms on boundary facets."""
    nb = tab.grads.shape[0]
    ntot = tab.grads.shape[2] * (tab.grads.shape[3] + 1)
    if tag == BoundaryTag.DONOTHING:
        return np.zeros((nb, ntot, ntot))
    vb = vector_basis(tab)
    w = tab.weights
    nu, theta, gamma0 = config.nu, config.theta, config.gamma0
    pen = nu * gamma0 / np.asarray(h_facet)
    vn = np.einsum("kqma,ka->kqm", vb.val, normals)
    epsn = np.einsum("kqmab,kb->kqma", vb.eps, normals)
    if tag == BoundaryTag.DIRICHLET:
        cons = np.einsum("kq,kqsa,kqra->krs", w, epsn, vb.val)
        mass = np.einsum("kq,kqsa,kqra->krs", w, vb.val, vb.val)
    elif tag == BoundaryTag.SLIP:
        enn = np.einsum("kqma,ka->kqm", epsn, normals)
        cons = np.einsum("kq,kqs,kqr->krs", w, enn, vn)
        mass = np.einsum("kq,kqs,kqr->krs", w, vn, vn)
    else:
        raise ValueError(f"unknown boundary tag {tag}")
    A = -2.0 * nu * cons - 2.0 * theta * nu * np.swapaxes(cons, 1, 2) + pen[:, None, None] * mass
    B = np.einsum("kq,kqj,kqr->krj", w, vb.phi, vn)
    C = theta * np.swapaxes(B, 1, 2)
    S = np.zeros((nb, B.shape[2], B.shape[2]))
    return np.block([[A, B], [C, S]])


def _zero_vec(x):
    return np.zeros_like(x)


def cell_rhs(tab: Tabulation, h_cell, config: ProblemConfig, f) -> np.ndarray:
    vb = vector_basis(tab)
    w = tab.weights
    nb, nq, _ = vb.phi.shape
    fx = np.asarray(f(tab.points.reshape(-1, tab.points.shape[-1]))).reshape(nb, nq, -1)
    tau = config.beta / config.nu * np.asarray(h_cell) ** 2
    Fv = np.einsum("kq,kqa,kqra->kr", w, fx, vb.val)
    Fq = tau[:, None] * np.einsum("kq,kqa,kqia->ki", w, fx, vb.gphi)
    return np.hstack([Fv, Fq])


def facet_rhs(tab: Tabulation, normals, tangents, h_facet, tag: BoundaryTag,
              config: ProblemConfig, case: CaseDefinition) -> np.ndarray:
    vb = vector_basis(tab)
    w = tab.weights
    nb, nq, nl = vb.phi.shape
    d = normals.shape[1]
    nu, theta, gamma0 = config.nu, config.theta, config.gamma0
    pen = nu * gamma0 / np.asarray(h_facet)
    x = tab.points.reshape(-1, d)
    epsn = np.einsum("kqmab,kb->kqma", vb.eps, normals)
    vn = np.einsum("kqma,ka->kqm", vb.val, normals)
    if tag == BoundaryTag.DIRICHLET:
        if case.h_dirichlet is None:
            return np.zeros((nb, nl * (d + 1)))
        hx = np.asarray(case.h_dirichlet(x)).reshape(nb, nq, d)
        Fv = (-2.0 * nu * theta * np.einsum("kq,kqa,kqra->kr", w, hx, epsn)
              + pen[:, None] * np.einsum("kq,kqa,kqra->kr", w, hx, vb.val))
        hn = np.einsum("kqa,ka->kq", hx, normals)
        Fq = theta * np.einsum("kq,kq,kqi->ki", w, hn, vb.phi)
        return np.hstack([Fv, Fq])
    if tag == BoundaryTag.SLIP:
        Fv = np.zeros((nb, nl * d))
        Fq = np.zeros((nb, nl))
        if case.g is not None:
            gx = np.asarray(case.g(x)).reshape(nb, nq)
            enn = np.einsum("kqma,ka->kqm", epsn, normals)
            Fv += (-2.0 * nu * theta * np.einsum("kq,kq,kqr->kr", w, gx, enn)
                   + pen[:, None] * np.einsum("kq,kq,kqr->kr", w, gx, vn))
            Fq += theta * np.einsum("kq,kq,kqi->ki", w, gx, vb.phi)
        if case.s is not None:
            nx = np.repeat(normals, nq, axis=0)
            for i, s_i in enumerate(case.s):
                ti = tangents[:, i, :]
                sx = np.asarray(s_i(x, nx, np.repeat(ti, nq, axis=0))).reshape(nb, nq)
                vt = np.einsum("kqma,ka->kqm", vb.val, ti)
                Fv += np.einsum("kq,kq,kqr->kr", w, sx, vt)
        return np.hstack([Fv, Fq])
    return np.zeros((nb, nl * (d + 1)))


# -- global assembly -----------------------------------------------------------

def local_to_global(spaces: Spaces, cells) -> np.ndarray:
    V, Q = spaces
    cells = np.asarray(cells, dtype=np.int64)
    return np.hstack([V.cell_dofs[cells], V.n_dofs + Q.cell_dofs[cells]])


def _check(mesh: SimplicialMesh, spaces: Spaces, config: ProblemConfig):
    V, Q = spaces
    if V.mesh is not mesh or Q.mesh is not mesh:
        raise ValueError("spaces were built on a different mesh")
    if V.degree != config.degree or Q.degree != config.degree:
        raise ValueError("space degree does not match config.degree")
    valid = {int(t) for t in BoundaryTag}
    if not set(np.unique(mesh.facet_tags).tolist()) <= valid:
        raise ValueError("boundary facet without a valid tag")


def assemble(mesh: SimplicialMesh, spaces: Spaces, config: ProblemConfig,
             case: CaseDefinition, check: bool = True) -> AssembledSystem:
    """Matrix of the stabilized Nitsche form and the matching right-hand side."""
    if check:
        ProblemConfig(**dataclasses.asdict(config))
    _check(mesh, spaces, config)
    V, Q = spaces
    d = mesh.dim
    l = config.degree
    n_u, n_p = V.n_dofs, Q.n_dofs
    size = n_u + n_p + 1
    ntot = (d + 1) * Q.element.n_local

    rows, cols, vals = [], [], []
    rhs = np.zeros(size)

    def scatter(dofs, blocks):
        rows.append(np.repeat(dofs, ntot, axis=1).ravel())
        cols.append(np.tile(dofs, (1, ntot)).ravel())
        vals.append(blocks.ravel())

    cells = np.arange(mesh.n_cells)
    dofs = local_to_global(spaces, cells)
    rule = quadrature_for(d, 2 * l)
    tab = Q.tabulate_cells(rule)
    scatter(dofs, cell_blocks(tab, mesh.cell_diameters, config))
    f = case.f or _zero_vec
    tab_hi = Q.tabulate_cells(quadrature_for(d, HIGH_ORDER[d]))
    np.add.at(rhs, dofs, cell_rhs(tab_hi, mesh.cell_diameters, config, f))

    frule = quadrature_for(d - 1, 2 * l)
    frule_hi = quadrature_for(d - 1, HIGH_ORDER[d])
    for tag in (BoundaryTag.DIRICHLET, BoundaryTag.SLIP):
        facets = mesh.facets_with(tag)
        if facets.size == 0:
            continue
        fdofs = local_to_global(spaces, mesh.facet_cells[facets])
        normals = mesh.facet_normals[facets]
        hE = mesh.facet_diameters[facets]
        ftab = Q.tabulate_facets(facets, frule)
        scatter(fdofs, facet_blocks(ftab, normals, hE, tag, config))
        ftab_hi = Q.tabulate_facets(facets, frule_hi)
        np.add.at(rhs, fdofs, facet_rhs(ftab_hi, normals, mesh.facet_tangents[facets], hE,
                                        tag, config, case))

    mean = pressure_mean_functional(Q)
    pdofs = n_u + np.arange(n_p)
    last = np.full(n_p, size - 1)
    rows += [pdofs, last]
    cols += [last, pdofs]
    vals += [mean, mean]

    matrix = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(size, size)).tocsr()
    matrix.sort_indices()
    return AssembledSystem(matrix, rhs, n_u, n_p, spaces)


def pressure_mean_functional(Q: FunctionSpace) -> np.ndarray:
    """Vector ``m`` with ``m . p = int_Omega p_h``."""
    tab = Q.tabulate_cells(quadrature_for(Q.mesh.dim, Q.degree))
    local = np.einsum("kq,qi->ki", tab.weights, tab.values)
    out = np.zeros(Q.n_dofs)
    np.add.at(out, Q.cell_dofs, local)
    return out


# -- matrix-free bilinear form -------------------------------------------------

def _fields_check(spaces: Spaces, *fields):
    V, Q = spaces
    for k, fld in enumerate(fields):
        target = V if k % 2 == 0 else Q
        if fld.space is not target:
            raise ValueError("field does not live on the given spaces")


def bilinear_value(mesh: SimplicialMesh, spaces: Spaces, config: ProblemConfig,
                   trial, test) -> float:
    """Evaluate the stabilized form on ``trial = (u, p)``, ``test = (v, q)`` by quadrature."""
    u, p = trial
    v, q = test
    _fields_check(spaces, u, p, v, q)
    d = mesh.dim
    l = config.degree
    nu, theta, gamma0, beta = config.nu, config.theta, config.gamma0, config.beta
    Q = spaces.pressure
    cells = np.arange(mesh.n_cells)
    tab = Q.tabulate_cells(quadrature_for(d, 2 * l))
    w = tab.weights
    uv, ug, uh = u.evaluate(tab, cells)
    vv, vg, vh = v.evaluate(tab, cells)
    pv, pg, _ = p.evaluate(tab, cells)
    qv, qg, _ = q.evaluate(tab, cells)
    eu = 0.5 * (ug + np.swapaxes(ug, -1, -2))
    ev = 0.5 * (vg + np.swapaxes(vg, -1, -2))
    divu = np.trace(ug, axis1=-2, axis2=-1)
    divv = np.trace(vg, axis1=-2, axis2=-1)
    # (div eps(u))_a = 0.5 * (lap u_a + d_a div u)
    div_eps_u = 0.5 * (np.trace(uh, axis1=-2, axis2=-1) + np.einsum("kbab->ka", uh))
    tau = beta / nu * mesh.cell_diameters ** 2
    resid = -2.0 * nu * div_eps_u[:, None, :] + pg[:, :, 0, :]
    total = np.sum(w * (2.0 * nu * np.einsum("kqab,kqab->kq", eu, ev)
                        - divv * pv[..., 0] + divu * qv[..., 0]))
    total += np.sum(tau[:, None] * w * np.einsum("kqa,kqa->kq", resid, qg[:, :, 0, :]))

    frule = quadrature_for(d - 1, 2 * l)
    for tag in (BoundaryTag.DIRICHLET, BoundaryTag.SLIP):
        facets = mesh.facets_with(tag)
        if facets.size == 0:
            continue
        owner = mesh.facet_cells[facets]
        ftab = Q.tabulate_facets(facets, frule)
        w = ftab.weights
        n = mesh.facet_normals[facets][:, None, :]
        pen = (nu * gamma0 / mesh.facet_diameters[facets])[:, None]
        uv, ug, _ = u.evaluate(ftab, owner)
        vv, vg, _ = v.evaluate(ftab, owner)
        pv = p.evaluate(ftab, owner)[0][..., 0]
        qv = q.evaluate(ftab, owner)[0][..., 0]
        eun = np.einsum("kqab,kqb->kqa", 0.5 * (ug + np.swapaxes(ug, -1, -2)), n)
        evn = np.einsum("kqab,kqb->kqa", 0.5 * (vg + np.swapaxes(vg, -1, -2)), n)
        un = np.einsum("kqa,kqa->kq", uv, n)
        vn = np.einsum("kqa,kqa->kq", vv, n)
        if tag == BoundaryTag.DIRICHLET:
            cons_u = np.einsum("kqa,kqa->kq", eun, vv)
            cons_v = np.einsum("kqa,kqa->kq", evn, uv)
            mass = np.einsum("kqa,kqa->kq", uv, vv)
        else:
            cons_u = np.einsum("kqa,kqa->kq", eun, n) * vn
            cons_v = np.einsum("kqa,kqa->kq", evn, n) * un
            mass = un * vn
        total += np.sum(w * (-2.0 * nu * cons_u - 2.0 * theta * nu * cons_v + pen * mass
                             + pv * vn + theta * qv * un))
    return float(total)
