"""Continuous Lagrange spaces of degree 1 and 2 on simplicial meshes.

Scalar dofs are numbered vertices first, then (for degree 2) edges in the
order of ``np.unique`` over sorted vertex pairs.  Vector spaces interleave
components per node: global dof ``n_components * node + c``.

Local node order on a cell is vertices ``0..d`` followed by edge midpoints
in ``itertools.combinations(range(d + 1), 2)`` order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import SimplicialMesh
from .quadrature import QuadratureRule

SUPPORTED_DEGREES = (1, 2)


class LagrangeElement:
    """Reference Lagrange element expressed in barycentric coordinates."""

    def __init__(self, dim: int, degree: int):
        if degree not in SUPPORTED_DEGREES:
            raise ValueError(f"unsupported degree {degree}")
        self.dim = dim
        self.degree = degree
        self.edges = list(itertools.combinations(range(dim + 1), 2))
        nodes = list(np.eye(dim + 1))
        if degree == 2:
            for i, j in self.edges:
                b = np.zeros(dim + 1)
                b[i] = b[j] = 0.5
                nodes.append(b)
        self.nodes = np.array(nodes)
        self.n_local = len(nodes)

    def values(self, bary):
        """(nq, n_local) basis values at barycentric points."""
        lam = np.atleast_2d(bary)
        if self.degree == 1:
            return lam.copy()
        vert = lam * (2.0 * lam - 1.0)
        edge = np.column_stack([4.0 * lam[:, i] * lam[:, j] for i, j in self.edges])
        return np.hstack([vert, edge])

    def bary_gradients(self, bary):
        """(nq, n_local, d+1) derivatives with respect to each barycentric coordinate."""
        lam = np.atleast_2d(bary)
        nq, k = lam.shape
        out = np.zeros((nq, self.n_local, k))
        if self.degree == 1:
            out[:, np.arange(k), np.arange(k)] = 1.0
            return out
        out[:, np.arange(k), np.arange(k)] = 4.0 * lam - 1.0
        for e, (i, j) in enumerate(self.edges):
            out[:, k + e, i] = 4.0 * lam[:, j]
            out[:, k + e, j] = 4.0 * lam[:, i]
        return out

    def bary_hessians(self):
        """(n_local, d+1, d+1) second barycentric derivatives (constant)."""
        k = self.dim + 1
        out = np.zeros((self.n_local, k, k))
        if self.degree == 2:
            out[np.arange(k), np.arange(k), np.arange(k)] = 4.0
            for e, (i, j) in enumerate(self.edges):
                out[k + e, i, j] = out[k + e, j, i] = 4.0
        return out

    def face_nodes(self, face: int) -> np.ndarray:
        """Local nodes lying on the face opposite vertex ``face``."""
        return np.flatnonzero(self.nodes[:, face] == 0.0)


def barycentric_gradients(coords):
    """Gradients of the barycentric coordinates and |det J| per cell.

    coords : (nc, d+1, d) vertex coordinates.
    Returns (nc, d+1, d) gradients and (nc,) absolute Jacobian determinants.
    """
    jac = np.swapaxes(coords[:, 1:, :] - coords[:, :1, :], 1, 2)  # columns x_a - x_0
    inv = np.linalg.inv(jac)  # rows are grad lambda_{a+1}
    g0 = -inv.sum(axis=1, keepdims=True)
    return np.concatenate([g0, inv], axis=1), np.abs(np.linalg.det(jac))


def facet_bary_to_cell(facet_bary, face, dim):
    """Embed barycentric points of a reference facet into the cell face ``face``."""
    facet_bary = np.atleast_2d(facet_bary)
    out = np.zeros((facet_bary.shape[0], dim + 1))
    out[:, [a for a in range(dim + 1) if a != face]] = facet_bary
    return out


@dataclass(frozen=True)
class Tabulation:
    """Basis data at quadrature points for a batch of cells (or facets).

    values : (nq, nloc) or (nb, nq, nloc)
    grads : (nb, nq, nloc, dim)
    hess : (nb, nloc, dim, dim)
    weights : (nb, nq) physical quadrature weights
    points : (nb, nq, dim) physical points
    """

    values: np.ndarray
    grads: np.ndarray
    hess: np.ndarray
    weights: np.ndarray
    points: np.ndarray


def tabulate(element: LagrangeElement, coords, bary, ref_weights, measure_scale=None):
    """Tabulate basis functions on cells with vertex ``coords`` at ``bary`` points.

    ``bary`` is (nq, d+1) shared by all cells or (nb, nq, d+1) per cell.
    Physical weights are ``ref_weights * measure_scale`` where the default
    ``measure_scale`` is the cell Jacobian determinant.
    """
    glam, det = barycentric_gradients(coords)
    bary = np.asarray(bary)
    if bary.ndim == 2:
        phi = element.values(bary)
        dphi = element.bary_gradients(bary)
        grads = np.einsum("qia,kab->kqib", dphi, glam)
        points = np.einsum("qa,kab->kqb", bary, coords)
    else:
        nb, nq, k = bary.shape
        phi = element.values(bary.reshape(-1, k)).reshape(nb, nq, -1)
        dphi = element.bary_gradients(bary.reshape(-1, k)).reshape(nb, nq, -1, k)
        grads = np.einsum("kqia,kab->kqib", dphi, glam)
        points = np.einsum("kqa,kab->kqb", bary, coords)
    hess = np.einsum("iab,kac,kbd->kicd", element.bary_hessians(), glam, glam)
    scale = det if measure_scale is None else measure_scale
    weights = np.asarray(ref_weights)[None, :] * np.asarray(scale)[:, None]
    return Tabulation(phi, grads, hess, weights, points)


class FunctionSpace:
    """Continuous Lagrange space on ``mesh`` with ``n_components`` components."""

    def __init__(self, mesh: SimplicialMesh, degree: int, n_components: int = 1):
        self.mesh = mesh
        self.degree = degree
        self.n_components = n_components
        self.element = LagrangeElement(mesh.dim, degree)
        cells = mesh.cells
        if degree == 1:
            self.cell_nodes = cells.copy()
            self.node_coords = mesh.vertices.copy()
            self.n_edges = 0
        else:
            pairs = np.stack([np.sort(cells[:, [i, j]], axis=1) for i, j in self.element.edges],
                             axis=1)
            edges, inv = np.unique(pairs.reshape(-1, 2), axis=0, return_inverse=True)
            inv = inv.reshape(cells.shape[0], -1)
            self.cell_nodes = np.hstack([cells, mesh.n_vertices + inv])
            self.node_coords = np.vstack([mesh.vertices, mesh.vertices[edges].mean(axis=1)])
            self.n_edges = edges.shape[0]
        self.cell_nodes.setflags(write=False)
        self.node_coords.setflags(write=False)
        self.facet_local_nodes = np.array(
            [self.element.face_nodes(j) for j in mesh.facet_local], dtype=np.int64
        ).reshape(mesh.n_facets, -1)

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.n_components

    @property
    def dof_coords(self) -> np.ndarray:
        return np.repeat(self.node_coords, self.n_components, axis=0)

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """(nc, nloc * n_components) interleaved dof map."""
        c = self.n_components
        return (c * self.cell_nodes[:, :, None] + np.arange(c)).reshape(self.mesh.n_cells, -1)

    @cached_property
    def cell_coords(self) -> np.ndarray:
        return self.mesh.vertices[self.mesh.cells]

    def tabulate_cells(self, rule: QuadratureRule, cells=None) -> Tabulation:
        coords = self.cell_coords if cells is None else self.cell_coords[cells]
        return tabulate(self.element, coords, rule.points, rule.weights)

    def tabulate_facets(self, facets, rule: QuadratureRule) -> Tabulation:
        """Owning-cell basis at facet quadrature points; ``rule`` is a (d-1)-simplex rule."""
        mesh = self.mesh
        facets = np.asarray(facets, dtype=np.int64)
        dim = mesh.dim
        bary = np.stack([facet_bary_to_cell(rule.points, j, dim) for j in range(dim + 1)])
        bary = bary[mesh.facet_local[facets]]
        scale = mesh.facet_measures[facets] * math.factorial(dim - 1)
        return tabulate(self.element, self.cell_coords[mesh.facet_cells[facets]],
                        bary, rule.weights, scale)

    def facet_cell_dofs(self, facets) -> np.ndarray:
        return self.cell_dofs[self.mesh.facet_cells[np.asarray(facets, dtype=np.int64)]]


class DiscreteField:
    """Coefficient vector on a :class:`FunctionSpace`."""

    def __init__(self, space: FunctionSpace, coefficients=None):
        self.space = space
        if coefficients is None:
            coefficients = np.zeros(space.n_dofs)
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (space.n_dofs,):
            raise ValueError(f"expected {space.n_dofs} coefficients, got {coefficients.shape}")
        self.coefficients = coefficients

    def local(self, cells):
        """(n, nloc, n_components) coefficients on the given cells."""
        sp = self.space
        return self.coefficients[sp.cell_dofs[cells]].reshape(len(cells), -1, sp.n_components)

    def evaluate(self, tab: Tabulation, cells):
        """Values (n, nq, c), gradients (n, nq, c, dim), hessians (n, c, dim, dim)."""
        loc = self.local(np.asarray(cells))
        if tab.values.ndim == 2:
            vals = np.einsum("qi,kic->kqc", tab.values, loc)
        else:
            vals = np.einsum("kqi,kic->kqc", tab.values, loc)
        grads = np.einsum("kqib,kic->kqcb", tab.grads, loc)
        hess = np.einsum("kiab,kic->kcab", tab.hess, loc)
        return vals, grads, hess


def eval_basis(space: FunctionSpace, cell: int, point):
    """Values, gradients and hessians of the local scalar basis of ``cell``.

    ``point`` is given in reference Cartesian coordinates.
    """
    point = np.asarray(point, dtype=float)
    bary = np.concatenate([[1.0 - point.sum()], point])[None, :]
    if (bary < -1e-12).any():
        raise ValueError("point outside the reference simplex")
    tab = tabulate(space.element, space.cell_coords[[cell]], bary, np.ones(1))
    return tab.values[0], tab.grads[0, 0], tab.hess[0]


def interpolate(space: FunctionSpace, u) -> DiscreteField:
    """Nodal interpolant of ``u(x) -> (n, c)`` (or ``(n,)`` for scalars)."""
    vals = np.asarray(u(space.node_coords), dtype=float).reshape(space.n_nodes, -1)
    if vals.shape[1] != space.n_components:
        raise ValueError("callable returns the wrong number of components")
    return DiscreteField(space, vals.reshape(-1))
