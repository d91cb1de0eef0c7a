"""Built-in benchmark and verification cases.

Manufactured cases are built from closed-form ``(u, p)``: the source
``f = -div sigma(u, p)``, Dirichlet traces, slip data ``g = u.n`` and
tangential tractions ``s_i = sigma(u, p) n . t_i`` all follow from the exact
solution (derived with sympy, then vectorised).
"""
from __future__ import annotations

import enum
from functools import partial
from typing import Sequence

import numpy as np
import sympy

from .assembly import CaseDefinition, ExactSolution
from .mesh import BoundaryTag, SimplicialMesh, box_tagger, generate_structured_cube, \
    generate_structured_square


class BuiltinCase(str, enum.Enum):
    CAVITY2D = "cavity2d"
    PATCH_CONSTANT_FLOW = "patch-constant"
    PATCH_AFFINE_3D = "patch-affine3d"
    MANUFACTURED_PRESSURE_2D = "manufactured-pressure2d"
    NACA2D = "naca2d"
    CYLINDER3D = "cylinder3d"


def _vectorize(symbols, expr):
    """numpy callable ``x (n, d) -> (n, *expr.shape)`` for a sympy expression or Matrix."""
    if isinstance(expr, sympy.MatrixBase):
        shape = expr.shape if expr.shape[1] != 1 else (expr.shape[0],)
        entries = [sympy.lambdify(symbols, e, "numpy") for e in expr]
    else:
        shape = ()
        entries = [sympy.lambdify(symbols, expr, "numpy")]

    def call(x):
        x = np.asarray(x, dtype=float)
        cols = [x[:, a] for a in range(x.shape[1])]
        vals = [np.broadcast_to(np.asarray(fn(*cols), dtype=float), (x.shape[0],)) for fn in entries]
        return np.stack(vals, axis=-1).reshape(x.shape[0], *shape)

    return call


def _traction_component(sigma_fn, x, normals, tangent):
    sig = sigma_fn(x)
    return np.einsum("nab,nb,na->n", sig, normals, tangent)


def _normal_velocity(u_fn, normal, x):
    return u_fn(x) @ np.asarray(normal, dtype=float)


def manufactured_case(name: str, u_exprs: Sequence, p_expr, nu: float = 1.0,
                      slip_normal=None) -> CaseDefinition:
    """Case data for an exact solution given as sympy expressions in x, y (, z).

    ``slip_normal`` is the (constant) outward normal of the slip face; it
    defines ``g = u . n``.  Without it ``g`` is left as ``None``.
    """
    dim = len(u_exprs)
    X = sympy.symbols("x y z")[:dim]
    u = sympy.Matrix(u_exprs)
    grad_u = u.jacobian(X)
    eps = (grad_u + grad_u.T) / 2
    sigma = 2 * nu * eps - p_expr * sympy.eye(dim)
    f = -sympy.Matrix([sum(sympy.diff(sigma[a, b], X[b]) for b in range(dim))
                       for a in range(dim)])
    f = sympy.simplify(f)
    grad_p = sympy.Matrix([sympy.diff(p_expr, s) for s in X])

    u_fn = _vectorize(X, u)
    sigma_fn = _vectorize(X, sigma)
    exact = ExactSolution(u=u_fn, grad_u=_vectorize(X, grad_u), p=_vectorize(X, p_expr),
                          grad_p=_vectorize(X, grad_p), sigma=sigma_fn)
    s = tuple(partial(_traction_component, sigma_fn) for _ in range(dim - 1))
    g = partial(_normal_velocity, u_fn, slip_normal) if slip_normal is not None else None
    return CaseDefinition(name=name, dim=dim, f=_vectorize(X, f), h_dirichlet=u_fn, g=g, s=s,
                          exact=exact, nu=nu)


def _symbols(dim):
    return sympy.symbols("x y z")[:dim]


def case_cavity2d(nu: float = 1.0) -> CaseDefinition:
    """Cavity on (-1, 1)^2: slip on y = -1, Dirichlet elsewhere, p = 0."""
    x, y = _symbols(2)
    return manufactured_case("cavity2d", [2 * y * (1 - x**2), -2 * x * (1 - y**2)],
                             sympy.Integer(0), nu=nu, slip_normal=(0.0, -1.0))


def case_manufactured_pressure2d(nu: float = 1.0) -> CaseDefinition:
    """Divergence-free u = curl psi with psi = (1-x^2)^2 (1-y^2)^2, p = sin(pi x) cos(pi y)."""
    x, y = _symbols(2)
    psi = (1 - x**2) ** 2 * (1 - y**2) ** 2
    u = [sympy.diff(psi, y), -sympy.diff(psi, x)]
    p = sympy.sin(sympy.pi * x) * sympy.cos(sympy.pi * y)
    return manufactured_case("manufactured-pressure2d", u, p, nu=nu, slip_normal=(0.0, -1.0))


def case_patch_constant_flow(d: int = 2, a: float = 1.0, nu: float = 1.0) -> CaseDefinition:
    """Uniform flow ``(a, 0, ...)`` tangential to the slip face ``x_d = 0``."""
    u = [sympy.Float(a)] + [sympy.Integer(0)] * (d - 1)
    normal = [0.0] * d
    normal[-1] = -1.0
    return manufactured_case(f"patch-constant{d}d", u, sympy.Integer(0), nu=nu,
                             slip_normal=tuple(normal))


def case_patch_affine3d(nu: float = 1.0) -> CaseDefinition:
    """Divergence-free affine flow ``u = (z, x, y)`` with nonzero slip data on z = 0."""
    x, y, z = _symbols(3)
    return manufactured_case("patch-affine3d", [z + 1, x, y], sympy.Integer(0), nu=nu,
                             slip_normal=(0.0, 0.0, -1.0))


# -- meshes for the built-in cases ------------------------------------------

def cavity_mesh(n: int) -> SimplicialMesh:
    return generate_structured_square(n, (-1.0, -1.0, 1.0, 1.0),
                                      box_tagger({(1, -1.0): BoundaryTag.SLIP}))


def patch_mesh(d: int, n: int) -> SimplicialMesh:
    """Unit square/cube with slip on the face ``x_d = 0``."""
    tagger = box_tagger({(d - 1, 0.0): BoundaryTag.SLIP})
    if d == 2:
        return generate_structured_square(n, (0.0, 0.0, 1.0, 1.0), tagger)
    return generate_structured_cube(n, (0, 0, 0, 1, 1, 1), tagger)


# -- demo cases on user meshes ----------------------------------------------

NACA_FAR_FIELD = (51.4814, 0.0)
CYLINDER_H = 0.41
CYLINDER_UM = 0.45
CYLINDER_NU = 1e-3


def case_naca2d(mesh: SimplicialMesh | None = None, nu: float = 1.0) -> CaseDefinition:
    """Far-field velocity on the (Dirichlet) box, free slip on the (slip) wing."""
    far = np.asarray(NACA_FAR_FIELD)
    return CaseDefinition(name="naca2d", dim=2,
                          h_dirichlet=lambda x: np.broadcast_to(far, x.shape).copy(), nu=nu)


def cylinder_inflow(x, H: float = CYLINDER_H, Um: float = CYLINDER_UM):
    y, z = x[:, 1], x[:, 2]
    out = np.zeros_like(x)
    out[:, 0] = 16.0 * Um * y * z * (H - y) * (H - z) / H**4
    return out


CYLINDER_LENGTH = 2.5


def cylinder_channel_mesh(n: int = 4, length: float = CYLINDER_LENGTH,
                          center=(0.5, 0.2), half_width: float | None = None) -> SimplicialMesh:
    """Coarse channel ``(0, L) x (0, H)^2`` around a square prism, for smoke runs.

    The obstacle spans the full height and is carved out of the Kuhn grid
    (``n`` boxes across the channel), so its faces follow grid planes; they
    are tagged slip.  Inflow x = 0 and the lateral walls are Dirichlet,
    the outflow x = L is do-nothing.
    """
    H = CYLINDER_H
    h = H / n
    nx = max(1, round(length / h))
    hw = h if half_width is None else half_width

    def keep(c):
        return ~((np.abs(c[:, 0] - center[0]) < hw) & (np.abs(c[:, 1] - center[1]) < hw))

    tol = 1e-9

    def tagger(c, normal):
        if abs(c[0]) < tol or min(abs(c[1]), abs(c[1] - H), abs(c[2]), abs(c[2] - H)) < tol:
            return BoundaryTag.DIRICHLET
        if abs(c[0] - length) < tol:
            return BoundaryTag.DONOTHING
        return BoundaryTag.SLIP

    return generate_structured_cube((nx, n, n), (0.0, 0.0, 0.0, length, H, H), tagger, keep)


def case_cylinder3d(mesh: SimplicialMesh | None = None) -> CaseDefinition:
    """Channel with slip cylinder: inflow profile on Dirichlet facets, which vanishes on walls.

    The profile is zero wherever ``y`` or ``z`` is 0 or H, so a single Dirichlet
    function covers both the inflow plane and the no-slip lateral walls;
    the outflow plane should be tagged ``donothing``.
    """
    return CaseDefinition(name="cylinder3d", dim=3, h_dirichlet=cylinder_inflow, nu=CYLINDER_NU)


def get_case(name: str, dim: int = 2, nu: float | None = None) -> CaseDefinition:
    name = BuiltinCase(name)
    kw = {} if nu is None else {"nu": nu}
    if name is BuiltinCase.CAVITY2D:
        return case_cavity2d(**kw)
    if name is BuiltinCase.MANUFACTURED_PRESSURE_2D:
        return case_manufactured_pressure2d(**kw)
    if name is BuiltinCase.PATCH_CONSTANT_FLOW:
        return case_patch_constant_flow(dim, **kw)
    if name is BuiltinCase.PATCH_AFFINE_3D:
        return case_patch_affine3d(**kw)
    if name is BuiltinCase.NACA2D:
        return case_naca2d(**kw)
    return case_cylinder3d()
