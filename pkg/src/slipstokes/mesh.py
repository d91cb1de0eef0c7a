"""Simplicial meshes (triangles and tetrahedra) with tagged boundary facets.

A :class:`SimplicialMesh` is immutable once built.  On construction it
reorients cells to positive signed volume, matches every boundary facet to
its owning cell and precomputes the geometric quantities used by the
assembly: cell diameters ``h_K`` (longest edge), facet diameters ``h_E``,
outward unit normals and orthonormal tangents.

Tangent convention
------------------
In 2D the tangent is the outward normal rotated by +90 degrees,
``t = (-n_y, n_x)``; on the bottom side of a box (``n = (0, -1)``) this
gives ``t = (1, 0)``.  In 3D ``t_1 = normalize(n x e_a)`` where ``e_a`` is
the coordinate axis minimising ``|n . e_a|`` (ties go to the smallest axis
index) and ``t_2 = n x t_1``.  Tangential tractions supplied by users are
interpreted in this frame.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class BoundaryTag(enum.IntEnum):
    DIRICHLET = 0
    SLIP = 1
    DONOTHING = 2

    @classmethod
    def parse(cls, name: str) -> "BoundaryTag":
        try:
            return _TAG_NAMES[name.strip().lower()]
        except KeyError:
            raise MeshFormatError(f"unknown boundary tag {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


_TAG_NAMES = {t.name.lower(): t for t in BoundaryTag}


class MeshError(ValueError):
    """Base class for invalid mesh input."""


class MeshFormatError(MeshError):
    pass


class MeshIndexError(MeshError):
    pass


class OpenBoundaryError(MeshError):
    """Boundary facets do not match the topological boundary of the cells."""


class DegenerateCellError(MeshError):
    pass


@dataclass(frozen=True)
class FacetFrame:
    normal: np.ndarray
    tangents: np.ndarray  # (dim - 1, dim)


Tagger = Callable[[np.ndarray, np.ndarray], BoundaryTag]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _simplex_volumes(vertices, cells):
    x = vertices[cells]
    jac = x[:, 1:, :] - x[:, :1, :]
    dim = vertices.shape[1]
    return np.linalg.det(jac) / math.factorial(dim)


def _longest_edge(x):
    # x: (..., k, dim) simplex vertex coordinates
    k = x.shape[-2]
    best = np.zeros(x.shape[:-2])
    for i, j in itertools.combinations(range(k), 2):
        best = np.maximum(best, np.linalg.norm(x[..., i, :] - x[..., j, :], axis=-1))
    return best


def _tangents(n):
    dim = n.shape[0]
    if dim == 2:
        return np.array([[-n[1], n[0]]])
    a = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[a] = 1.0
    t1 = np.cross(n, e)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.array([t1, t2])


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    """Conforming simplicial mesh with tagged boundary facets.

    Parameters
    ----------
    vertices : (nv, dim) array
    cells : (nc, dim + 1) int array
    facets : (nf, dim) int array
        Vertex indices of the boundary facets.
    facet_tags : (nf,) sequence of BoundaryTag
    reorient : bool
        Swap two vertices of negatively oriented cells instead of raising.
    """

    vertices: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray
    reorient: bool = field(default=True, repr=False)

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise MeshFormatError("vertices must be an (n, 2) or (n, 3) array")
        dim = vertices.shape[1]
        cells = np.array(self.cells, dtype=np.int64).reshape(-1, dim + 1)
        facets = np.array(self.facets, dtype=np.int64).reshape(-1, dim)
        tags = np.array([BoundaryTag(t) for t in self.facet_tags], dtype=np.int64)
        if tags.shape[0] != facets.shape[0]:
            raise MeshFormatError("one tag per boundary facet is required")
        nv = vertices.shape[0]
        for name, idx in (("cell", cells), ("facet", facets)):
            if idx.size and (idx.min() < 0 or idx.max() >= nv):
                bad = int(idx[(idx < 0) | (idx >= nv)][0])
                raise MeshIndexError(f"{name} references vertex {bad}, mesh has {nv}")

        vol = _simplex_volumes(vertices, cells)
        scale = _longest_edge(vertices[cells]) ** dim
        degenerate = np.abs(vol) <= 1e-14 * scale
        if degenerate.any():
            k = int(np.flatnonzero(degenerate)[0])
            raise DegenerateCellError(f"cell {k} has zero volume")
        if (vol < 0).any():
            if not self.reorient:
                k = int(np.flatnonzero(vol < 0)[0])
                raise DegenerateCellError(f"cell {k} has negative volume")
            neg = vol < 0
            cells[neg, -2:] = cells[neg, -1:-3:-1]
            vol = np.abs(vol)

        facet_cell, facet_local = _match_boundary(cells, facets)

        set_ = object.__setattr__
        set_(self, "vertices", _frozen(vertices, float))
        set_(self, "cells", _frozen(cells, np.int64))
        set_(self, "facets", _frozen(facets, np.int64))
        set_(self, "facet_tags", _frozen(tags, np.int64))
        set_(self, "cell_volumes", _frozen(vol, float))
        set_(self, "facet_cells", _frozen(facet_cell, np.int64))
        set_(self, "facet_local", _frozen(facet_local, np.int64))
        set_(self, "cell_diameters", _frozen(_longest_edge(vertices[cells]), float))
        fx = vertices[facets]
        set_(self, "facet_diameters", _frozen(_longest_edge(fx), float))
        normals, tangents, measures = self._frames()
        set_(self, "facet_normals", _frozen(normals, float))
        set_(self, "facet_tangents", _frozen(tangents, float))
        set_(self, "facet_measures", _frozen(measures, float))

    def _frames(self):
        dim = self.dim
        nf = self.facets.shape[0]
        normals = np.zeros((nf, dim))
        tangents = np.zeros((nf, dim - 1, dim))
        measures = np.zeros(nf)
        x = self.vertices[self.facets]
        cc = self.vertices[self.cells[self.facet_cells]].mean(axis=1)
        for k in range(nf):
            if dim == 2:
                e = x[k, 1] - x[k, 0]
                n = np.array([e[1], -e[0]])
            else:
                n = np.cross(x[k, 1] - x[k, 0], x[k, 2] - x[k, 0])
            norm = np.linalg.norm(n)
            if norm <= 1e-14 * self.facet_diameters[k] ** (dim - 1):
                raise DegenerateCellError(f"boundary facet {k} is degenerate")
            n = n / norm
            if np.dot(n, x[k].mean(axis=0) - cc[k]) < 0:
                n = -n
            normals[k] = n
            tangents[k] = _tangents(n)
            measures[k] = norm if dim == 2 else 0.5 * norm
        return normals, tangents, measures

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facets.shape[0]

    @property
    def h(self) -> float:
        return float(self.cell_diameters.max())

    def facets_with(self, tag: BoundaryTag) -> np.ndarray:
        return np.flatnonzero(self.facet_tags == int(tag))

    def __eq__(self, other):
        if not isinstance(other, SimplicialMesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.cells, other.cells)
            and np.array_equal(self.facets, other.facets)
            and np.array_equal(self.facet_tags, other.facet_tags)
        )

    __hash__ = None


def _cell_faces(cells):
    """All faces of all cells: (nc * (d+1), d) sorted vertex tuples.

    Face ``j`` of a cell is the face opposite local vertex ``j``.
    """
    k = cells.shape[1]
    faces = np.stack([np.delete(cells, j, axis=1) for j in range(k)], axis=1)
    return np.sort(faces, axis=2).reshape(-1, k - 1)


def _match_boundary(cells, facets):
    k = cells.shape[1]
    faces = _cell_faces(cells)
    uniq, inverse, counts = np.unique(faces, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if (counts > 2).any():
        raise OpenBoundaryError("a face is shared by more than two cells")
    lookup = {tuple(f): i for i, f in enumerate(uniq)}
    first = np.full(uniq.shape[0], -1, dtype=np.int64)
    first[inverse[::-1]] = np.arange(inverse.size)[::-1]

    facet_cell = np.empty(facets.shape[0], dtype=np.int64)
    facet_local = np.empty(facets.shape[0], dtype=np.int64)
    seen = np.zeros(uniq.shape[0], dtype=bool)
    for m, f in enumerate(np.sort(facets, axis=1)):
        i = lookup.get(tuple(f))
        if i is None:
            raise OpenBoundaryError(f"boundary facet {m} {tuple(f)} is not a cell face")
        if counts[i] != 1:
            raise OpenBoundaryError(f"boundary facet {m} {tuple(f)} is an interior face")
        if seen[i]:
            raise OpenBoundaryError(f"boundary facet {m} {tuple(f)} listed twice")
        seen[i] = True
        facet_cell[m], facet_local[m] = divmod(int(first[i]), k)
    missing = (counts == 1) & ~seen
    if missing.any():
        f = tuple(int(v) for v in uniq[np.flatnonzero(missing)[0]])
        raise OpenBoundaryError(f"cell face {f} lies on the boundary but is not tagged")
    return facet_cell, facet_local


def boundary_faces(cells: np.ndarray) -> np.ndarray:
    """Faces belonging to exactly one cell, oriented as in the owning cell."""
    cells = np.asarray(cells)
    k = cells.shape[1]
    faces = np.stack([np.delete(cells, j, axis=1) for j in range(k)], axis=1).reshape(-1, k - 1)
    _, inverse, counts = np.unique(np.sort(faces, axis=1), axis=0, return_inverse=True,
                                   return_counts=True)
    return faces[counts[inverse.reshape(-1)] == 1]


def _all_dirichlet(centroid, normal):
    return BoundaryTag.DIRICHLET


def from_cells(vertices, cells, tagger: Tagger | None = None) -> SimplicialMesh:
    """Build a mesh, discovering boundary facets and tagging them.

    ``tagger(centroid, outward_normal)`` returns the tag of one facet.
    """
    tagger = tagger or _all_dirichlet
    vertices = np.asarray(vertices, dtype=float)
    dim = vertices.shape[1]
    cells = np.asarray(cells, dtype=np.int64)
    vol = _simplex_volumes(vertices, cells)
    cells = cells.copy()
    neg = vol < 0
    cells[neg, -2:] = cells[neg, -1:-3:-1]
    faces = boundary_faces(cells)
    untagged = SimplicialMesh(vertices, cells, faces, [BoundaryTag.DIRICHLET] * len(faces))
    centroids = vertices[faces].mean(axis=1)
    tags = [BoundaryTag(tagger(centroids[k], untagged.facet_normals[k])) for k in range(len(faces))]
    return SimplicialMesh(vertices, cells, faces, tags)


def generate_structured_square(n: int | Sequence[int],
                               bbox: Sequence[float] = (0.0, 0.0, 1.0, 1.0),
                               tagger: Tagger | None = None, keep=None) -> SimplicialMesh:
    """Uniform grid of rectangles, each cut along its (SW, NE) diagonal.

    ``n`` is one int or ``(nx, ny)``; ``keep`` masks rectangles by centre as
    in :func:`generate_structured_cube`.
    """
    nx, ny = (n, n) if np.isscalar(n) else (int(n[0]), int(n[1]))
    if min(nx, ny) < 1:
        raise ValueError("n must be positive")
    xmin, ymin, xmax, ymax = map(float, bbox)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("degenerate bounding box")
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = (a.ravel() for a in np.meshgrid(np.arange(nx), np.arange(ny)))
    if keep is not None:
        mask = np.asarray(keep(np.column_stack([(xs[i] + xs[i + 1]) / 2,
                                                (ys[j] + ys[j + 1]) / 2])), dtype=bool)
        i, j = i[mask], j[mask]
    a = j * (nx + 1) + i
    b, c, d = a + 1, a + nx + 2, a + nx + 1
    cells = np.empty((2 * a.size, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([a, b, c])
    cells[1::2] = np.column_stack([a, c, d])
    used, cells = np.unique(cells, return_inverse=True)
    return from_cells(vertices[used], cells.reshape(-1, 3), tagger)


def generate_structured_cube(n: int | Sequence[int], bbox: Sequence[float] = (0, 0, 0, 1, 1, 1),
                             tagger: Tagger | None = None, keep=None) -> SimplicialMesh:
    """Uniform grid of boxes, each split into six Kuhn tetrahedra.

    ``n`` is the number of boxes per axis (one int or three).  ``keep``, if
    given, maps box centres ``(m, 3)`` to a boolean mask of boxes to retain,
    which carves holes while keeping the mesh conforming.
    """
    ns = (n, n, n) if np.isscalar(n) else tuple(int(v) for v in n)
    if len(ns) != 3 or min(ns) < 1:
        raise ValueError("n must be positive")
    lo = np.asarray(bbox[:3], dtype=float)
    hi = np.asarray(bbox[3:], dtype=float)
    if not (hi > lo).all():
        raise ValueError("degenerate bounding box")
    axes = [np.linspace(lo[a], hi[a], ns[a] + 1) for a in range(3)]
    Z, Y, X = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def index(i, j, k):
        return (k * (ns[1] + 1) + j) * (ns[0] + 1) + i

    i, j, k = (a.ravel() for a in np.meshgrid(np.arange(ns[0]), np.arange(ns[1]),
                                               np.arange(ns[2]), indexing="ij"))
    if keep is not None:
        centres = np.column_stack([(axes[0][i] + axes[0][i + 1]) / 2,
                                   (axes[1][j] + axes[1][j + 1]) / 2,
                                   (axes[2][k] + axes[2][k + 1]) / 2])
        mask = np.asarray(keep(centres), dtype=bool)
        i, j, k = i[mask], j[mask], k[mask]
    tets = []
    for perm in itertools.permutations(range(3)):
        off = np.zeros(3, dtype=np.int64)
        corners = [index(i, j, k)]
        for ax in perm:
            off[ax] += 1
            corners.append(index(i + off[0], j + off[1], k + off[2]))
        tets.append(np.column_stack(corners))
    cells = np.stack(tets, axis=1).reshape(-1, 4)
    used, cells = np.unique(cells, return_inverse=True)
    return from_cells(vertices[used], cells.reshape(-1, 4), tagger)


def facet_frame(mesh: SimplicialMesh, facet_index: int) -> FacetFrame:
    return FacetFrame(mesh.facet_normals[facet_index].copy(),
                      mesh.facet_tangents[facet_index].copy())


def box_tagger(rules: dict[tuple[int, float], BoundaryTag],
               default: BoundaryTag = BoundaryTag.DIRICHLET, tol: float = 1e-10) -> Tagger:
    """Tagger for axis-aligned faces: ``{(axis, coordinate): tag}``."""

    def tag(centroid, normal):
        for (axis, value), t in rules.items():
            if abs(centroid[axis] - value) < tol:
                return t
        return default

    return tag


# -- text format -----------------------------------------------------------

def write_mesh(mesh: SimplicialMesh) -> str:
    lines = [f"mesh {mesh.dim} {mesh.n_vertices} {mesh.n_cells} {mesh.n_facets}"]
    lines += [" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices]
    lines += [" ".join(str(i) for i in c) for c in mesh.cells]
    lines += [" ".join([BoundaryTag(t).label, *map(str, f)])
              for t, f in zip(mesh.facet_tags, mesh.facets)]
    return "\n".join(lines) + "\n"


def read_mesh(text: str, reorient: bool = False) -> SimplicialMesh:
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows or rows[0][0] != "mesh" or len(rows[0]) != 5:
        raise MeshFormatError("expected header 'mesh <dim> <nv> <nc> <nf>'")
    try:
        dim, nv, nc, nf = (int(s) for s in rows[0][1:])
    except ValueError:
        raise MeshFormatError("non-integer header field") from None
    if dim not in (2, 3) or min(nv, nc, nf) < 0:
        raise MeshFormatError("invalid header values")
    body = rows[1:]
    if len(body) != nv + nc + nf:
        raise MeshFormatError(f"expected {nv + nc + nf} data lines, found {len(body)}")

    def parse(chunk, width, conv, what):
        out = []
        for r in chunk:
            if len(r) != width:
                raise MeshFormatError(f"{what} line {' '.join(r)!r} must have {width} fields")
            try:
                out.append([conv(s) for s in r])
            except ValueError:
                raise MeshFormatError(f"bad {what} line {' '.join(r)!r}") from None
        return out

    vertices = parse(body[:nv], dim, float, "vertex")
    cells = parse(body[nv:nv + nc], dim + 1, int, "cell")
    frows = body[nv + nc:]
    tags = [BoundaryTag.parse(r[0]) for r in frows]
    facets = parse([r[1:] for r in frows], dim, int, "facet")
    return SimplicialMesh(np.array(vertices, dtype=float).reshape(nv, dim),
                          np.array(cells, dtype=np.int64).reshape(nc, dim + 1),
                          np.array(facets, dtype=np.int64).reshape(nf, dim),
                          tags, reorient=reorient)


def load_mesh(path, reorient: bool = False) -> SimplicialMesh:
    with open(path) as fh:
        return read_mesh(fh.read(), reorient=reorient)


def save_mesh(mesh: SimplicialMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(write_mesh(mesh))
