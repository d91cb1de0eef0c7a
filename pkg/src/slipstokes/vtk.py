"""Legacy ASCII VTK export of velocity/pressure fields on the mesh vertices."""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .femspace import DiscreteField

VTK_TRIANGLE = 5
VTK_TETRA = 10


def _rows(a, fmt="%.10g"):
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(a), fmt=fmt)
    return buf.getvalue()


def vtk_string(velocity: DiscreteField, pressure: DiscreteField | None = None,
               title: str = "slipstokes") -> str:
    """Unstructured grid with velocity vectors and pressure scalars as point data.

    Only vertex values are written, so degree-2 fields are shown through
    their vertex dofs.
    """
    mesh = velocity.space.mesh
    d, nv = mesh.dim, mesh.n_vertices
    pts = np.zeros((nv, 3))
    pts[:, :d] = mesh.vertices
    vel = np.zeros((nv, 3))
    vel[:, :d] = velocity.coefficients.reshape(-1, d)[:nv]
    k = d + 1
    out = [f"# vtk DataFile Version 3.0\n{title.splitlines()[0] if title else 'field'}\n",
           "ASCII\nDATASET UNSTRUCTURED_GRID\n",
           f"POINTS {nv} double\n", _rows(pts),
           f"CELLS {mesh.n_cells} {mesh.n_cells * (k + 1)}\n",
           _rows(np.hstack([np.full((mesh.n_cells, 1), k), mesh.cells]), "%d"),
           f"CELL_TYPES {mesh.n_cells}\n",
           _rows(np.full((mesh.n_cells, 1), VTK_TRIANGLE if d == 2 else VTK_TETRA), "%d"),
           f"POINT_DATA {nv}\nVECTORS velocity double\n", _rows(vel)]
    if pressure is not None:
        out += ["SCALARS pressure double 1\nLOOKUP_TABLE default\n",
                _rows(pressure.coefficients[:nv, None])]
    return "".join(out)


def write_vtk(path, velocity: DiscreteField, pressure: DiscreteField | None = None,
              title: str = "slipstokes") -> Path:
    path = Path(path)
    path.write_text(vtk_string(velocity, pressure, title))
    return path


def read_vtk_point_data(text: str) -> dict:
    """Parse the files produced by :func:`vtk_string` (points, cells and point arrays)."""
    tokens = text.split("\n")
    out, i = {}, 0
    while i < len(tokens):
        line = tokens[i].split()
        if not line:
            i += 1
            continue
        key = line[0]
        if key == "POINTS":
            n = int(line[1])
            out["points"] = np.loadtxt(tokens[i + 1:i + 1 + n], ndmin=2)
            i += n
        elif key == "CELLS":
            n = int(line[1])
            out["cells"] = np.loadtxt(tokens[i + 1:i + 1 + n], dtype=np.int64, ndmin=2)[:, 1:]
            i += n
        elif key == "VECTORS":
            n = len(out["points"])
            out[line[1]] = np.loadtxt(tokens[i + 1:i + 1 + n], ndmin=2)
            i += n
        elif key == "SCALARS":
            n = len(out["points"])
            out[line[1]] = np.loadtxt(tokens[i + 2:i + 2 + n], ndmin=1)
            i += n + 1
        i += 1
    return out
