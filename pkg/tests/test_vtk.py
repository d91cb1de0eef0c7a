import numpy as np

from slipstokes.assembly import make_spaces
from slipstokes.cases import cavity_mesh, patch_mesh
from slipstokes.femspace import interpolate
from slipstokes.vtk import read_vtk_point_data, vtk_string, write_vtk


def test_2d_round_trip(tmp_path):
    mesh = cavity_mesh(3)
    V, Q = make_spaces(mesh, 2)
    u = interpolate(V, lambda x: np.column_stack([x[:, 1], -x[:, 0]]))
    p = interpolate(Q, lambda x: x[:, 0] * x[:, 1])
    path = write_vtk(tmp_path / "f.vtk", u, p, title="test")
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\ntest\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    assert f"CELL_TYPES {mesh.n_cells}" in text
    data = read_vtk_point_data(text)
    np.testing.assert_allclose(data["points"][:, :2], mesh.vertices)
    assert not data["points"][:, 2].any()
    np.testing.assert_array_equal(data["cells"], mesh.cells)
    x = mesh.vertices
    np.testing.assert_allclose(data["velocity"], np.column_stack([x[:, 1], -x[:, 0], 0 * x[:, 0]]),
                               atol=1e-10)
    np.testing.assert_allclose(data["pressure"], x[:, 0] * x[:, 1], atol=1e-10)


def test_3d_cell_type_and_no_pressure():
    mesh = patch_mesh(3, 1)
    V, _ = make_spaces(mesh, 1)
    text = vtk_string(interpolate(V, lambda x: x))
    lines = text.splitlines()
    k = lines.index(f"CELL_TYPES {mesh.n_cells}")
    assert set(lines[k + 1:k + 1 + mesh.n_cells]) == {"10"}
    assert "SCALARS" not in text
    np.testing.assert_allclose(read_vtk_point_data(text)["velocity"], mesh.vertices, atol=1e-10)
