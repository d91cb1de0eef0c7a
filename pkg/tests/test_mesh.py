import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slipstokes.cases import cavity_mesh
from slipstokes.mesh import (BoundaryTag, DegenerateCellError, MeshError, MeshFormatError,
                             MeshIndexError, OpenBoundaryError, SimplicialMesh, box_tagger,
                             facet_frame, from_cells, generate_structured_cube,
                             generate_structured_square, read_mesh, write_mesh)


def test_square_h_for_level_8():
    assert cavity_mesh(8).h == pytest.approx(0.353553, abs=5e-7)


@pytest.mark.parametrize("n, cells, facets", [(1, 6, 12), (2, 48, 48)])
def test_cube_counts(n, cells, facets):
    m = generate_structured_cube(n)
    assert m.n_cells == cells
    assert m.n_facets == facets
    assert m.cell_volumes.sum() == pytest.approx(1.0)
    assert (m.cell_volumes > 0).all()


@pytest.mark.parametrize("n", [1, 3, 5])
def test_square_volume_and_boundary(n):
    m = generate_structured_square(n, (-1, -1, 1, 1))
    assert m.n_cells == 2 * n * n
    assert m.n_facets == 4 * n
    assert m.cell_volumes.sum() == pytest.approx(4.0)
    assert m.facet_measures.sum() == pytest.approx(8.0)


@pytest.mark.parametrize("mesh", [generate_structured_square(3), generate_structured_cube(2)],
                         ids=["2d", "3d"])
def test_normals_point_outward_and_frames_orthonormal(mesh):
    centroid = mesh.vertices.mean(axis=0)
    fc = mesh.vertices[mesh.facets].mean(axis=1)
    assert (np.einsum("ka,ka->k", mesh.facet_normals, fc - centroid) > 0).all()
    for k in range(mesh.n_facets):
        fr = facet_frame(mesh, k)
        basis = np.vstack([fr.normal, fr.tangents])
        np.testing.assert_allclose(basis @ basis.T, np.eye(mesh.dim), atol=1e-14)
    # divergence theorem: sum of |E| n vanishes on a closed boundary
    np.testing.assert_allclose((mesh.facet_measures[:, None] * mesh.facet_normals).sum(0), 0,
                               atol=1e-13)


def test_2d_tangent_is_normal_rotated_by_plus_90():
    m = generate_structured_square(2)
    n, t = m.facet_normals, m.facet_tangents[:, 0]
    np.testing.assert_allclose(t, np.column_stack([-n[:, 1], n[:, 0]]))
    assert (n[:, 0] * t[:, 1] - n[:, 1] * t[:, 0] > 0).all()


def test_tags_from_box_tagger():
    m = cavity_mesh(4)
    slip = m.facets_with(BoundaryTag.SLIP)
    assert slip.size == 4
    np.testing.assert_allclose(m.facet_normals[slip], [[0, -1]] * 4)
    assert m.facets_with(BoundaryTag.DIRICHLET).size == 12


@pytest.mark.parametrize("mesh", [cavity_mesh(3), generate_structured_cube(2),
                                  generate_structured_cube(1, tagger=box_tagger(
                                      {(0, 1.0): BoundaryTag.DONOTHING}))],
                         ids=["2d", "3d", "3d-donothing"])
def test_text_round_trip(mesh):
    again = read_mesh(write_mesh(mesh))
    assert again == mesh
    assert write_mesh(again) == write_mesh(mesh)


def test_file_round_trip(tmp_path):
    from slipstokes.mesh import load_mesh, save_mesh
    m = cavity_mesh(2)
    save_mesh(m, tmp_path / "m.txt")
    assert load_mesh(tmp_path / "m.txt") == m


def test_comments_are_ignored():
    text = "# unit triangle\nmesh 2 3 1 3\n0 0\n1 0 # x axis\n0 1\n0 1 2\n" \
           "dirichlet 0 1\nslip 1 2\ndonothing 2 0\n"
    m = read_mesh(text)
    assert m.n_cells == 1
    assert sorted(m.facet_tags.tolist()) == [0, 1, 2]


@pytest.mark.parametrize("text, error", [
    ("nonsense", MeshFormatError),
    ("mesh 2 3 1 3\n0 0\n1 0\n0 1\n0 1 2\ndirichlet 0 1\nslip 1 2\n", MeshFormatError),
    ("mesh 2 3 1 3\n0 0\n1 0\n0 1\n0 1 2\ndirichlet 0 1\nwall 1 2\nslip 2 0\n", MeshFormatError),
    ("mesh 2 3 1 3\n0 0\n1 0\n0 x\n0 1 2\ndirichlet 0 1\nslip 1 2\nslip 2 0\n", MeshFormatError),
    ("mesh 2 3 1 3\n0 0\n1 0\n0 1\n0 1 7\ndirichlet 0 1\nslip 1 2\nslip 2 0\n", MeshIndexError),
    ("mesh 2 3 1 2\n0 0\n1 0\n0 1\n0 1 2\ndirichlet 0 1\nslip 1 2\n", OpenBoundaryError),
    ("mesh 2 3 1 3\n0 0\n1 0\n2 0\n0 1 2\ndirichlet 0 1\nslip 1 2\nslip 2 0\n",
     DegenerateCellError),
    ("mesh 2 3 1 3\n0 0\n1 0\n0 1\n0 2 1\ndirichlet 0 1\nslip 1 2\nslip 2 0\n",
     DegenerateCellError),
])
def test_read_errors_are_distinct(text, error):
    with pytest.raises(error):
        read_mesh(text)
    assert issubclass(error, MeshError)


def test_negative_cell_reoriented_on_request():
    text = "mesh 2 3 1 3\n0 0\n1 0\n0 1\n0 2 1\ndirichlet 0 1\nslip 1 2\nslip 2 0\n"
    m = read_mesh(text, reorient=True)
    assert m.cell_volumes[0] == pytest.approx(0.5)


def test_interior_face_cannot_be_tagged():
    v = [[0, 0], [1, 0], [1, 1], [0, 1]]
    cells = [[0, 1, 2], [0, 2, 3]]
    with pytest.raises(OpenBoundaryError):
        SimplicialMesh(v, cells, [[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]], [0] * 5)


def test_arrays_are_read_only():
    m = cavity_mesh(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 6), sx=st.floats(0.1, 10), sy=st.floats(0.1, 10))
def test_structured_square_properties(n, sx, sy):
    m = generate_structured_square(n, (0, 0, sx, sy))
    assert m.cell_volumes.sum() == pytest.approx(sx * sy, rel=1e-12)
    assert m.h == pytest.approx(math.hypot(sx, sy) / n, rel=1e-12)
    assert m.facet_measures.sum() == pytest.approx(2 * (sx + sy), rel=1e-12)


def test_from_cells_fixes_orientation():
    v = [[0, 0], [1, 0], [0, 1]]
    m = from_cells(v, [[0, 2, 1]])
    assert m.cell_volumes[0] == pytest.approx(0.5)
    assert m.n_facets == 3


def test_anisotropic_counts_and_holes():
    m = generate_structured_square((4, 2), (0, 0, 2, 1))
    assert m.n_cells == 16 and m.h == pytest.approx(math.hypot(0.5, 0.5))
    holed = generate_structured_square(4, keep=lambda c: ~((abs(c[:, 0] - 0.5) < 0.25)
                                                           & (abs(c[:, 1] - 0.5) < 0.25)))
    assert holed.n_cells == 2 * 12
    assert holed.n_vertices == 24  # the hole's centre vertex is dropped
    assert holed.n_facets == 16 + 8
    assert holed.cell_volumes.sum() == pytest.approx(0.75)
    cube = generate_structured_cube((3, 1, 1), keep=lambda c: c[:, 0] > 1 / 3)
    assert cube.n_cells == 12 and cube.n_vertices == 12


def test_channel_obstacle_mesh_tags():
    from slipstokes.cases import CYLINDER_H, cylinder_channel_mesh
    m = cylinder_channel_mesh(4)
    slip = m.facets_with(BoundaryTag.SLIP)
    out = m.facets_with(BoundaryTag.DONOTHING)
    assert slip.size == 64 and out.size == 32
    np.testing.assert_allclose(m.facet_measures[out].sum(), CYLINDER_H**2)
    # two boxes removed in x (spacing 2.5 / 24) and in y (spacing H / 4)
    hole = (2 * 2.5 / 24) * (2 * CYLINDER_H / 4) * CYLINDER_H
    assert m.cell_volumes.sum() == pytest.approx(CYLINDER_H**2 * 2.5 - hole, rel=1e-12)
