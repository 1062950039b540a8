import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradedns.mesh import (PointNotFoundError, barycentric, build_rect_mesh, locate_point,
                           refine_uniform, write_vtk)
from gradedns.spaces import Field, SpaceKind, build_space, interpolate_p2
from gradedns.harness.studies import prolongate


def check_invariants(mesh):
    assert np.all(mesh.signed_areas > 0)
    # every interior edge has 2 cells, every boundary edge 1
    interior = mesh.edge_cells[:, 1] >= 0
    assert np.array_equal(~interior, mesh.boundary_edge_flags)
    counts = np.bincount(mesh.cell_edges.ravel(), minlength=mesh.n_edges)
    assert np.array_equal(counts, np.where(interior, 2, 1))
    assert mesh.n_vertices - mesh.n_edges + mesh.n_cells == 1
    # conforming: boundary edges lie on the rectangle boundary and no vertex
    # lies strictly inside another cell's edge
    xmin, xmax, ymin, ymax = mesh.bounds
    tol = 1e-12 * max(xmax - xmin, ymax - ymin)
    p = mesh.vertices[mesh.edges[mesh.boundary_edge_flags]]
    on = ((np.abs(p[..., 0] - xmin) < tol) | (np.abs(p[..., 0] - xmax) < tol)
          | (np.abs(p[..., 1] - ymin) < tol) | (np.abs(p[..., 1] - ymax) < tol))
    assert on.all()
    assert len(np.unique(mesh.edges, axis=0)) == mesh.n_edges
    assert np.all(mesh.edges[:, 0] < mesh.edges[:, 1])


def test_single_square():
    m = build_rect_mesh(0, 1, 0, 1, 1, 1)
    assert (m.n_cells, m.n_vertices, m.n_edges) == (2, 4, 5)
    check_invariants(m)


def test_counts_16():
    m = build_rect_mesh(-np.pi, np.pi, -np.pi, np.pi, 16, 16)
    assert m.n_cells == 512
    assert m.n_vertices == 289
    assert m.boundary_edge_flags.sum() == 64


def test_h_max_is_subrectangle_diagonal():
    m = build_rect_mesh(0, 2, 0, 1, 4, 2)
    assert m.h_max == pytest.approx(np.hypot(0.5, 0.5), rel=1e-15)


def test_y_zero_is_mesh_line():
    m = build_rect_mesh(-np.pi, np.pi, -np.pi, np.pi, 6, 8)
    centroids = m.vertices[m.cells].mean(axis=1)
    ymin = m.vertices[m.cells][..., 1].min(axis=1)
    ymax = m.vertices[m.cells][..., 1].max(axis=1)
    # no cell straddles y = 0
    assert not np.any((ymin < -1e-14) & (ymax > 1e-14))
    assert np.any(np.abs(m.vertices[:, 1]) < 1e-15)
    assert np.all(centroids[:, 1] != 0)


@pytest.mark.parametrize("args", [(1, 0, 0, 1, 2, 2), (0, 1, 1, 1, 2, 2), (0, 1, 0, 1, 0, 2),
                                  (0, 1, 0, 1, 2, -1), (0, 1, 0, 1, 1.5, 2)])
def test_bad_arguments(args):
    with pytest.raises(ValueError):
        build_rect_mesh(*args)


def test_refine_counts_and_nesting(unit_mesh):
    fine = refine_uniform(unit_mesh)
    assert (fine.n_cells, fine.n_vertices) == (8, 9)
    assert np.array_equal(fine.vertices[:unit_mesh.n_vertices], unit_mesh.vertices)
    assert fine.h_max == pytest.approx(unit_mesh.h_max / 2, rel=1e-15)
    assert fine.is_refinement_of(unit_mesh)
    assert not unit_mesh.is_refinement_of(fine)
    check_invariants(fine)


def test_children_are_congruent_and_cover_parent():
    coarse = build_rect_mesh(-1, 2, 0, 1, 3, 2)
    fine = refine_uniform(coarse)
    parent_area = coarse.signed_areas[fine.parent]
    assert np.allclose(fine.signed_areas, parent_area / 4, rtol=1e-13)
    # children lie inside their parent
    centroids = fine.vertices[fine.cells].mean(axis=1)
    lam = barycentric(coarse, fine.parent, centroids)
    assert lam.min() > 0


def test_locate_centroid_and_vertex():
    m = build_rect_mesh(0, 1, 0, 1, 3, 3)
    for k in (0, 7, 17):
        c = m.vertices[m.cells[k]].mean(axis=0)
        cell, bary = locate_point(m, c)
        assert cell == k
        assert np.allclose(bary, 1 / 3, atol=1e-14)
    cell, bary = locate_point(m, m.vertices[5])
    assert 5 in m.cells[cell]
    assert np.isclose(bary.max(), 1.0, atol=1e-14)


def test_locate_random_points_reconstruct(rng):
    m = build_rect_mesh(-np.pi, np.pi, -1, 1, 5, 4)
    pts = np.column_stack([rng.uniform(-np.pi, np.pi, 200), rng.uniform(-1, 1, 200)])
    for p in pts:
        cell, bary = locate_point(m, p)
        assert bary.min() >= 0 and bary.sum() == pytest.approx(1, abs=1e-15)
        assert np.linalg.norm(m.to_physical(cell, bary) - p) <= 1e-12


def test_locate_boundary_point():
    m = build_rect_mesh(0, 1, 0, 1, 2, 2)
    cell, bary = locate_point(m, (1.0, 0.3))
    assert np.allclose(m.to_physical(cell, bary), (1.0, 0.3))


def test_locate_outside():
    m = build_rect_mesh(0, 1, 0, 1, 2, 2)
    with pytest.raises(PointNotFoundError):
        locate_point(m, (1.5, 0.5))
    with pytest.raises(LookupError):
        locate_point(m, (0.5, -1e-6))


def test_area_sum():
    m = build_rect_mesh(-np.pi, np.pi, -np.pi / 2, np.e, 7, 9)
    assert m.signed_areas.sum() == pytest.approx((2 * np.pi) * (np.e + np.pi / 2), rel=1e-13)


def test_nested_prolongation_pointwise(rng):
    coarse = build_rect_mesh(-1, 1, -1, 1, 3, 3)
    fine = refine_uniform(refine_uniform(coarse))
    V = build_space(coarse, SpaceKind.P2_VECTOR)
    u = Field(V, rng.standard_normal(V.dof_count))
    uf = prolongate(u, fine)
    for p in rng.uniform(-1, 1, (100, 2)):
        c, b = locate_point(coarse, p)
        cf, bf = locate_point(fine, p)
        assert np.abs(u.evaluate(c, b) - uf.evaluate(cf, bf)).max() <= 1e-12


def test_prolongation_reproduces_quadratics():
    coarse = build_rect_mesh(0, 1, 0, 1, 2, 2)
    fine = refine_uniform(coarse)
    f = lambda x, y: (x * x - y + 0.5 * x * y, y * y - 2 * x)
    uc = Field(build_space(coarse, SpaceKind.P2_VECTOR),
               interpolate_p2(build_space(coarse, SpaceKind.P2_VECTOR), f))
    Vf = build_space(fine, SpaceKind.P2_VECTOR)
    assert np.allclose(prolongate(uc, fine).coeffs, interpolate_p2(Vf, f), atol=1e-14)


def test_min_angle_structured():
    assert build_rect_mesh(0, 1, 0, 1, 8, 8).min_angle() == pytest.approx(45.0)
    assert build_rect_mesh(0, 2, 0, 1, 4, 4).min_angle() >= 20.0


@settings(max_examples=25, deadline=None)
@given(nx=st.integers(1, 32), ny=st.integers(1, 32), refinements=st.integers(0, 3),
       aspect=st.floats(0.4, 2.5))
def test_generated_meshes_satisfy_invariants(nx, ny, refinements, aspect):
    # keep the property run cheap: at most ~20k cells
    while refinements and 2 * nx * ny * 4 ** refinements > 20000:
        refinements -= 1
    # cell aspect ratio within [0.4, 2.5] keeps the smallest angle >= 20 degrees
    m = build_rect_mesh(0.0, nx * aspect, -ny / 2, ny / 2, nx, ny)
    for _ in range(refinements):
        m = refine_uniform(m)
    check_invariants(m)
    assert m.min_angle() >= 20.0 - 1e-9
    assert m.signed_areas.sum() == pytest.approx(m.area, rel=1e-13)


def test_write_vtk(tmp_path, unit_mesh):
    path = tmp_path / "m.vtk"
    write_vtk(path, unit_mesh, {"velocity": np.ones((4, 2))}, {"p": np.arange(4.0)})
    text = path.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert "POINTS 4 double" in text
    assert "CELLS 2 8" in text
    i = text.index("CELL_TYPES 2")
    assert text[i + 1:i + 3] == ["5", "5"]
    assert "POINT_DATA 4" in text and "VECTORS velocity double" in text
    assert "SCALARS p double 1" in text
