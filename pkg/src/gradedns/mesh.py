"""Structured triangulations of axis-aligned rectangles.

Meshes are built by splitting each subrectangle of an ``nx x ny`` grid along
its lower-left/upper-right diagonal and refined by edge-midpoint subdivision,
so every refined mesh is nested in its parent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PointNotFoundError(LookupError):
    """Raised when a point lies outside the triangulated domain."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with edge connectivity and boundary tags.

    ``edges`` are stored with ascending vertex indices.  ``edge_cells[e]``
    holds the two adjacent cells, the second entry being ``-1`` on the
    boundary.  ``cell_edges[c, k]`` is the edge opposite local vertex ``k``.
    ``parent`` maps each cell to the cell of ``coarse`` it was cut from.
    """

    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    edge_cells: np.ndarray
    cell_edges: np.ndarray
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray
    bounds: tuple[float, float, float, float]
    coarse: Mesh | None = field(default=None, repr=False)
    parent: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def h_max(self) -> float:
        return float(self.edge_lengths.max())

    @property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        xmin, xmax, ymin, ymax = self.bounds
        return (xmax - xmin) * (ymax - ymin)

    def min_angle(self) -> float:
        """Smallest interior angle over all cells, in degrees."""
        p = self.vertices[self.cells]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
        return float(np.min(angles))

    @property
    def jacobians(self) -> np.ndarray:
        """Affine-map Jacobians ``J[c] = [x1 - x0, x2 - x0]`` (columns)."""
        p = self.vertices[self.cells]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    def to_physical(self, cell, bary) -> np.ndarray:
        """Map barycentric coordinates on ``cell`` to physical points."""
        bary = np.asarray(bary, dtype=float)
        return np.einsum("...k,...kd->...d", bary, self.vertices[self.cells[cell]])

    def is_refinement_of(self, other: Mesh) -> bool:
        m = self
        while m is not None:
            if m is other:
                return True
            m = m.coarse
        return False

    def ancestor_cells(self, other: Mesh) -> np.ndarray:
        """Cell of ``other`` containing each cell of this (nested) mesh."""
        idx = np.arange(self.n_cells)
        m = self
        while m is not other:
            if m.coarse is None:
                raise ValueError("meshes are not nested")
            idx = m.parent[idx]
            m = m.coarse
        return idx


def _connectivity(cells: np.ndarray, n_vertices: int):
    local = np.array([[1, 2], [2, 0], [0, 1]])
    pairs = np.sort(cells[:, local], axis=2).reshape(-1, 2)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    cell_edges = inverse.reshape(-1, 3)

    edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(len(cells)), 3)
    order = np.argsort(inverse, kind="stable")
    counts = np.bincount(inverse, minlength=len(edges))
    if counts.max() > 2:
        raise ValueError("non-manifold triangulation")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    edge_cells[:, 0] = owner[order[starts]]
    two = counts == 2
    edge_cells[two, 1] = owner[order[starts[two] + 1]]

    boundary_edges = edge_cells[:, 1] < 0
    boundary_vertices = np.zeros(n_vertices, dtype=bool)
    boundary_vertices[edges[boundary_edges].ravel()] = True
    return edges, edge_cells, cell_edges, boundary_edges, boundary_vertices


def _make_mesh(vertices, cells, bounds, coarse=None, parent=None) -> Mesh:
    edges, edge_cells, cell_edges, bedges, bverts = _connectivity(cells, len(vertices))
    for a in (vertices, cells, edges, edge_cells, cell_edges, bedges, bverts):
        a.setflags(write=False)
    if parent is not None:
        parent.setflags(write=False)
    return Mesh(vertices, cells, edges, edge_cells, cell_edges, bverts, bedges,
                bounds, coarse, parent)


def build_rect_mesh(xmin: float, xmax: float, ymin: float, ymax: float,
                    nx: int, ny: int) -> Mesh:
    """Triangulate ``[xmin, xmax] x [ymin, ymax]`` into ``2 nx ny`` triangles.

    Grid lines sit at ``ymin + j (ymax - ymin) / ny``; with ``ymin = -ymax``
    and ``ny`` even the line ``y = 0`` is a union of mesh edges.
    """
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"degenerate domain extents ({xmin}, {xmax}) x ({ymin}, {ymax})")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"subdivision counts must be positive integers, got {nx}, {ny}")
    nx, ny = int(nx), int(ny)
    x = np.linspace(xmin, xmax, nx + 1)
    y = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(x, y)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3).astype(np.int64)
    return _make_mesh(vertices, cells, (float(xmin), float(xmax), float(ymin), float(ymax)))


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every cell into four congruent children through edge midpoints."""
    vertices = np.vstack([mesh.vertices, mesh.vertices[mesh.edges].mean(axis=1)])
    a, b, c = mesh.cells.T
    # midpoint opposite local vertex k
    ma, mb, mc = (mesh.n_vertices + mesh.cell_edges).T
    children = np.stack([
        np.column_stack([a, mc, mb]),
        np.column_stack([mc, b, ma]),
        np.column_stack([mb, ma, c]),
        np.column_stack([ma, mb, mc]),
    ], axis=1).reshape(-1, 3)
    parent = np.repeat(np.arange(mesh.n_cells), 4)
    return _make_mesh(vertices, children, mesh.bounds, coarse=mesh, parent=parent)


def barycentric(mesh: Mesh, cells, points) -> np.ndarray:
    """Barycentric coordinates of ``points`` with respect to ``cells``."""
    p = mesh.vertices[mesh.cells[cells]]
    J = np.stack([p[..., 1, :] - p[..., 0, :], p[..., 2, :] - p[..., 0, :]], axis=-1)
    rhs = np.asarray(points, dtype=float) - p[..., 0, :]
    l12 = np.linalg.solve(J, rhs[..., None])[..., 0]
    return np.concatenate([1.0 - l12.sum(axis=-1, keepdims=True), l12], axis=-1)


def locate_point(mesh: Mesh, p) -> tuple[int, np.ndarray]:
    """Return ``(cell, barycentric coordinates)`` of the cell containing ``p``."""
    p = np.asarray(p, dtype=float)
    tol = 1e-12
    lam = barycentric(mesh, np.arange(mesh.n_cells), np.broadcast_to(p, (mesh.n_cells, 2)))
    worst = lam.min(axis=1)
    cell = int(np.argmax(worst))
    if worst[cell] < -tol:
        raise PointNotFoundError(f"point {tuple(p)} lies outside the mesh")
    bary = np.clip(lam[cell], 0.0, None)
    return cell, bary / bary.sum()


def write_vtk(path, mesh: Mesh, point_vectors=None, point_scalars=None, title="gradedns mesh"):
    """Write the mesh (and optional vertex data) as a legacy-VTK ASCII file."""
    nv, nc = mesh.n_vertices, mesh.n_cells
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            f.write(f"{x!r} {y!r} 0.0\n")
        f.write(f"CELLS {nc} {4 * nc}\n")
        for a, b, c in mesh.cells:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {nc}\n")
        f.write("5\n" * nc)
        if point_vectors or point_scalars:
            f.write(f"POINT_DATA {nv}\n")
        for name, values in (point_vectors or {}).items():
            f.write(f"VECTORS {name} double\n")
            for u, v in np.asarray(values, dtype=float):
                f.write(f"{u!r} {v!r} 0.0\n")
        for name, values in (point_scalars or {}).items():
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for s in np.asarray(values, dtype=float):
                f.write(f"{s!r}\n")
