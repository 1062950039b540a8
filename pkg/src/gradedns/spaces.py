"""Finite element spaces on triangles: P1, vector P2, RT1 and DG-P1.

All reference quantities live on the triangle with vertices (0,0), (1,0),
(0,1); points are passed as barycentric triples ``(l0, l1, l2)``.  Physical
values are obtained through the affine map of each cell (Lagrange families)
or the contravariant Piola map (RT1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .mesh import Mesh


class SpaceKind(str, Enum):
    P1 = "P1"
    P2_VECTOR = "P2-vector"
    RT1 = "RT1"
    DG_P1 = "DG-P1"


# ---------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric rule on the reference triangle; weights sum to 1/2."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]


def _orbit(*groups):
    pts, wts = [], []
    for bary, w in groups:
        perms = {tuple(p) for p in _perms(bary)}
        for p in sorted(perms):
            pts.append(p)
            wts.append(w)
    return np.array(pts, dtype=float), np.array(wts, dtype=float)


def _perms(b):
    a, c, d = b
    return [(a, c, d), (a, d, c), (c, a, d), (c, d, a), (d, a, c), (d, c, a)]


def _s21(a, w):
    return ((a, a, 1.0 - 2.0 * a), w)


_SQ15 = np.sqrt(15.0)

# Strang-Fix / Dunavant rules, weights normalised to unit area.
_RULES = {
    1: (((1 / 3, 1 / 3, 1 / 3), 1.0),),
    2: (_s21(1 / 6, 1 / 3),),
    4: (_s21(0.445948490915965, 0.223381589678011),
        _s21(0.091576213509771, 0.109951743655322)),
    5: (((1 / 3, 1 / 3, 1 / 3), 9 / 40),
        _s21((6 + _SQ15) / 21, (155 + _SQ15) / 1200),
        _s21((6 - _SQ15) / 21, (155 - _SQ15) / 1200)),
    6: (_s21(0.249286745170910, 0.116786275726379),
        _s21(0.063089014491502, 0.050844906370207),
        ((0.053145049844817, 0.310352451033784, 0.636502499121399), 0.082851075618374)),
}
_RULES[3] = _RULES[4]


def quadrature_rule(degree: int) -> QuadratureRule:
    """Positive-weight symmetric rule exact for polynomials of ``degree``."""
    if degree not in _RULES:
        raise ValueError(f"unsupported quadrature degree {degree}; choose 1..6")
    pts, wts = _orbit(*_RULES[degree])
    return QuadratureRule(pts, 0.5 * wts, degree)


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


# ---------------------------------------------------------- reference bases

def p1_ref(bary):
    return np.asarray(bary, dtype=float)


def p2_ref(bary):
    """Quadratic Lagrange basis: three vertex then three edge functions.

    The edge function ``3 + k`` belongs to the edge opposite vertex ``k``.
    """
    l = np.asarray(bary, dtype=float)
    l0, l1, l2 = l[..., 0], l[..., 1], l[..., 2]
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1], axis=-1)


def p2_ref_dbary(bary):
    """Derivatives of the P2 basis with respect to the barycentrics, (..., 6, 3)."""
    l = np.asarray(bary, dtype=float)
    l0, l1, l2 = l[..., 0], l[..., 1], l[..., 2]
    z = np.zeros_like(l0)
    rows = [
        [4 * l0 - 1, z, z],
        [z, 4 * l1 - 1, z],
        [z, z, 4 * l2 - 1],
        [z, 4 * l2, 4 * l1],
        [4 * l2, z, 4 * l0],
        [4 * l1, 4 * l0, z],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


# RT1 on the reference cell: span of (1,0),(x,0),(y,0),(0,1),(0,x),(0,y),
# x*(x,y), y*(x,y).  Degrees of freedom: for each edge k (opposite vertex k,
# traversed counterclockwise from vertex a to vertex b) the outward normal flux
# weighted by the edge hat functions of a and b, then the cell averages of
# both components.
_REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
EDGE_ENDS = np.array([[1, 2], [2, 0], [0, 1]])


def _rt_monomials(xy):
    x, y = xy[..., 0], xy[..., 1]
    o, z = np.ones_like(x), np.zeros_like(x)
    vx = np.stack([o, x, y, z, z, z, x * x, x * y], axis=-1)
    vy = np.stack([z, z, z, o, x, y, x * y, y * y], axis=-1)
    return np.stack([vx, vy], axis=-1)  # (..., 8, 2)


def _rt_monomial_div(xy):
    x, y = xy[..., 0], xy[..., 1]
    o, z = np.ones_like(x), np.zeros_like(x)
    return np.stack([z, o, z, z, z, o, 3 * x, 3 * y], axis=-1)


def _rt_dof_matrix():
    s, ws = gauss_legendre_01(4)
    D = np.zeros((8, 8))
    row = 0
    for k in range(3):
        a, b = EDGE_ENDS[k]
        pa, pb = _REF_VERTS[a], _REF_VERTS[b]
        t = pb - pa
        n = np.array([t[1], -t[0]]) / np.linalg.norm(t)
        length = np.linalg.norm(t)
        pts = pa + s[:, None] * t
        flux = _rt_monomials(pts) @ n  # (q, 8)
        for hat in (1.0 - s, s):
            D[row] = length * (ws * hat) @ flux
            row += 1
    q = quadrature_rule(4)
    vals = _rt_monomials(q.xy)
    for comp in range(2):
        D[row] = q.weights @ vals[:, :, comp]
        row += 1
    return D


_RT_COEFFS = np.linalg.inv(_rt_dof_matrix())  # monomial -> nodal basis


def rt1_ref(bary):
    """Reference RT1 basis values, shape (..., 8, 2)."""
    xy = np.asarray(bary, dtype=float)[..., 1:]
    return np.einsum("...md,mk->...kd", _rt_monomials(xy), _RT_COEFFS)


def rt1_ref_div(bary):
    xy = np.asarray(bary, dtype=float)[..., 1:]
    return _rt_monomial_div(xy) @ _RT_COEFFS


# --------------------------------------------------------------- FE spaces

@dataclass(frozen=True, eq=False)
class FESpace:
    """Degree-of-freedom layout of one finite element family on a mesh.

    ``cell_dofs`` lists global scalar dofs per cell (for the vector P2 space
    these are scalar P2 nodes; component ``c`` of node ``i`` is global dof
    ``2 i + c``).  For RT1, ``cell_signs`` carries the orientation factor of
    each local basis function.
    """

    kind: SpaceKind
    mesh: Mesh
    dof_count: int
    cell_dofs: np.ndarray
    dirichlet_dofs: np.ndarray
    cell_signs: np.ndarray | None = field(default=None, repr=False)

    @property
    def local_dim(self) -> int:
        return {SpaceKind.P1: 3, SpaceKind.P2_VECTOR: 12,
                SpaceKind.RT1: 8, SpaceKind.DG_P1: 3}[self.kind]

    @property
    def cell_to_dof(self) -> np.ndarray:
        """Global dofs of each cell, ``local_dim`` entries per row."""
        if self.kind is SpaceKind.P2_VECTOR:
            d = self.cell_dofs
            return np.stack([2 * d, 2 * d + 1], axis=2).reshape(len(d), 12)
        return self.cell_dofs

    @cached_property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.dof_count, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    @cached_property
    def geometry(self) -> CellGeometry:
        return CellGeometry.from_mesh(self.mesh)

    def eval_basis(self, cell: int, ref_point):
        """Basis values and derivatives of ``cell`` at one barycentric point.

        Returns ``(values, gradients)`` for P1/DG-P1 and the scalar P2 basis
        (the vector P2 space shares its scalar basis blockwise), and
        ``(values, divergences)`` for RT1.
        """
        geo = self.geometry
        bary = np.asarray(ref_point, dtype=float)
        if self.kind in (SpaceKind.P1, SpaceKind.DG_P1):
            return p1_ref(bary), geo.grad_bary[cell].copy()
        if self.kind is SpaceKind.P2_VECTOR:
            return p2_ref(bary), p2_ref_dbary(bary) @ geo.grad_bary[cell]
        J = geo.J[cell]
        det = geo.det[cell]
        sign = self.cell_signs[cell]
        vals = sign[:, None] * (rt1_ref(bary) @ J.T) / det
        divs = sign * rt1_ref_div(bary) / det
        return vals, divs


@dataclass(frozen=True)
class CellGeometry:
    J: np.ndarray
    det: np.ndarray
    grad_bary: np.ndarray  # (C, 3, 2), gradients of the barycentric coordinates

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> CellGeometry:
        J = mesh.jacobians
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        Jinv = np.linalg.inv(J)
        g12 = Jinv  # rows are grad l1, grad l2
        g0 = -g12.sum(axis=1)
        grad = np.concatenate([g0[:, None, :], g12], axis=1)
        return cls(J, det, grad)


def build_space(mesh: Mesh, kind) -> FESpace:
    """Number the dofs of ``kind`` on ``mesh`` (vertices, edges, cells)."""
    kind = SpaceKind(kind)
    nv, ne, nc = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    if kind is SpaceKind.P1:
        bdofs = np.flatnonzero(mesh.boundary_vertex_flags)
        return FESpace(kind, mesh, nv, mesh.cells, bdofs)
    if kind is SpaceKind.DG_P1:
        return FESpace(kind, mesh, 3 * nc, np.arange(3 * nc).reshape(nc, 3),
                       np.empty(0, dtype=np.int64))
    if kind is SpaceKind.P2_VECTOR:
        nodes = np.hstack([mesh.cells, nv + mesh.cell_edges])
        bnodes = np.concatenate([np.flatnonzero(mesh.boundary_vertex_flags),
                                 nv + np.flatnonzero(mesh.boundary_edge_flags)])
        bdofs = np.sort(np.concatenate([2 * bnodes, 2 * bnodes + 1]))
        return FESpace(kind, mesh, 2 * (nv + ne), nodes, bdofs)

    # RT1: edge e owns dofs 2e (hat of edges[e, 0]) and 2e + 1 (hat of
    # edges[e, 1]); the global normal is the clockwise rotation of
    # edges[e, 1] - edges[e, 0].
    cells = mesh.cells
    dofs = np.empty((nc, 8), dtype=np.int64)
    signs = np.empty((nc, 8))
    for k in range(3):
        a = cells[:, EDGE_ENDS[k, 0]]
        e = mesh.cell_edges[:, k]
        forward = mesh.edges[e, 0] == a
        s = np.where(forward, 1.0, -1.0)
        dofs[:, 2 * k] = 2 * e + np.where(forward, 0, 1)
        dofs[:, 2 * k + 1] = 2 * e + np.where(forward, 1, 0)
        signs[:, 2 * k] = s
        signs[:, 2 * k + 1] = s
    dofs[:, 6] = 2 * ne + 2 * np.arange(nc)
    dofs[:, 7] = dofs[:, 6] + 1
    signs[:, 6:] = 1.0
    bedges = np.flatnonzero(mesh.boundary_edge_flags)
    bdofs = np.sort(np.concatenate([2 * bedges, 2 * bedges + 1]))
    return FESpace(kind, mesh, 2 * ne + 2 * nc, dofs, bdofs, signs)


# -------------------------------------------------------------------- fields

@dataclass
class Field:
    """Coefficient vector bound to a space."""

    space: FESpace
    coeffs: np.ndarray
    time: float | None = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dof_count,):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} does not match "
                f"{self.space.kind.value} dof count {self.space.dof_count}")

    def evaluate(self, cells, bary) -> np.ndarray:
        """Field values at barycentric points of the given cells.

        Scalar spaces return shape (n,), vector spaces (n, 2).
        """
        cells = np.atleast_1d(np.asarray(cells))
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        sp = self.space
        if sp.kind in (SpaceKind.P1, SpaceKind.DG_P1):
            return np.einsum("nk,nk->n", p1_ref(bary), self.coeffs[sp.cell_dofs[cells]])
        if sp.kind is SpaceKind.P2_VECTOR:
            c = self.coeffs.reshape(-1, 2)[sp.cell_dofs[cells]]
            return np.einsum("nk,nkd->nd", p2_ref(bary), c)
        geo = sp.geometry
        c = self.coeffs[sp.cell_dofs[cells]] * sp.cell_signs[cells]
        ref = np.einsum("nkd,nk->nd", rt1_ref(bary), c)
        return np.einsum("nij,nj->ni", geo.J[cells], ref) / geo.det[cells, None]


def interpolate_p2(space: FESpace, f) -> np.ndarray:
    """Nodal interpolant of a vector function ``f(x, y) -> (fx, fy)``."""
    if space.kind is not SpaceKind.P2_VECTOR:
        raise ValueError("nodal interpolation is provided for the vector P2 space")
    mesh = space.mesh
    nodes = np.vstack([mesh.vertices, mesh.vertices[mesh.edges].mean(axis=1)])
    fx, fy = f(nodes[:, 0], nodes[:, 1])
    out = np.empty(space.dof_count)
    out[0::2] = np.broadcast_to(fx, len(nodes))
    out[1::2] = np.broadcast_to(fy, len(nodes))
    return out


def p2_nodes(mesh: Mesh) -> np.ndarray:
    """Coordinates of scalar P2 nodes: vertices then edge midpoints."""
    return np.vstack([mesh.vertices, mesh.vertices[mesh.edges].mean(axis=1)])
