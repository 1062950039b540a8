"""Sparse operators of the scheme, assembled cell by cell.

Vector P2 operators that act componentwise are assembled once for the scalar
P2 basis and expanded with ``kron(S, I2)`` to the interleaved layout of
:func:`gradedns.spaces.build_space`.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .spaces import (FESpace, Field, SpaceKind, p2_ref, p2_ref_dbary,
                     quadrature_rule, rt1_ref, rt1_ref_div)

# quadrature degrees per integrand type
MASS_DEGREE = 4
CONVECTION_DEGREE = 5
LOAD_DEGREE = 6


def _sparse(local, rows, cols, shape) -> sp.csr_matrix:
    r = np.broadcast_to(rows[:, :, None], local.shape)
    c = np.broadcast_to(cols[:, None, :], local.shape)
    A = sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _symmetric(local):
    return 0.5 * (local + np.swapaxes(local, 1, 2))


def _vectorize(S) -> sp.csr_matrix:
    A = sp.kron(S, sp.identity(2, format="csr"), format="csr")
    A.sort_indices()
    return A


# --------------------------------------------------------------- tabulation

def _jxw(space: FESpace, rule):
    return space.geometry.det[:, None] * rule.weights[None, :]  # (C, Q)


def scalar_values(space: FESpace, rule) -> np.ndarray:
    """Scalar basis values at quadrature points, shape (Q, k)."""
    if space.kind is SpaceKind.P2_VECTOR:
        return p2_ref(rule.points)
    return rule.points.copy()


def scalar_gradients(space: FESpace, rule) -> np.ndarray:
    """Physical gradients of the scalar basis, shape (C, Q, k, 2)."""
    gb = space.geometry.grad_bary
    if space.kind is SpaceKind.P2_VECTOR:
        return np.einsum("qkl,cld->cqkd", p2_ref_dbary(rule.points), gb)
    return np.broadcast_to(gb[:, None], (gb.shape[0], len(rule.weights), 3, 2))


def rt_values(space: FESpace, rule) -> np.ndarray:
    """Piola-mapped RT1 basis values, shape (C, Q, 8, 2)."""
    geo = space.geometry
    ref = rt1_ref(rule.points)  # (Q, 8, 2)
    vals = np.einsum("cij,qkj->cqki", geo.J, ref) / geo.det[:, None, None, None]
    return vals * space.cell_signs[:, None, :, None]


def rt_divergences(space: FESpace, rule) -> np.ndarray:
    """Divergence of the RT1 basis, shape (C, Q, 8)."""
    geo = space.geometry
    ref = rt1_ref_div(rule.points)  # (Q, 8)
    return ref[None] * (space.cell_signs / geo.det[:, None])[:, None, :]


def eval_rt_field(w: Field, rule) -> np.ndarray:
    """Values of an RT1 field at the quadrature points of every cell, (C, Q, 2)."""
    sp_ = w.space
    coeffs = w.coeffs[sp_.cell_dofs]
    return np.einsum("cqkd,ck->cqd", rt_values(sp_, rule), coeffs)


def eval_p2_field(space: FESpace, coeffs: np.ndarray, rule) -> np.ndarray:
    """Values of a vector P2 field at quadrature points, (C, Q, 2)."""
    c = coeffs.reshape(-1, 2)[space.cell_dofs]
    return np.einsum("qk,ckd->cqd", p2_ref(rule.points), c)


def quadrature_points(space: FESpace, rule) -> np.ndarray:
    """Physical quadrature points, shape (C, Q, 2)."""
    mesh = space.mesh
    return np.einsum("qk,ckd->cqd", rule.points, mesh.vertices[mesh.cells])


# ----------------------------------------------------------------- operators

def assemble_mass(space: FESpace) -> sp.csr_matrix:
    """L2 Gram matrix of the basis of ``space``."""
    rule = quadrature_rule(MASS_DEGREE)
    jxw = _jxw(space, rule)
    dofs = space.cell_dofs
    if space.kind is SpaceKind.RT1:
        phi = rt_values(space, rule)
        local = _symmetric(np.einsum("cq,cqid,cqjd->cij", jxw, phi, phi))
        return _sparse(local, dofs, dofs, (space.dof_count,) * 2)
    phi = scalar_values(space, rule)
    local = _symmetric(np.einsum("cq,qi,qj->cij", jxw, phi, phi))
    if space.kind is SpaceKind.P2_VECTOR:
        n = space.dof_count // 2
        return _vectorize(_sparse(local, dofs, dofs, (n, n)))
    return _sparse(local, dofs, dofs, (space.dof_count,) * 2)


def assemble_stiffness(space: FESpace, nu: float = 1.0) -> sp.csr_matrix:
    """``nu * (grad u, grad v)`` on the vector P2 space."""
    if space.kind is not SpaceKind.P2_VECTOR:
        raise ValueError("stiffness is assembled on the vector P2 space")
    rule = quadrature_rule(MASS_DEGREE)
    g = scalar_gradients(space, rule)
    local = _symmetric(nu * np.einsum("cq,cqid,cqjd->cij", _jxw(space, rule), g, g))
    n = space.dof_count // 2
    return _vectorize(_sparse(local, space.cell_dofs, space.cell_dofs, (n, n)))


def assemble_divergence(vspace: FESpace, qspace: FESpace) -> sp.csr_matrix:
    """``B[i, j] = (q_i, div phi_j)`` for P1 pressures and vector P2 velocities."""
    if vspace.mesh is not qspace.mesh:
        raise ValueError("velocity and pressure spaces live on different meshes")
    rule = quadrature_rule(MASS_DEGREE)
    q = scalar_values(qspace, rule)  # (Q, 3)
    g = scalar_gradients(vspace, rule)  # (C, Q, 6, 2)
    local = np.einsum("cq,qi,cqjd->cijd", _jxw(vspace, rule), q, g).reshape(-1, 3, 12)
    return _sparse(local, qspace.cell_dofs, vspace.cell_to_dof,
                   (qspace.dof_count, vspace.dof_count))


def assemble_convection(w: Field, vspace: FESpace) -> sp.csr_matrix:
    """``N[i, j] = ((w . grad) phi_j, phi_i)`` for an RT1 advecting field ``w``.

    Convective form, not skew-symmetrized.
    """
    if w.space.kind is not SpaceKind.RT1:
        raise ValueError("advecting field must live in RT1")
    if w.space.mesh is not vspace.mesh:
        raise ValueError("advecting field and velocity space live on different meshes")
    rule = quadrature_rule(CONVECTION_DEGREE)
    wq = eval_rt_field(w, rule)
    g = scalar_gradients(vspace, rule)
    phi = scalar_values(vspace, rule)
    adv = np.einsum("cqd,cqjd->cqj", wq, g) * _jxw(vspace, rule)[:, :, None]
    local = np.einsum("qi,cqj->cij", phi, adv)
    n = vspace.dof_count // 2
    return _vectorize(_sparse(local, vspace.cell_dofs, vspace.cell_dofs, (n, n)))


def assemble_rt_p2_mass(rtspace: FESpace, vspace: FESpace) -> sp.csr_matrix:
    """Cross Gram matrix ``(phi_j, chi_i)`` with RT1 rows and vector P2 columns."""
    rule = quadrature_rule(MASS_DEGREE)
    chi = rt_values(rtspace, rule)  # (C, Q, 8, 2)
    phi = scalar_values(vspace, rule)  # (Q, 6)
    local = np.einsum("cq,cqid,qj->cijd", _jxw(vspace, rule), chi, phi).reshape(-1, 8, 12)
    return _sparse(local, rtspace.cell_dofs, vspace.cell_to_dof,
                   (rtspace.dof_count, vspace.dof_count))


def assemble_rt_divergence(rtspace: FESpace, dgspace: FESpace) -> sp.csr_matrix:
    """``D[k, l] = (mu_k, div chi_l)`` with DG-P1 rows and RT1 columns."""
    rule = quadrature_rule(MASS_DEGREE)
    mu = scalar_values(dgspace, rule)
    div = rt_divergences(rtspace, rule)
    local = np.einsum("cq,qk,cql->ckl", _jxw(rtspace, rule), mu, div)
    return _sparse(local, dgspace.cell_dofs, rtspace.cell_dofs,
                   (dgspace.dof_count, rtspace.dof_count))


def rt_divergence_coefficients(w: Field) -> np.ndarray:
    """DG-P1 (vertex-value) coefficients of ``div w``, shape (C, 3)."""
    sp_ = w.space
    ref = rt1_ref_div(np.eye(3))  # (3 vertices, 8)
    scale = sp_.cell_signs / sp_.geometry.det[:, None]
    return np.einsum("vk,ck->cv", ref, scale * w.coeffs[sp_.cell_dofs])


def _local_basis(space: FESpace, bary: np.ndarray) -> np.ndarray:
    """Scalar basis values (Q, k) for Lagrange kinds at barycentric points."""
    if space.kind is SpaceKind.P2_VECTOR:
        return p2_ref(bary)
    return bary


def _accumulate(space: FESpace, out, cells, jxw, vals, bary):
    """Add ``sum_q jxw * f(x_q) * phi(x_q)`` for per-cell point sets.

    ``jxw`` is (C, Q), ``vals`` a tuple of (C, Q) component arrays and
    ``bary`` either shared (Q, 3) or per cell (C, Q, 3).
    """
    dofs = space.cell_dofs[cells]
    if space.kind is SpaceKind.RT1:
        if bary.ndim == 2:
            phi = rt_values(space, _Points(bary))[cells]
        else:
            phi = np.stack([rt_values(space, _Points(b))[c] for c, b in zip(cells, bary)])
        fv = np.stack(vals, axis=-1)
        np.add.at(out, dofs, np.einsum("cq,cqd,cqid->ci", jxw, fv, phi))
        return
    phi = _local_basis(space, bary)
    sub = "qi" if bary.ndim == 2 else "cqi"
    if space.kind is SpaceKind.P2_VECTOR:
        for comp, fc in enumerate(vals):
            np.add.at(out, 2 * dofs + comp, np.einsum(f"cq,{sub}->ci", jxw * fc, phi))
        return
    np.add.at(out, dofs, np.einsum(f"cq,{sub}->ci", jxw * vals[0], phi))


class _Points:
    """Stand-in rule carrying barycentric points only (for basis tabulation)."""

    def __init__(self, points):
        self.points = points


def _evaluate(space: FESpace, f, xq, t, jxw):
    args = (xq[..., 0], xq[..., 1]) if t is None else (xq[..., 0], xq[..., 1], t)
    vals = f(*args)
    if space.kind in (SpaceKind.P2_VECTOR, SpaceKind.RT1):
        return tuple(np.broadcast_to(v, jxw.shape) for v in vals)
    return (np.broadcast_to(vals, jxw.shape),)


_CHILDREN = np.array([  # children of a triangle in terms of its vertices and midpoints
    [[1, 0, 0], [.5, .5, 0], [.5, 0, .5]],
    [[.5, .5, 0], [0, 1, 0], [0, .5, .5]],
    [[.5, 0, .5], [0, .5, .5], [0, 0, 1]],
    [[0, .5, .5], [.5, 0, .5], [.5, .5, 0]],
])


def _composite_points(corners, singular, rule, depth):
    """Quadrature on one cell, refined recursively towards ``singular``.

    ``corners`` are the physical vertices (3, 2).  Returns barycentric points
    (Q, 3) of the cell and weights relative to the cell's reference rule.
    """
    pts, wts = [], []
    active = [np.eye(3)]
    for level in range(depth + 1):
        nxt = []
        for S in active:
            kids = _CHILDREN @ S if level < depth else S[None]
            for K in kids:
                xk = K @ corners
                diam = max(np.linalg.norm(xk[i] - xk[j]) for i, j in ((0, 1), (1, 2), (2, 0)))
                near = np.min(np.linalg.norm(singular - xk.mean(0), axis=1)) < 1.5 * diam
                if near and level < depth:
                    nxt.append(K)
                else:
                    ratio = 4.0 ** -(level + (level < depth))
                    pts.append(rule.points @ K)
                    wts.append(rule.weights * ratio)
        active = nxt
    return np.concatenate(pts), np.concatenate(wts)


def assemble_load(space: FESpace, f, t: float | None = None,
                  degree: int = LOAD_DEGREE, singular_points=None,
                  depth: int = 40) -> np.ndarray:
    """``b[i] = (f, phi_i)`` for an analytic ``f(x, y)`` or ``f(x, y, t)``.

    Vector spaces expect ``f`` to return a pair ``(fx, fy)``.  Cells close to
    any of ``singular_points`` (integrable point singularities of ``f``) are
    integrated with a composite rule refined ``depth`` times towards them.
    """
    rule = quadrature_rule(degree)
    mesh = space.mesh
    cells = np.arange(mesh.n_cells)
    out = np.zeros(space.dof_count)
    special = np.zeros(mesh.n_cells, dtype=bool)
    if singular_points is not None:
        singular = np.atleast_2d(np.asarray(singular_points, dtype=float))
        corners = mesh.vertices[mesh.cells]
        centroids = corners.mean(axis=1)
        diam = np.max(np.linalg.norm(corners - np.roll(corners, 1, axis=1), axis=2), axis=1)
        dist = np.min(np.linalg.norm(centroids[:, None] - singular[None], axis=2), axis=1)
        special = dist < 1.5 * diam

    regular = cells[~special]
    xq = quadrature_points(space, rule)[regular]
    jxw = _jxw(space, rule)[regular]
    _accumulate(space, out, regular, jxw, _evaluate(space, f, xq, t, jxw), rule.points)

    det = space.geometry.det
    for c in cells[special]:
        corners = mesh.vertices[mesh.cells[c]]
        bary, w = _composite_points(corners, singular, rule, depth)
        xq = (bary @ corners)[None]
        jxw = (det[c] * w)[None]
        _accumulate(space, out, np.array([c]), jxw, _evaluate(space, f, xq, t, jxw), bary[None])
    return out


def assemble_curl_load(vspace: FESpace, qspace: FESpace, u: np.ndarray) -> np.ndarray:
    """``(d_x u_2 - d_y u_1, q_i)`` for a vector P2 field against P1."""
    rule = quadrature_rule(MASS_DEGREE)
    g = scalar_gradients(vspace, rule)  # (C, Q, 6, 2)
    c = u.reshape(-1, 2)[vspace.cell_dofs]  # (C, 6, 2)
    curl = (np.einsum("cqk,ck->cq", g[..., 0], c[..., 1])
            - np.einsum("cqk,ck->cq", g[..., 1], c[..., 0]))
    local = np.einsum("cq,qi->ci", _jxw(vspace, rule) * curl, rule.points)
    out = np.zeros(qspace.dof_count)
    np.add.at(out, qspace.cell_dofs, local)
    return out


def mean_vector(qspace: FESpace) -> np.ndarray:
    """``m[i] = integral of q_i``; ``m @ p`` is the integral of ``p``."""
    return assemble_load(qspace, lambda x, y: np.ones_like(x), degree=1)
