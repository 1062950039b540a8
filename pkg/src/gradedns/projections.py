"""Discrete Leray projection and the divergence-free RT1 projection.

Both are L2-orthogonal projections realised as saddle-point systems whose
factorizations are built once per mesh.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import assembly
from .linsolve import DEFAULT_TOL, Factorization
from .mesh import Mesh
from .spaces import Field, SpaceKind, build_space


class ProjectionContext:
    """Spaces, operators and cached factorizations for one mesh."""

    def __init__(self, mesh: Mesh, tol: float = DEFAULT_TOL):
        self.mesh = mesh
        self.tol = tol
        self.vspace = build_space(mesh, SpaceKind.P2_VECTOR)
        self.qspace = build_space(mesh, SpaceKind.P1)
        self.rtspace = build_space(mesh, SpaceKind.RT1)
        self.dgspace = build_space(mesh, SpaceKind.DG_P1)
        self.free = self.vspace.free_dofs
        self.rt_free = self.rtspace.free_dofs

    # -- operators on the Taylor-Hood pair
    @cached_property
    def mass(self) -> sp.csr_matrix:
        return assembly.assemble_mass(self.vspace)

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Unit-viscosity stiffness ``(grad u, grad v)``."""
        return assembly.assemble_stiffness(self.vspace)

    @cached_property
    def divergence(self) -> sp.csr_matrix:
        return assembly.assemble_divergence(self.vspace, self.qspace)

    @cached_property
    def pressure_mean(self) -> np.ndarray:
        return assembly.mean_vector(self.qspace)

    @cached_property
    def pressure_mass(self) -> sp.csr_matrix:
        return assembly.assemble_mass(self.qspace)

    # -- RT1 operators
    @cached_property
    def rt_mass(self) -> sp.csr_matrix:
        return assembly.assemble_mass(self.rtspace)

    @cached_property
    def rt_p2_mass(self) -> sp.csr_matrix:
        return assembly.assemble_rt_p2_mass(self.rtspace, self.vspace)

    @cached_property
    def rt_divergence(self) -> sp.csr_matrix:
        return assembly.assemble_rt_divergence(self.rtspace, self.dgspace)

    # -- factorizations
    @cached_property
    def _leray(self) -> Factorization:
        f = self.free
        M = self.mass[f][:, f]
        B = self.divergence[:, f]
        m = sp.csr_matrix(self.pressure_mean[:, None])
        A = sp.bmat([[M, -B.T, None],
                     [-B, None, -m],
                     [None, -m.T, None]], format="csc")
        return Factorization(A, self.tol)

    @cached_property
    def _rt(self) -> Factorization:
        f = self.rt_free
        Mrt = self.rt_mass[f][:, f]
        # every DG-P1 basis sums to one per cell, so dropping one multiplier
        # removes the constant mode that is implied by the zero normal trace
        D = self.rt_divergence[1:, f]
        A = sp.bmat([[Mrt, D.T], [D, None]], format="csc")
        return Factorization(A, self.tol, ordering="colamd")

    # -- projections
    def leray_project(self, load: np.ndarray) -> tuple[Field, Field]:
        """Project a P2-dual load onto the discretely divergence-free subspace.

        Returns the velocity ``u`` and the zero-mean multiplier ``lam`` with
        ``M u + B^T lam = load`` and ``B u = 0`` on the free dofs.
        """
        load = np.asarray(load, dtype=float)
        if load.shape != (self.vspace.dof_count,):
            raise ValueError(f"load length {load.shape} does not match the velocity space")
        nf, nq = len(self.free), self.qspace.dof_count
        rhs = np.concatenate([load[self.free], np.zeros(nq + 1)])
        x = self._leray.solve(rhs)
        u = np.zeros(self.vspace.dof_count)
        u[self.free] = x[:nf]
        return Field(self.vspace, u), Field(self.qspace, -x[nf:nf + nq])

    def rt_project(self, v: Field | np.ndarray) -> Field:
        """L2 projection onto divergence-free RT1 fields with zero normal trace.

        ``v`` may be a vector P2 field (coefficients or :class:`Field`) or an
        RT1 field.
        """
        if isinstance(v, Field):
            if v.space.mesh is not self.mesh:
                raise ValueError("field lives on a different mesh")
            kind, coeffs = v.space.kind, v.coeffs
        else:
            kind, coeffs = SpaceKind.P2_VECTOR, np.asarray(v, dtype=float)
        if kind is SpaceKind.P2_VECTOR:
            load = self.rt_p2_mass @ coeffs
        elif kind is SpaceKind.RT1:
            load = self.rt_mass @ coeffs
        else:
            raise ValueError(f"cannot RT-project a {kind.value} field")
        nf = len(self.rt_free)
        rhs = np.concatenate([load[self.rt_free], np.zeros(self.dgspace.dof_count - 1)])
        x = self._rt.solve(rhs)
        w = np.zeros(self.rtspace.dof_count)
        w[self.rt_free] = x[:nf]
        return Field(self.rtspace, w)

    # -- norms
    def l2_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(u @ (self.mass @ u), 0.0)))

    def h1_seminorm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(u @ (self.stiffness @ u), 0.0)))

    def rt_l2_norm(self, w: np.ndarray) -> float:
        return float(np.sqrt(max(w @ (self.rt_mass @ w), 0.0)))

    def max_divergence_coefficient(self, w: Field) -> float:
        """Largest DG-P1 coefficient of ``div w`` relative to ``||w||``."""
        norm = self.rt_l2_norm(w.coeffs)
        if norm == 0.0:
            return 0.0
        return float(np.abs(assembly.rt_divergence_coefficients(w)).max() / norm)


def leray_project(ctx: ProjectionContext, load) -> tuple[Field, Field]:
    return ctx.leray_project(load)


def rt_project(ctx: ProjectionContext, v) -> Field:
    return ctx.rt_project(v)
