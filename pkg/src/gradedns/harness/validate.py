"""Quick invariant suite on a tiny mesh (the CLI ``validate`` command)."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .. import assembly
from ..mesh import build_rect_mesh
from ..projections import ProjectionContext
from ..spaces import quadrature_rule
from ..stepper import SolverState, step
from ..timegrid import MAX_GROWTH, build_graded_grid, lobatto_iiic

GRID_ALPHAS = (0.0, 0.3, 0.5, 0.76, 0.9)
GRID_TAUS = tuple(2.0 ** -k for k in range(3, 9))


@dataclass
class Check:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail}"


def random_velocity(ctx: ProjectionContext, rng) -> np.ndarray:
    """Random P2 coefficients with zero boundary dofs."""
    u = np.zeros(ctx.vspace.dof_count)
    u[ctx.free] = rng.standard_normal(len(ctx.free))
    return u


def random_solenoidal(ctx: ProjectionContext, rng) -> np.ndarray:
    """Random discretely divergence-free velocity (Leray projection of noise)."""
    u = random_velocity(ctx, rng)
    return ctx.leray_project(ctx.mass @ u)[0].coeffs


def check_mesh(mesh) -> Check:
    V, E, C = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    euler = V - E + C == 1
    areas = bool(np.all(mesh.signed_areas > 0))
    interior = mesh.edge_cells[:, 1] >= 0
    adjacency = bool(np.all(interior != mesh.boundary_edge_flags))
    total = abs(mesh.signed_areas.sum() - mesh.area)
    ok = euler and areas and adjacency and total < 1e-13 * mesh.area
    return Check("mesh", ok, f"V-E+C={V - E + C}, min angle {mesh.min_angle():.1f} deg")


def check_quadrature() -> Check:
    worst = 0.0
    for degree in range(1, 7):
        rule = quadrature_rule(degree)
        x, y = rule.points[:, 1], rule.points[:, 2]
        for i in range(degree + 1):
            for j in range(degree + 1 - i):
                exact = factorial(i) * factorial(j) / factorial(i + j + 2)
                worst = max(worst, abs(rule.weights @ (x ** i * y ** j) - exact))
    return Check("quadrature", worst < 1e-14, f"max monomial defect {worst:.1e}")


def check_projections(ctx: ProjectionContext, rng, samples: int = 20) -> list[Check]:
    div = skew = idem = 0.0
    for _ in range(samples):
        w = ctx.rt_project(random_velocity(ctx, rng))
        div = max(div, ctx.max_divergence_coefficient(w))
        N = assembly.assemble_convection(w, ctx.vspace)
        u = random_velocity(ctx, rng)
        skew = max(skew, abs(u @ (N @ u)) / (ctx.rt_l2_norm(w.coeffs) * ctx.h1_seminorm(u) ** 2))
        v = random_solenoidal(ctx, rng)
        vv = ctx.leray_project(ctx.mass @ v)[0].coeffs
        idem = max(idem, ctx.l2_norm(vv - v) / ctx.l2_norm(v))
    return [Check("rt divergence", div <= 1e-11, f"max relative coefficient {div:.1e}"),
            Check("convection skew", skew <= 1e-11, f"max scaled |u'N(w)u| {skew:.1e}"),
            Check("leray idempotence", idem <= 1e-10, f"max relative change {idem:.1e}")]


def check_tableau() -> Check:
    tab = lobatto_iiic()
    eig = np.linalg.eigvalsh(tab.algebraic_stability_matrix())
    ok = tab.stiffly_accurate and eig.min() > -1e-15 and np.allclose(tab.a.sum(1), tab.c)
    return Check("tableau", bool(ok), f"stability matrix eigenvalues {np.round(eig, 15)}")


def check_grids(T: float = 1.0) -> Check:
    worst_ratio, worst_count = 0.0, 0.0
    for alpha in GRID_ALPHAS:
        for tau in GRID_TAUS:
            g = build_graded_grid(T, tau, alpha)
            steps = g.steps[:-1]
            if len(steps) > 1:
                r = steps[1:] / steps[:-1]
                worst_ratio = max(worst_ratio, r.max(), (1 / r).max())
            worst_count = max(worst_count, g.n_steps * tau / T)
    ok = worst_ratio <= 3 and worst_count <= 4
    return Check("time grids", ok, f"max step ratio {worst_ratio:.3f} (cap {MAX_GROWTH}), "
                                   f"max N tau/T {worst_count:.3f}")


def check_steps(ctx: ProjectionContext, rng, nu: float = 0.1, steps: int = 3) -> Check:
    u0 = random_solenoidal(ctx, rng)
    grid = build_graded_grid(0.1, 0.04, 0.5)
    state = SolverState.initial(ctx, u0)
    tab = lobatto_iiic()
    try:
        for _ in range(min(steps, grid.n_steps)):
            step(state, grid, tab, ctx, nu, check=True)
    except Exception as exc:  # reported, not raised
        return Check("time steps", False, str(exc))
    worst = max(d.energy_defect for d in state.history) / state.energy[0]
    return Check("time steps", True, f"{state.n} checked steps, max energy defect {worst:.1e}")


def run_suite(n: int = 2, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    mesh = build_rect_mesh(0.0, 1.0, 0.0, 1.0, n, n)
    ctx = ProjectionContext(mesh)
    return [check_mesh(mesh), check_quadrature(), *check_projections(ctx, rng),
            check_tableau(), check_grids(), check_steps(ctx, rng)]
