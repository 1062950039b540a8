"""Error norms, EOC tables and the temporal/spatial convergence studies."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import assembly
from ..mesh import Mesh, barycentric, build_rect_mesh, refine_uniform
from ..projections import ProjectionContext
from ..spaces import Field, SpaceKind, build_space, quadrature_rule
from ..stepper import RunConfig, StepDiagnostics, run
from .data import INITIAL_DATA, ManufacturedStokes

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ errors

def prolongate(field: Field, fine: Mesh) -> Field:
    """Exact P2 prolongation of ``field`` to a nested refinement ``fine``."""
    coarse_space = field.space
    if coarse_space.kind is not SpaceKind.P2_VECTOR:
        raise ValueError("prolongation is implemented for vector P2 fields")
    coarse = coarse_space.mesh
    if fine is coarse:
        return field
    if not fine.is_refinement_of(coarse):
        raise ValueError("target mesh is not a nested refinement of the field's mesh")
    fine_space = build_space(fine, SpaceKind.P2_VECTOR)
    parents = fine.ancestor_cells(coarse)
    corners = fine.vertices[fine.cells]  # (C, 3, 2)
    mids = 0.5 * (corners[:, [1, 2, 0]] + corners[:, [2, 0, 1]])  # opposite vertex k
    nodes = np.concatenate([corners, mids], axis=1)  # (C, 6, 2), local P2 node order
    cells = np.repeat(parents, 6)
    bary = barycentric(coarse, cells, nodes.reshape(-1, 2))
    values = field.evaluate(cells, bary)
    coeffs = np.zeros((fine_space.dof_count // 2, 2))
    coeffs[fine_space.cell_dofs.ravel()] = values
    return Field(fine_space, coeffs.ravel(), field.time)


def error_l2(a: Field, b: Field | None = None, ctx: ProjectionContext | None = None) -> float:
    """``||a - b||_{L2}`` on the finer of the two (nested) meshes.

    ``b = None`` gives the norm of ``a``.  ``ctx`` may supply a cached mass
    matrix for the common mesh.
    """
    if b is not None and b.space.mesh is not a.space.mesh:
        ma, mb = a.space.mesh, b.space.mesh
        if ma.is_refinement_of(mb):
            b = prolongate(b, ma)
        elif mb.is_refinement_of(ma):
            a = prolongate(a, mb)
        else:
            raise ValueError("fields live on non-nested meshes")
    d = a.coeffs if b is None else a.coeffs - b.coeffs
    if ctx is not None and ctx.mesh is a.space.mesh:
        M = ctx.mass
    else:
        M = assembly.assemble_mass(a.space)
    return float(np.sqrt(max(d @ (M @ d), 0.0)))


def error_l2_exact(a: Field, f, t: float | None = None, degree: int = 6) -> float:
    """``||a - f||_{L2}`` for an analytic ``f``, by quadrature on each cell."""
    space = a.space
    rule = quadrature_rule(degree)
    xq = assembly.quadrature_points(space, rule)
    args = (xq[..., 0], xq[..., 1]) if t is None else (xq[..., 0], xq[..., 1], t)
    fx, fy = f(*args)
    uh = assembly.eval_p2_field(space, a.coeffs, rule)
    jxw = space.geometry.det[:, None] * rule.weights[None, :]
    err = (uh[..., 0] - fx) ** 2 + (uh[..., 1] - fy) ** 2
    return float(np.sqrt(np.sum(jxw * err)))


# -------------------------------------------------------------- EOC tables

@dataclass
class EOCTable:
    """Errors against resolutions with observed convergence rates.

    ``resolutions`` are stepsizes (time) or mesh sizes (space).
    """

    axis: str
    norm: str
    resolutions: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    histories: dict = field(default_factory=dict, compare=False, repr=False)
    reference: Field | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.axis not in ("time", "space"):
            raise ValueError(f"axis must be 'time' or 'space', got {self.axis!r}")
        if len(self.resolutions) != len(self.errors):
            raise ValueError("resolutions and errors differ in length")

    def add(self, resolution: float, error: float):
        self.resolutions.append(float(resolution))
        self.errors.append(float(error))

    @property
    def rates(self) -> list:
        out = [None]
        for i in range(len(self.errors) - 1):
            e0, e1 = self.errors[i], self.errors[i + 1]
            r0, r1 = self.resolutions[i], self.resolutions[i + 1]
            if e0 > 0 and e1 > 0 and r0 != r1:
                out.append(math.log(e0 / e1) / math.log(r0 / r1))
            else:
                out.append(float("nan"))
        return out

    @property
    def rows(self) -> list:
        return list(zip(self.resolutions, self.errors, self.rates))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["resolution", "error", "rate"])
        for r, e, p in self.rows:
            w.writerow([repr(r), repr(e), "" if p is None else repr(p)])
        text = buf.getvalue()
        if path is not None:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            footer = f"# axis={self.axis} norm={self.norm}\n"
            path.write_text(text + footer)
        return text

    @classmethod
    def from_csv(cls, source, axis: str | None = None, norm: str | None = None) -> EOCTable:
        """Parse a table written by :meth:`to_csv` (a path or the CSV text)."""
        text = Path(source).read_text() if isinstance(source, Path) else str(source)
        if "\n" not in text and Path(text).exists():
            text = Path(text).read_text()
        lines = text.splitlines()
        meta = {}
        body = []
        for line in lines:
            if line.startswith("#"):
                meta.update(kv.split("=", 1) for kv in line[1:].split())
            elif line.strip():
                body.append(line)
        reader = csv.reader(body)
        header = next(reader)
        if header != ["resolution", "error", "rate"]:
            raise ValueError(f"unexpected CSV header {header}")
        table = cls(axis or meta.get("axis", "time"), norm or meta.get("norm", "L2"))
        for row in reader:
            table.add(float(row[0]), float(row[1]))
        return table


# ------------------------------------------------------------- experiments

def _as_tuple(v):
    if v is None:
        return ()
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return (v,)


@dataclass
class ExperimentConfig:
    """Parameters of a run or a convergence study.

    ``mesh_n`` and ``tau`` may be single values (a run) or sequences (the
    study axis).  The spatial reference mesh is the finest study mesh refined
    ``ref_refines`` times; the temporal reference uses ``ref_tau``.
    """

    domain: tuple = (-np.pi, np.pi, -np.pi, np.pi)
    mesh_n: int | tuple = 16
    nu: float = 0.1
    T: float = 0.1
    tau: float | tuple = 1 / 32
    alpha: float = 0.76
    init: str = "vortex"
    gamma: float = 2 * np.pi
    eps: float = 0.1
    ref_tau: float | None = None
    ref_refines: int = 1
    ref_exact: bool = False
    convection: bool = True
    out_dir: str | None = None
    snapshots: tuple = ()

    def __post_init__(self):
        self.domain = tuple(float(v) for v in self.domain)
        if len(self.domain) != 4:
            raise ValueError("domain needs (xmin, xmax, ymin, ymax)")
        xmin, xmax, ymin, ymax = self.domain
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"degenerate domain {self.domain}")
        for name in ("nu", "T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if any(t <= 0 for t in self.taus):
            raise ValueError("stepsizes must be positive")
        if any(int(n) != n or n < 1 for n in self.meshes):
            raise ValueError("mesh resolutions must be positive integers")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.init not in INITIAL_DATA and self.init != "manufactured":
            raise ValueError(f"unknown initial datum {self.init!r}")
        if self.ref_tau is not None and not self.ref_tau > 0:
            raise ValueError("ref_tau must be positive")
        if self.ref_refines < 0:
            raise ValueError("ref_refines must be non-negative")

    @property
    def taus(self) -> tuple:
        return _as_tuple(self.tau)

    @property
    def meshes(self) -> tuple:
        return _as_tuple(self.mesh_n)

    # -- initial data and forcing
    @property
    def manufactured(self) -> ManufacturedStokes | None:
        if self.init != "manufactured":
            return None
        return ManufacturedStokes(self.domain, self.nu)

    def datum(self):
        if self.init == "vortex":
            return INITIAL_DATA["vortex"](self.gamma, self.eps)
        if self.init == "shear":
            return INITIAL_DATA["shear"]()
        return self.manufactured.initial

    def forcing(self):
        m = self.manufactured
        return None if m is None else m.forcing

    def uses_convection(self) -> bool:
        return self.convection and self.init != "manufactured"

    # -- validation per study
    def validate_time(self):
        if len(self.taus) < 2:
            raise ValueError("a temporal study needs at least two stepsizes")
        if len(self.meshes) != 1:
            raise ValueError("a temporal study runs on a single mesh")
        if self.ref_tau is None:
            raise ValueError("a temporal study needs ref.tau")
        if min(self.taus) < 4 * self.ref_tau:
            raise ValueError(f"reference stepsize {self.ref_tau} is not 4x finer than "
                             f"the smallest study stepsize {min(self.taus)}")

    def validate_space(self):
        ns = sorted(self.meshes)
        if len(ns) < 2:
            raise ValueError("a spatial study needs at least two meshes")
        if len(self.taus) != 1:
            raise ValueError("a spatial study uses a single stepsize")
        for n in ns:
            ratio = n / ns[0]
            if ratio != 2 ** round(math.log2(ratio)):
                raise ValueError(f"mesh {n} is not a nested refinement of mesh {ns[0]}")
        if len(set(ns)) != len(ns):
            raise ValueError("duplicate mesh resolutions")
        if not self.ref_exact and self.ref_refines < 1:
            raise ValueError("the reference mesh must be strictly finer than every study mesh")

    def mesh(self, n: int | None = None) -> Mesh:
        n = self.meshes[0] if n is None else n
        return build_rect_mesh(*self.domain, int(n), int(n))

    def run_config(self, mesh: Mesh, tau: float, ctx: ProjectionContext | None = None,
                   **kw) -> RunConfig:
        return RunConfig(mesh=mesh, nu=self.nu, T=self.T, tau=tau, alpha=self.alpha,
                         initial=self.datum(), forcing=self.forcing(),
                         convection=self.uses_convection(), ctx=ctx, **kw)


@dataclass
class RunResult:
    velocity: Field
    history: list[StepDiagnostics]
    ctx: ProjectionContext


def run_experiment(config: ExperimentConfig, mesh: Mesh | None = None, tau: float | None = None,
                   ctx: ProjectionContext | None = None, **kw) -> RunResult:
    mesh = config.mesh() if mesh is None else mesh
    tau = config.taus[0] if tau is None else tau
    rc = config.run_config(mesh, tau, ctx, **kw)
    state, history = run(rc)
    u = rc.context()
    return RunResult(Field(u.vspace, state.u, state.t), history, u)


def convergence_time(config: ExperimentConfig) -> EOCTable:
    """Final-time L2 errors against a fine-stepsize reference on one mesh."""
    config.validate_time()
    mesh = config.mesh()
    ctx = ProjectionContext(mesh)
    ref = run_experiment(config, mesh, config.ref_tau, ctx)
    table = EOCTable("time", "L2")
    table.histories[config.ref_tau] = ref.history
    table.reference = ref.velocity
    for tau in sorted(config.taus, reverse=True):
        res = run_experiment(config, mesh, tau, ctx)
        table.add(tau, error_l2(res.velocity, ref.velocity, ctx))
        table.histories[tau] = res.history
        log.info("tau=%g error=%.6e", tau, table.errors[-1])
    return table


def convergence_space(config: ExperimentConfig) -> EOCTable:
    """Final-time L2 errors of a nested mesh family.

    Errors are taken against the finest mesh refined ``ref_refines`` times, or
    against the exact solution when ``ref_exact`` is set (manufactured data).
    """
    config.validate_space()
    ns = sorted(config.meshes)
    meshes = {ns[0]: config.mesh(ns[0])}
    m = meshes[ns[0]]
    k = ns[0]
    while k < ns[-1]:
        m = refine_uniform(m)
        k *= 2
        meshes[k] = m
    tau = config.taus[0]
    table = EOCTable("space", "L2")
    exact = None
    if config.ref_exact:
        if config.manufactured is None:
            raise ValueError("ref.exact requires a datum with a known solution")
        exact = config.manufactured.velocity
    else:
        ref_mesh = meshes[ns[-1]]
        for _ in range(config.ref_refines):
            ref_mesh = refine_uniform(ref_mesh)
        ref = run_experiment(config, ref_mesh, tau)
        table.histories["reference"] = ref.history
        table.reference = ref.velocity
    for n in ns:
        res = run_experiment(config, meshes[n], tau)
        if exact is not None:
            err = error_l2_exact(res.velocity, exact, res.velocity.time)
        else:
            err = error_l2(prolongate(res.velocity, ref.velocity.space.mesh), ref.velocity, ref.ctx)
        table.add(meshes[n].h_max, err)
        table.histories[n] = res.history
        log.info("n=%d h=%g error=%.6e", n, meshes[n].h_max, err)
    return table


def fractional_norm_surrogate(ctx: ProjectionContext, u: np.ndarray, s: float) -> float:
    """``||u||_{L2}^{1-s} |u|_{H1}^s``, the interpolation bound for ``||u||_{H^s}``."""
    return ctx.l2_norm(u) ** (1 - s) * ctx.h1_seminorm(u) ** s


def eoc(resolutions, errors) -> list:
    """Observed rates between consecutive entries (first entry ``None``)."""
    return EOCTable("time", "L2", list(resolutions), list(errors)).rates


__all__ = ["EOCTable", "ExperimentConfig", "RunResult", "convergence_space", "convergence_time",
           "eoc", "error_l2", "error_l2_exact", "fractional_norm_surrogate", "prolongate",
           "run_experiment"]
