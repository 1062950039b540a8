"""Taylor-Hood / IMEX Lobatto IIIC solver for 2D incompressible Navier-Stokes flow.

Submodules
----------
mesh         structured rectangle triangulations and nested refinement
spaces       P1, vector P2, RT1 and DG-P1 spaces, quadrature rules
assembly     sparse operators and load vectors
linsolve     sparse direct solves with a residual contract
projections  discrete Leray and divergence-free RT1 projections
timegrid     graded time grids, the Lobatto IIIC tableau, extrapolation
stepper      the coupled two-stage time step and full runs
harness      initial data, convergence studies and the command line
"""

from .mesh import Mesh, build_rect_mesh, locate_point, refine_uniform
from .projections import ProjectionContext
from .spaces import Field, SpaceKind, build_space
from .stepper import RunConfig, SolverState, run, step
from .timegrid import TimeGrid, build_graded_grid, lobatto_iiic

__version__ = "0.1.0"

__all__ = ["Field", "Mesh", "ProjectionContext", "RunConfig", "SolverState", "SpaceKind",
           "TimeGrid", "build_graded_grid", "build_rect_mesh", "build_space", "lobatto_iiic",
           "locate_point", "refine_uniform", "run", "step"]
