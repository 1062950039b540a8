import numpy as np
import pytest

from gradedns.mesh import build_rect_mesh
from gradedns.projections import ProjectionContext

# criterion number -> summary line, filled by the acceptance module
ACCEPTANCE_LINES = {}


@pytest.fixture
def unit_mesh():
    """Two-cell mesh of the unit square."""
    return build_rect_mesh(0.0, 1.0, 0.0, 1.0, 1, 1)


@pytest.fixture(scope="session")
def tiny_ctx():
    """Spaces and projections on the 2x2 unit-square mesh."""
    return ProjectionContext(build_rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 2))


@pytest.fixture(scope="session")
def small_ctx():
    return ProjectionContext(build_rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
