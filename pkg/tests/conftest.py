import numpy as np
import pytest

from ims.mesh.core import TriangleMesh
from ims.mesh.io import normalize
from ims.shapes import deform, fibonacci_sphere, icosphere

_REPORT = []


def record(criterion, ok, detail=""):
    """One acceptance line, printed at the end of the session."""
    line = "criterion %2d: %s  %s" % (criterion, "PASS" if ok else "FAIL", detail)
    _REPORT.append((criterion, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_REPORT):
            terminalreporter.write_line(line)


@pytest.fixture
def sphere():
    return TriangleMesh(*icosphere(2))


@pytest.fixture
def blob():
    V, F = fibonacci_sphere(120)
    return normalize(TriangleMesh(deform(V, (1.2, 1.0, 0.85), 0.08, 3, 1), F))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def small_pair(na=20, nb=30, seed=0):
    """Two small genus-zero meshes with the requested vertex counts."""
    Va, Fa = fibonacci_sphere(na)
    Vb, Fb = fibonacci_sphere(nb)
    A = normalize(TriangleMesh(deform(Va, (1.1, 1.0, 0.9), 0.05, 2, seed), Fa))
    B = normalize(TriangleMesh(deform(Vb, (0.9, 1.0, 1.2), 0.05, 2, seed + 1), Fb))
    return A, B


class SmallConfig:
    """Minimal stand-in for the pipeline's run configuration."""

    sigma_a = sigma_b = 1.0
    random_init = False
    seed = 0
    init_map = None

    def __init__(self, schedule=(100.0,), **kw):
        self.schedule = schedule
        self.kw = kw

    def solver_config(self):
        from ims.solve import SolverConfig
        return SolverConfig(schedule=self.schedule, **self.kw)


@pytest.fixture(scope="session")
def solved_pair():
    """A converged section for two ~150-vertex blobs."""
    from ims.pipeline import prepare_surface, solve_surfaces

    A, B = small_pair(150, 180, seed=0)
    return solve_surfaces(prepare_surface(A), prepare_surface(B), SmallConfig())
