import numpy as np
import pytest

from midpoint.mesh import build_mesh

CUBE_V = [
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
]
CUBE_F = [
    (0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
    (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7),
]


@pytest.fixture
def cube():
    return build_mesh(CUBE_V, CUBE_F)


def pyramid_mesh(k: int, height: float = 1.0):
    """Closed bipyramid-like mesh: a k-gon base cap and a cone of triangles."""
    ang = 2 * np.pi * np.arange(k) / k
    verts = [(np.cos(a), np.sin(a), 0.0) for a in ang] + [(0.0, 0.0, height)]
    faces = [tuple(range(k - 1, -1, -1))]
    faces += [(i, (i + 1) % k, k) for i in range(k)]
    return build_mesh(verts, faces)


# acceptance results are collected here and echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
