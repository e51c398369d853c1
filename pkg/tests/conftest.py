import numpy as np
import pytest

from klshell.geometry import MultiPatchSurface
from klshell.splines import KnotVector, NurbsPatch, TensorSpace, open_knot_vector


def flat_patch(lx: float = 1.0, ly: float = 1.0, degree: int = 1, n_el: int = 1) -> NurbsPatch:
    """Rectangle [0,lx]x[0,ly] in the plane z=0 with linear parametrization."""
    kv = open_knot_vector(degree, n_el)
    g = kv.greville()
    pts = np.array([[lx * u, ly * v, 0.0] for v in g for u in g])
    return NurbsPatch(TensorSpace(kv, kv), pts)


def flat_surface(lx: float = 1.0, ly: float = 1.0) -> MultiPatchSurface:
    return MultiPatchSurface.detect([flat_patch(lx, ly)])


def quarter_arc() -> NurbsPatch:
    """Rational quarter circle of radius 1 in the x-y plane, extruded along z."""
    ku = KnotVector(2, (0, 0, 0, 1, 1, 1))
    kv = KnotVector(1, (0, 0, 1, 1))
    arc = [(1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    w = [1.0, np.sqrt(0.5), 1.0]
    pts, ws = [], []
    for z in (0.0, 1.0):
        for (x, y), wi in zip(arc, w):
            pts.append([x, y, z])
            ws.append(wi)
    return NurbsPatch(TensorSpace(ku, kv), np.array(pts), np.array(ws))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
