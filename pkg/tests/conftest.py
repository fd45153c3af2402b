import numpy as np
import pytest

from slabscan.geometry import Disc, SlabGeometry, polygonize_cavity, snap_halfwidth
from slabscan.probe import GammaField
from slabscan.solver import Scene

_acceptance_results = []


def record_acceptance(number, description, passed, detail=""):
    _acceptance_results.append((number, description, passed, detail))
    line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}  {description}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert passed, f"acceptance criterion {number} failed: {description} {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number, desc, passed, detail in sorted(_acceptance_results):
        status = "PASS" if passed else "FAIL"
        line = f"ACCEPTANCE {number:2d} {status}  {desc}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def a1_scene():
    """Scene A1 at the resolution the theorem-rate checks use."""
    edge = 0.03
    slab = SlabGeometry(0.0, 1.0, snap_halfwidth(0.66 + 0.066 + 2.0, edge))
    poly = polygonize_cavity(Disc((0.0, 0.5), 0.2), 128)
    return Scene(slab, poly, GammaField(), edge)


@pytest.fixture(scope="session")
def small_scene():
    """Coarse disc scene for fast unit-level pipeline tests."""
    edge = 0.05
    slab = SlabGeometry(0.0, 1.0, snap_halfwidth(1.5, edge))
    poly = polygonize_cavity(Disc((0.0, 0.5), 0.2), 64)
    return Scene(slab, poly, GammaField(), edge)


@pytest.fixture(scope="session")
def empty_scene():
    edge = 0.05
    slab = SlabGeometry(0.0, 1.0, snap_halfwidth(1.5, edge))
    return Scene(slab, None, GammaField(), edge)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
