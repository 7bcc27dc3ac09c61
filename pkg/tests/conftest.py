import numpy as np
import pytest

from admmshape.geometry import circle
from admmshape.mesh import triangulate_annulus
from admmshape.problems import generate_synthetic_data


def annulus(h, r_in=0.5, r_out=1.0):
    return triangulate_annulus(circle(0, 0, r_out, h=h), circle(0, 0, r_in, h=h), h)


@pytest.fixture(scope="session")
def coarse_annulus():
    return annulus(0.08)


@pytest.fixture(scope="session")
def start_mesh():
    """Inversion mesh on the default start geometry C(0, 0.8)."""
    return annulus(0.04, r_in=0.8)


@pytest.fixture(scope="session")
def concentric_data():
    """Clean data for the true inclusion C(0, 0.5) from a fine forward solve."""
    return generate_synthetic_data(circle(0, 0, 0.5, h=0.01), circle(0, 0, 1, h=0.01), 1.0, 0.01)


def radius(pts):
    return np.linalg.norm(np.asarray(pts), axis=1)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, with the measured values."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" or "test_acceptance.py::test_criterion" not in rep.nodeid:
                continue
            props = dict(rep.user_properties)
            detail = ", ".join(f"{k}={v}" for k, v in props.items() if k != "criterion")
            lines.append((props.get("criterion", rep.nodeid), "PASS" if rep.passed else "FAIL", detail))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict, detail in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}  {detail}")
