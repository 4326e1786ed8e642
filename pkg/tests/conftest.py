import numpy as np
import pytest

from mfpd.ansatz import BlowupConfig, Hole, compute_scales
from mfpd.mesh import GradingSpec

# filled by the acceptance suite, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


COARSE = GradingSpec(target_h_far=0.08, n_theta=32)


@pytest.fixture(scope="session")
def one_hole():
    return BlowupConfig([Hole((0.2, 0.1), 3.0, True)], tau=1.0)


@pytest.fixture(scope="session")
def two_holes_odd():
    """Two holes with odd alphas, so the linearized operator has no angular kernel."""
    return BlowupConfig([Hole((0.35, 0.0), 3.0, True), Hole((-0.35, 0.1), 5.0, False)], tau=2.0)


@pytest.fixture(scope="session")
def coarse():
    return COARSE


def scales_for(cfg, eps):
    return compute_scales(cfg, eps)


def unit(rng, n):
    d = rng.standard_normal(n)
    return d / np.max(np.abs(d))
