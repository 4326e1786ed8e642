import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfpd import greens
from mfpd.errors import DomainError, SingularityError


def disk_point(max_radius=0.95):
    return st.tuples(st.floats(0, max_radius), st.floats(0, 2 * math.pi)).map(
        lambda p: np.array([p[0] * math.cos(p[1]), p[0] * math.sin(p[1])]))


@given(disk_point(), disk_point())
def test_green_is_symmetric(x, y):
    if np.linalg.norm(x - y) < 1e-6:
        return
    assert greens.green(x, y) == pytest.approx(greens.green(y, x), rel=1e-12, abs=1e-12)


@given(disk_point(), st.floats(0, 2 * math.pi))
def test_green_vanishes_on_the_circle(y, t):
    x = np.array([math.cos(t), math.sin(t)])
    # on |x| = 1 the regular part equals the singular part, so G = 0
    h = greens.regular_part(x, y)
    assert h == pytest.approx(math.log(np.linalg.norm(x - y)) / (2 * math.pi), abs=1e-12)


@given(disk_point(0.9))
def test_robin_is_the_diagonal_of_the_regular_part(x):
    assert greens.robin(x) == pytest.approx(greens.regular_part(x, x), abs=1e-13)


def test_regular_part_at_the_origin_is_zero():
    x = np.array([[0.3, -0.2], [0.0, 0.9]])
    assert np.allclose(greens.regular_part(x, np.zeros(2)), 0.0, atol=1e-15)


def test_errors():
    with pytest.raises(SingularityError):
        greens.green([0.1, 0.2], [0.1, 0.2])
    with pytest.raises(DomainError):
        greens.green([1.0, 0.0], [0.1, 0.2])
    with pytest.raises(DomainError):
        greens.robin([0.6, 0.8])
    with pytest.raises(ValueError):
        greens.green([0.1, 0.2, 0.3], [0.1, 0.2])


def _fd_laplacian(f, x, h):
    e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
    return (f(x + e1) + f(x - e1) + f(x + e2) + f(x - e2) - 4 * f(x)) / h**2


def test_regular_part_is_harmonic_with_second_order_fd():
    y = np.array([0.5, -0.3])
    xs = [np.array([0.2, 0.1]), np.array([-0.6, 0.4]), np.array([0.1, -0.85])]
    hs = np.array([0.04, 0.02, 0.01, 0.005])
    for x in xs:
        err = [abs(_fd_laplacian(lambda p: greens.regular_part(p, y), x, h)) for h in hs]
        order = np.polyfit(np.log(hs), np.log(err), 1)[0]
        assert order >= 1.9


def test_green_represents_the_dirichlet_solution_on_a_512_grid():
    # u(x) = int G(x, y) f(y) dy with f = 1 and f = 8 - 16|y|^2 has closed forms
    # (1 - |x|^2)/4 and (1 - |x|^2)^2; midpoint rule over the 512^2 cells of the disk
    n = 512
    h = 2.0 / n
    c = -1 + h * (np.arange(n) + 0.5)
    X, Y = np.meshgrid(c, c, indexing="ij")
    inside = X**2 + Y**2 < 1
    pts = np.stack([X[inside], Y[inside]], 1)
    r2 = np.sum(pts**2, 1)
    for x in (np.array([0.1, 0.2]), np.array([-0.45, 0.3]), np.array([0.0, -0.6])):
        d = np.linalg.norm(pts - x, axis=1)
        keep = d > 1e-9
        G = greens.green(np.broadcast_to(x, pts[keep].shape), pts[keep])
        for f, exact in ((np.ones_like(r2), (1 - x @ x) / 4), (8 - 16 * r2, (1 - x @ x) ** 2)):
            approx = h * h * np.sum(G * f[keep])
            assert approx == pytest.approx(exact, rel=2e-3, abs=2e-4)


def test_green_matrix_layout():
    pts = np.array([[0.4, 0.0], [-0.4, 0.0], [0.0, 0.5]])
    A = greens.green_matrix(pts)
    assert np.allclose(A, A.T)
    assert A[0, 0] == pytest.approx(math.log(0.84) / (2 * math.pi))
    assert A[0, 1] == pytest.approx(math.log(1.3456 / 0.64) / (4 * math.pi))
