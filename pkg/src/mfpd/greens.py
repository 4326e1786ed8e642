"""Green function of -Laplace on the unit disk with homogeneous Dirichlet data.

All functions broadcast over leading axes: points are arrays of shape (..., 2).
The closed forms rely on the identity

    |y|^2 |x - y/|y|^2|^2 = |x|^2 |y|^2 - 2 x.y + 1,

which is symmetric in (x, y) and smooth at y = 0, so the regular part needs no
special case at the origin (its limit H(x, 0) = 0 falls out of the formula).
"""
import numpy as np

from .errors import DomainError, SingularityError

INV_2PI = 1.0 / (2.0 * np.pi)
INV_4PI = 1.0 / (4.0 * np.pi)


def _as_points(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError(f"expected points with a trailing axis of length 2, got shape {p.shape}")
    return p


def _norm2(p):
    return p[..., 0] * p[..., 0] + p[..., 1] * p[..., 1]


def _reflected_norm2(x, y):
    return _norm2(x) * _norm2(y) - 2.0 * (x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]) + 1.0


def _require_interior(p, name):
    if np.any(_norm2(p) >= 1.0):
        raise DomainError(f"{name} must lie strictly inside the unit disk")


def green(x, y):
    """G(x, y) = -(1/2pi) log|x - y| + H(x, y).

    Raises SingularityError for coincident points and DomainError for points
    on or outside the unit circle.
    """
    x, y = _as_points(x), _as_points(y)
    _require_interior(x, "x")
    _require_interior(y, "y")
    d2 = _norm2(x - y)
    if np.any(d2 == 0.0):
        raise SingularityError("green(x, y) is singular at x = y")
    return INV_4PI * np.log(_reflected_norm2(x, y) / d2)


def regular_part(x, y):
    """H(x, y) = (1/2pi) log(|y| |x - y/|y|^2|), harmonic in x.

    x may lie on the boundary, where H(x, y) = (1/2pi) log|x - y|.
    y = 0 returns the continuous limit H(x, 0) = 0.
    """
    x, y = _as_points(x), _as_points(y)
    if np.any(_norm2(x) > 1.0 + 1e-14):
        raise DomainError("x must lie in the closed unit disk")
    _require_interior(y, "y")
    return INV_4PI * np.log(_reflected_norm2(x, y))


def robin(x):
    """Robin function H(x, x) = (1/2pi) log(1 - |x|^2)."""
    x = _as_points(x)
    _require_interior(x, "x")
    return INV_2PI * np.log1p(-_norm2(x))


def green_matrix(points):
    """Symmetric matrix with G(xi_j, xi_k) off the diagonal and H(xi_j, xi_j) on it."""
    points = _as_points(points)
    m = len(points)
    out = np.empty((m, m))
    for j in range(m):
        for k in range(m):
            out[j, k] = robin(points[j]) if j == k else green(points[j], points[k])
    return out
