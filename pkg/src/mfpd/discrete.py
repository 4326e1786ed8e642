"""P1 finite elements on a Mesh: quadrature, assembly, Dirichlet solves, norms.

Quadrature points inherit the frame of their triangle (see Mesh.triangle_frames),
so functions of |x - xi_k| can be evaluated without cancellation at any scale.
"""
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import AssemblyError, NumericalError

# degree-5, 7-point rule on the reference triangle (barycentric coordinates, weights sum to 1)
_A1, _B1, _W1 = 0.0597158717897698, 0.4701420641051151, 0.1323941527885062
_A2, _B2, _W2 = 0.7974269853530873, 0.1012865073234563, 0.1259391805448271
BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
WEIGHTS = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])


@dataclass(frozen=True, eq=False)
class Points:
    """Points given in per-row frames: frame k >= 0 means coordinates relative to centers[k]."""

    coords: np.ndarray  # (..., 2)
    frame: np.ndarray  # broadcastable to coords.shape[:-1]
    centers: np.ndarray

    @property
    def xy(self):
        f = np.broadcast_to(self.frame, self.coords.shape[:-1])
        shift = np.where((f >= 0)[..., None], self.centers[np.maximum(f, 0)] if len(self.centers) else 0.0, 0.0)
        return self.coords + shift

    def offset(self, k):
        """Offset from centers[k], exact where the frame is k."""
        f = np.broadcast_to(self.frame, self.coords.shape[:-1])
        return np.where((f == k)[..., None], self.coords, self.xy - self.centers[k])

    def distance(self, k):
        off = self.offset(k)
        return np.hypot(off[..., 0], off[..., 1])

    @property
    def x(self):
        return self.xy[..., 0]

    @property
    def y(self):
        return self.xy[..., 1]


def vertex_points(mesh):
    coords = np.where((mesh.anchor >= 0)[:, None], mesh.local, mesh.vertices)
    return Points(coords, mesh.anchor, mesh.centers)


class Quadrature:
    """7-point rule on every triangle of a mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        xy, frames = mesh.triangle_coords()
        self.frames = frames
        e1, e2 = xy[:, 1] - xy[:, 0], xy[:, 2] - xy[:, 0]
        self.area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(self.area <= 0):
            bad = int(np.flatnonzero(self.area <= 0)[0])
            raise AssemblyError(f"triangle {bad} is degenerate or inverted", triangle=bad)
        self.weights = self.area[:, None] * WEIGHTS[None, :]  # (M, 7)
        coords = np.einsum("qj,mjd->mqd", BARY, xy)
        self.points = Points(coords, frames[:, None], mesh.centers)

    @property
    def shape(self):
        return self.weights.shape

    def interp(self, nodal):
        """Values of the P1 interpolant at the quadrature points."""
        nodal = np.asarray(nodal)
        return nodal[self.mesh.triangles] @ BARY.T

    def integrate(self, values):
        return float(np.sum(self.weights * values))

    def load(self, values):
        """Vector b_i = int f phi_i for f given at the quadrature points."""
        contrib = (self.weights * values) @ BARY  # (M, 3)
        return np.bincount(self.mesh.triangles.ravel(), contrib.ravel(), minlength=self.mesh.n_vertices)

    def weighted_mass(self, values):
        """Matrix int w phi_i phi_j for w given at the quadrature points."""
        wq = self.weights * values  # (M, 7)
        local = np.einsum("mq,qa,qb->mab", wq, BARY, BARY)
        return _scatter(self.mesh, local)


def _scatter(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def element_stiffness(xy):
    """(M, 3, 3) P1 stiffness matrices for triangles with vertex coordinates xy (M, 3, 2)."""
    e1, e2 = xy[:, 1] - xy[:, 0], xy[:, 2] - xy[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    # gradients of barycentric coordinates, times 2|T|
    g = np.empty_like(xy)
    for i in range(3):
        p, q = xy[:, (i + 1) % 3], xy[:, (i + 2) % 3]
        g[:, i, 0] = p[:, 1] - q[:, 1]
        g[:, i, 1] = q[:, 0] - p[:, 0]
    return np.einsum("mad,mbd->mab", g, g) / (4.0 * area)[:, None, None], area


def assemble(mesh):
    """Stiffness matrix of -Laplace (CSR) and the lumped mass vector."""
    xy, _ = mesh.triangle_coords()
    Ke, area = element_stiffness(xy)
    if np.any(area <= 0):
        bad = int(np.flatnonzero(area <= 0)[0])
        raise AssemblyError(f"triangle {bad} is degenerate or inverted", triangle=bad)
    K = _scatter(mesh, Ke)
    lumped = np.bincount(mesh.triangles.ravel(), np.repeat(area / 3.0, 3), minlength=mesh.n_vertices)
    return K, lumped


@dataclass(frozen=True, eq=False)
class Field:
    mesh: object
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.mesh.n_vertices:
            raise ValueError("field length differs from the vertex count")


class DirichletSystem:
    """Sparse LU of the stiffness matrix restricted to interior vertices."""

    def __init__(self, mesh, K=None):
        self.mesh = mesh
        self.K = assemble(mesh)[0] if K is None else K
        self.free = np.flatnonzero(mesh.interior)
        self.fixed = np.flatnonzero(mesh.boundary)
        K = self.K.tocsr()
        self.K_II = K[self.free][:, self.free].tocsc()
        self.K_IB = K[self.free][:, self.fixed].tocsr()
        try:
            self.lu = splu(self.K_II, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise NumericalError(f"stiffness factorization failed: {exc}") from exc

    def solve_interior(self, b_I):
        return self.lu.solve(np.asarray(b_I, dtype=float))

    def solve(self, load, boundary_values=None, check=True):
        """Nodal solution of -Laplace u = f with u = g on the boundary.

        `load` is the assembled vector int f phi_i over all vertices.
        """
        load = np.asarray(load, dtype=float)
        u = np.zeros(self.mesh.n_vertices)
        rhs = load[self.free].copy()
        if boundary_values is not None:
            g = np.asarray(boundary_values, dtype=float)
            g = g[self.fixed] if len(g) == self.mesh.n_vertices else g
            u[self.fixed] = g
            rhs -= self.K_IB @ g
        u[self.free] = self.lu.solve(rhs)
        if check:
            res = np.linalg.norm(self.K_II @ u[self.free] - rhs)
            scale = max(np.linalg.norm(rhs), 1e-300)
            if np.linalg.norm(rhs) > 0 and res > 1e-10 * scale:
                raise NumericalError(f"Dirichlet solve residual {res / scale:.2e} above 1e-10")
        return u


def poisson_solve(system, rhs, boundary_values=None):
    """Solve the Dirichlet problem for a load Field/vector; returns a Field."""
    vals = rhs.values if isinstance(rhs, Field) else rhs
    return Field(system.mesh, system.solve(vals, boundary_values))


def _quad_values(f, quad):
    if isinstance(f, Field):
        return quad.interp(f.values)
    f = np.asarray(f, dtype=float)
    if f.shape != quad.shape:
        raise ValueError(f"expected values at quadrature points with shape {quad.shape}, got {f.shape}")
    return f


def _weight_values(weight, quad):
    if weight is None:
        return 1.0
    if callable(weight):
        return weight(quad.points)
    return np.asarray(weight, dtype=float)


def integrate(f, quad, weight=None):
    return quad.integrate(_quad_values(f, quad) * _weight_values(weight, quad))


def lp_norm(f, p, quad, weight=None):
    if p < 1:
        raise ValueError("p must be at least 1")
    vals = np.abs(_quad_values(f, quad))
    return quad.integrate(vals**p * _weight_values(weight, quad)) ** (1.0 / p)


def linf_norm(f, quad=None):
    if isinstance(f, Field):
        return float(np.max(np.abs(f.values)))
    return float(np.max(np.abs(f)))


def h1_seminorm(values, K):
    v = values.values if isinstance(values, Field) else np.asarray(values)
    return math.sqrt(max(float(v @ (K @ v)), 0.0))


def l2_error(nodal, exact, quad):
    """L2 distance between a P1 field and a function of Points."""
    diff = quad.interp(nodal) - exact(quad.points)
    return math.sqrt(quad.integrate(diff**2))


def h1_error(nodal, grad_exact, mesh, quad):
    """H1-seminorm distance between a P1 field and a function with gradient grad_exact(Points) -> (..., 2)."""
    xy, _ = mesh.triangle_coords()
    e1, e2 = xy[:, 1] - xy[:, 0], xy[:, 2] - xy[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    u = np.asarray(nodal)[mesh.triangles]
    gx = ((u[:, 1] - u[:, 0]) * e2[:, 1] - (u[:, 2] - u[:, 0]) * e1[:, 1]) / area2
    gy = ((u[:, 2] - u[:, 0]) * e1[:, 0] - (u[:, 1] - u[:, 0]) * e2[:, 0]) / area2
    ge = grad_exact(quad.points)
    d2 = (gx[:, None] - ge[..., 0]) ** 2 + (gy[:, None] - ge[..., 1]) ** 2
    return math.sqrt(quad.integrate(d2))


def smallest_dirichlet_eigenvalue(system, lumped, iterations=200, tol=1e-10):
    """Inverse power iteration for K u = mu M u with the lumped mass."""
    m = lumped[system.free]
    rng = np.random.default_rng(0)
    x = rng.random(len(m)) + 0.5
    mu = np.inf
    for _ in range(iterations):
        y = system.solve_interior(m * x)
        new = float(x @ (m * x)) / float(x @ (m * y))
        x = y / math.sqrt(float(y @ (m * y)))
        if abs(new - mu) < tol * abs(new):
            return new
        mu = new
    return mu
