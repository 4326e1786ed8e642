"""The projected ansatz PU, its expansions and the residual R.

Projection.  P w is the zero-trace function on the pierced disk with the same
Laplacian as w.  For a bubble U_k the function

    E_k(x) = -log(2 alpha_k^2 delta_k^alpha_k) + 4 pi alpha_k H(x, xi_k) - sum_l beta_kl G(x, xi_l)

is harmonic in the pierced disk and cancels U_k on every boundary circle up to a
small remainder, so

    P U_k = U_k + E_k + psi_k,   psi_k harmonic with psi_k = -(U_k + E_k) on the boundary.

U_k + E_k is evaluated in closed form and only the small, smooth psi_k is
discretized; its size is exactly the gap between P U_k and its expansion.  The
plain route (harmonic correction of U_k alone) is available for comparison.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import bubble as bub
from . import discrete, greens
from .errors import DomainError


def _green_to(points, k, center):
    """G(x, xi_k) with |x - xi_k| taken from exact offsets."""
    xy = points.xy
    s = greens._reflected_norm2(xy, np.asarray(center, dtype=float))
    r = points.distance(k)
    with np.errstate(divide="ignore"):
        return greens.INV_4PI * (np.log(s) - 2.0 * np.log(r))


def _regular_to(points, center):
    xy = points.xy
    return greens.INV_4PI * np.log(greens._reflected_norm2(xy, np.asarray(center, dtype=float)))


@dataclass(frozen=True, eq=False)
class LiftedField:
    """closed-form part (a function of Points) plus a P1 correction."""

    mesh: object
    analytic: Callable
    correction: np.ndarray

    def nodal(self):
        return self.analytic(discrete.vertex_points(self.mesh)) + self.correction

    def at(self, quad):
        return self.analytic(quad.points) + quad.interp(self.correction)

    def at_points(self, points, bary_values):
        """Values at arbitrary Points given the interpolated correction there."""
        return self.analytic(points) + bary_values

    def field(self):
        return discrete.Field(self.mesh, self.nodal())


def bubble_of(cfg, scales, k):
    # the even-alpha warning belongs to configuration time, not to every rebuild
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return bub.Bubble(cfg.centers[k], scales.delta[k], cfg.alphas[k])


def bubble_values(points, k, b):
    return bub.profile(b.alpha, b.delta_alpha, points.distance(k))


def bubble_lift(cfg, scales, k):
    """E_k as a function of Points."""
    alpha = cfg.alphas[k]
    c = cfg.centers
    beta = scales.beta[k]
    const = -math.log(2.0 * alpha * alpha * scales.delta_alpha[k])

    def lift(points):
        out = const + 4.0 * math.pi * alpha * _regular_to(points, c[k])
        for l in range(cfg.m):
            out = out - beta[l] * _green_to(points, l, c[l])
        return out

    return lift


def project_bubble(mesh, b, system=None, lift=None, k=None):
    """P U for the bubble b as a LiftedField.

    `k` is the mesh patch whose center is the bubble center (found if omitted).
    With `lift` (a harmonic function of Points) the correction is the discrete
    harmonic extension of -(U + lift); without it, of -U.
    """
    if k is None:
        k = _patch_index(mesh, b.center)
    system = system or discrete.DirichletSystem(mesh)

    if lift is None:
        def analytic(points):
            return bubble_values(points, k, b)
    else:
        def analytic(points):
            return bubble_values(points, k, b) + lift(points)

    trace = analytic(discrete.vertex_points(mesh))
    corr = system.solve(np.zeros(mesh.n_vertices), boundary_values=-trace[system.fixed], check=False)
    return LiftedField(mesh, analytic, corr)


def _patch_index(mesh, center):
    d = np.hypot(*(mesh.centers - np.asarray(center)).T) if len(mesh.centers) else np.array([])
    if len(d) == 0 or d.min() > 1e-12:
        raise DomainError(f"no mesh patch is centered at {tuple(center)}")
    return int(np.argmin(d))


@dataclass(eq=False)
class AnsatzBundle:
    mesh: object
    cfg: object
    scales: object
    system: object
    quad: object
    bubbles: list
    projected: list  # LiftedField per hole
    PU: LiftedField
    PU_q: np.ndarray  # PU at quadrature points
    source_q: np.ndarray  # -Laplace PU at quadrature points
    K1_q: np.ndarray
    K2_q: np.ndarray
    V1_q: np.ndarray
    V2_q: np.ndarray
    D1: float
    D2: float
    route: str = "lifted"
    notes: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.system.K

    @property
    def D1_scaled(self):
        return self.D1 * 2.0 * self.scales.eps / self.scales.lambda1 if self.scales.lambda1 > 0 else float("nan")

    @property
    def D2_scaled(self):
        lam = self.scales.lambda2 * self.cfg.tau**2
        return self.D2 * 2.0 * self.scales.eps / lam if lam > 0 else float("nan")


def shifted_integral(quad, V_q, exponent_q):
    """int V e^{exponent}, returned as (log-scale shift, value at shift) to avoid overflow."""
    top = float(np.max(exponent_q))
    return top, quad.integrate(V_q * np.exp(exponent_q - top))


def exp_integral(quad, V_q, exponent_q):
    top, val = shifted_integral(quad, V_q, exponent_q)
    return val * math.exp(top)


def assemble_ansatz(mesh, cfg, scales, route="lifted", system=None):
    system = system or discrete.DirichletSystem(mesh)
    quad = discrete.Quadrature(mesh)
    bubbles = [bubble_of(cfg, scales, k) for k in range(cfg.m)]
    projected = []
    for k, b in enumerate(bubbles):
        lift = bubble_lift(cfg, scales, k) if route == "lifted" else None
        projected.append(project_bubble(mesh, b, system, lift=lift, k=k))
    signs = cfg.signs
    parts = list(projected)

    def analytic(points):
        return sum(s * p.analytic(points) for s, p in zip(signs, parts))

    corr = sum(s * p.correction for s, p in zip(signs, parts))
    PU = LiftedField(mesh, analytic, corr)
    PU_q = PU.at(quad)
    pts = quad.points
    src = [bub.source_profile(b.alpha, b.delta_alpha, pts.distance(k)) for k, b in enumerate(bubbles)]
    source_q = sum(s * v for s, v in zip(signs, src))
    m1 = cfg.m1
    K1_q = sum(src[:m1]) if m1 > 0 else np.zeros(quad.shape)
    K2_q = sum(src[m1:]) if m1 < cfg.m else np.zeros(quad.shape)
    V1_q = np.asarray(cfg.V1(pts.x, pts.y), dtype=float) * np.ones(quad.shape)
    V2_q = np.asarray(cfg.V2(pts.x, pts.y), dtype=float) * np.ones(quad.shape)
    D1 = exp_integral(quad, V1_q, PU_q)
    D2 = exp_integral(quad, V2_q, -cfg.tau * PU_q)
    return AnsatzBundle(mesh, cfg, scales, system, quad, bubbles, projected, PU, PU_q, source_q,
                        K1_q, K2_q, V1_q, V2_q, D1, D2, route)


def residual(bundle):
    """R = Laplace PU + lambda1 V1 e^PU / D1 - lambda2 tau V2 e^{-tau PU} / D2 at quadrature points."""
    cfg, sc = bundle.cfg, bundle.scales
    with np.errstate(over="ignore"):
        t1 = sc.lambda1 * bundle.V1_q * np.exp(bundle.PU_q) / bundle.D1
        t2 = sc.lambda2 * cfg.tau * bundle.V2_q * np.exp(-cfg.tau * bundle.PU_q) / bundle.D2
    return -bundle.source_q + t1 - t2


def residual_norms(bundle, ps=(1.05, 2.0)):
    R = residual(bundle)
    return {p: discrete.lp_norm(R, p, bundle.quad) for p in ps}


def projection_gap(bundle, k=None):
    """max |P U_k - expansion| over vertices; the expansion is the closed-form part of the lifted route."""
    ks = range(bundle.cfg.m) if k is None else [k]
    if bundle.route != "lifted":
        raise ValueError("projection_gap needs the lifted route")
    return max(float(np.max(np.abs(bundle.projected[j].correction))) for j in ks)


def expansion_gap(mesh, cfg, scales, k, projected, system=None):
    """max over vertices of |projected - (U_k + E_k)| for any LiftedField projected."""
    pts = discrete.vertex_points(mesh)
    b = bubble_of(cfg, scales, k)
    exp_ = bubble_values(pts, k, b) + bubble_lift(cfg, scales, k)(pts)
    return float(np.max(np.abs(projected.nodal() - exp_)))


def annulus_mask(points, k, scales):
    return points.distance(k) <= scales.eta[k]


def annulus_masses(bundle):
    """Per-hole int over A_i of V1 e^PU (positive holes) or V2 e^{-tau PU} (negative), times eps/(2 pi alpha_i)."""
    cfg, sc, q = bundle.cfg, bundle.scales, bundle.quad
    out = np.empty(cfg.m)
    for i in range(cfg.m):
        mask = annulus_mask(q.points, i, sc)
        if i < cfg.m1:
            vals = bundle.V1_q * np.exp(np.where(mask, bundle.PU_q, -np.inf))
        else:
            vals = bundle.V2_q * np.exp(np.where(mask, -cfg.tau * bundle.PU_q, -np.inf))
        out[i] = q.integrate(vals) * sc.eps / (2.0 * math.pi * cfg.alphas[i])
    return out


def cross_masses(bundle):
    """int over A_i of the opposite exponential; bounded as eps -> 0."""
    cfg, sc, q = bundle.cfg, bundle.scales, bundle.quad
    out = np.empty(cfg.m)
    for i in range(cfg.m):
        mask = annulus_mask(q.points, i, sc)
        if i < cfg.m1:
            vals = bundle.V2_q * np.exp(np.where(mask, -cfg.tau * bundle.PU_q, -np.inf))
        else:
            vals = bundle.V1_q * np.exp(np.where(mask, bundle.PU_q, -np.inf))
        out[i] = q.integrate(vals)
    return out


def near_hole_expansion(bundle, radius=None):
    """For each hole, max over vertices of A_i (within `radius` if given) of

        |s_i PU - [U_i - log(2 alpha_i^2 delta_i^alpha_i) + (alpha_i - 2) log|x - xi_i| + 2 pi rho_i]|

    with s_i = 1 for positive holes and -tau for negative ones.
    """
    cfg, sc = bundle.cfg, bundle.scales
    pts = discrete.vertex_points(bundle.mesh)
    pu = bundle.PU.nodal()
    out = np.empty(cfg.m)
    for i, b in enumerate(bundle.bubbles):
        r = pts.distance(i)
        mask = r <= (sc.eta[i] if radius is None else radius)
        s = 1.0 if i < cfg.m1 else -cfg.tau
        model = (bub.profile(b.alpha, b.delta_alpha, r) - math.log(2 * b.alpha**2 * b.delta_alpha)
                 + (b.alpha - 2.0) * np.log(r) + 2.0 * math.pi * sc.rho[i])
        out[i] = float(np.max(np.abs(s * pu[mask] - model[mask])))
    return out


def probe_points(cfg, n=16, radius=0.85):
    t = 2.0 * math.pi * np.arange(n) / n
    ring = np.stack([radius * np.cos(t), radius * np.sin(t)], 1)
    c = cfg.centers
    mids = [0.5 * (c[i] + c[j]) for i in range(cfg.m) for j in range(i + 1, cfg.m)]
    return ring, (np.array(mids) if mids else np.zeros((0, 2)))


def green_superposition(cfg, x):
    """2 pi sum_{i<=m1} (alpha_i+2) G(x, xi_i) - (2 pi / tau) sum_{i>m1} (alpha_i+2) G(x, xi_i)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for i, h in enumerate(cfg.holes):
        w = 2.0 * math.pi * (h.alpha + 2.0) * (1.0 if h.positive else -1.0 / cfg.tau)
        out = out + w * greens.green(x, np.asarray(h.center))
    return out


def locate(mesh, x):
    """Triangle index and barycentric coordinates of each point (global coordinates)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = mesh.vertices[mesh.triangles]
    a, b, c = v[:, 0], v[:, 1], v[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    tri = np.empty(len(x), dtype=int)
    bary = np.empty((len(x), 3))
    for n, p in enumerate(x):
        l1 = ((p[0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (p[1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / det
        l2 = ((b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])) / det
        l0 = 1.0 - l1 - l2
        worst = np.minimum(np.minimum(l0, l1), l2)
        t = int(np.argmax(worst))
        if worst[t] < -1e-9:
            raise DomainError(f"point {tuple(p)} is outside the mesh")
        tri[n] = t
        bary[n] = (l0[t], l1[t], l2[t])
    return tri, bary


def evaluate(lifted, x, extra=None):
    """A LiftedField (plus an optional extra nodal P1 field) at global points x."""
    mesh = lifted.mesh
    x = np.atleast_2d(np.asarray(x, dtype=float))
    tri, bary = locate(mesh, x)
    nodal = lifted.correction if extra is None else lifted.correction + extra
    corr = np.einsum("nj,nj->n", nodal[mesh.triangles[tri]], bary)
    pts = discrete.Points(x, np.full(len(x), -1), mesh.centers)
    return lifted.analytic(pts) + corr


def farfield_error(lifted, cfg, extra=None, n=16, radius=0.85):
    ring, _ = probe_points(cfg, n, radius)
    return float(np.max(np.abs(evaluate(lifted, ring, extra) - green_superposition(cfg, ring))))
