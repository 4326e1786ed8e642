"""Damped Newton for u = PU + phi.

Unknown: the P1 field phi with zero trace.  Testing the equation
-Laplace u = lambda1 V1 e^u / D1 - lambda2 tau V2 e^{-tau u} / D2 against the hat
function v_j of an interior vertex, and using -Laplace PU = S in closed form
(the discrete harmonic correction inside PU drops out), gives

    F_j(phi) = int S v_j + (K phi)_j - int f(PU + phi) v_j.

The Jacobian is K minus a weighted mass matrix plus one rank-one term per
exponential (from differentiating D1 and D2); it is solved with a sparse LU of
the local part and the Woodbury identity.
"""
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import construct, discrete
from .ansatz import compute_scales
from .errors import NumericalError
from .mesh import GradingSpec, triangulate

CLIP = 700.0


@dataclass(frozen=True)
class SolverOptions:
    newton_tol: float = 1e-10  # relative to the initial dual-norm residual
    abs_tol: float = 0.0
    max_iter: int = 12
    max_halvings: int = 30
    divergence_factor: float = 10.0


@dataclass
class NonlinearState:
    phi: np.ndarray  # nodal, zero on the boundary
    D1: float
    D2: float
    iteration: int = 0
    damping: float = 1.0


class NonlinearProblem:
    """Residual and Jacobian of the discrete problem around a fixed ansatz."""

    def __init__(self, bundle, lambda1=None, lambda2=None):
        self.bundle = bundle
        self.cfg = bundle.cfg
        self.tau = bundle.cfg.tau
        self.lambda1 = bundle.scales.lambda1 if lambda1 is None else lambda1
        self.lambda2 = bundle.scales.lambda2 if lambda2 is None else lambda2
        self.quad = bundle.quad
        self.system = bundle.system
        self.free = self.system.free
        self.K = bundle.system.K.tocsr()
        self.K_II = self.system.K_II
        self.load_S = self.quad.load(bundle.source_q)[self.free]
        self.clipped = False

    # exponentials, shifted by their maxima so nothing overflows

    def _shifted(self, expo):
        top = float(np.max(expo))
        z = expo - top
        if np.any(z < -CLIP):
            self.clipped = True
            z = np.maximum(z, -CLIP)
        return np.exp(z)

    def terms(self, phi):
        """Quadrature-point weights of both exponentials and their normalizations."""
        u = self.bundle.PU_q + self.quad.interp(phi)
        e1 = self.bundle.V1_q * self._shifted(u)
        e2 = self.bundle.V2_q * self._shifted(-self.tau * u)
        return e1, self.quad.integrate(e1), e2, self.quad.integrate(e2)

    def full(self, phi_I):
        phi = np.zeros(self.bundle.mesh.n_vertices)
        phi[self.free] = phi_I
        return phi

    def nonlinearity(self, phi):
        """f(PU + phi) at quadrature points."""
        e1, d1, e2, d2 = self.terms(phi)
        return self.lambda1 * e1 / d1 - self.lambda2 * self.tau * e2 / d2

    def residual(self, phi_I):
        phi = self.full(phi_I)
        return self.load_S + self.K_II @ phi_I - self.quad.load(self.nonlinearity(phi))[self.free]

    def dual_norm(self, F):
        return math.sqrt(max(float(F @ self.system.solve_interior(F)), 0.0))

    def linearization(self, phi_I):
        """Local sparse part A and the low-rank factors (B, c) with J = A + B diag(c) B^T."""
        phi = self.full(phi_I)
        e1, d1, e2, d2 = self.terms(phi)
        w = self.lambda1 * e1 / d1 + self.lambda2 * self.tau**2 * e2 / d2
        A = (self.K - self.quad.weighted_mass(w)).tocsr()[self.free][:, self.free].tocsc()
        b1 = self.quad.load(e1)[self.free] / d1
        b2 = self.quad.load(e2)[self.free] / d2
        B = np.stack([b1, b2], axis=1)
        c = np.array([self.lambda1, self.lambda2 * self.tau**2])
        return A, B, c

    def jacobian_apply(self, phi_I, x):
        A, B, c = self.linearization(phi_I)
        return A @ x + B @ (c * (B.T @ x))

    def jacobian_solver(self, phi_I):
        return JacobianSolver(*self.linearization(phi_I))

    def jacobian_solve(self, phi_I, rhs):
        return self.jacobian_solver(phi_I).solve(rhs)


def jacobian_fd_check(prob, phi_I=None, n_dirs=10, step=1e-6, seed=0):
    """Relative gaps |J d - (F(x + h d) - F(x - h d)) / 2h| / |J d| over random directions d.

    Directions are standard normal, scaled to unit max-norm.
    """
    x = np.zeros(len(prob.free)) if phi_I is None else np.asarray(phi_I, dtype=float)
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(n_dirs):
        d = rng.standard_normal(len(x))
        d /= np.max(np.abs(d))
        jd = prob.jacobian_apply(x, d)
        fd = (prob.residual(x + step * d) - prob.residual(x - step * d)) / (2.0 * step)
        gaps.append(float(np.linalg.norm(jd - fd) / np.linalg.norm(jd)))
    return np.array(gaps)


class JacobianSolver:
    """Solve (A + B diag(c) B^T) x = r with one LU of A and a small capacitance system."""

    def __init__(self, A, B, c):
        self.A, self.B, self.c = A, B, c
        self.bordered = False
        keep = c > 0
        self.Bk, self.ck = B[:, keep], c[keep]
        try:
            self.lu = splu(A, permc_spec="MMD_AT_PLUS_A")
            self.AinvB = self.lu.solve(self.Bk) if self.Bk.shape[1] else self.Bk
            cap = np.diag(1.0 / self.ck) + self.Bk.T @ self.AinvB
            if cap.size and (not np.all(np.isfinite(cap)) or np.linalg.cond(cap) > 1e12):
                raise RuntimeError("ill-conditioned capacitance matrix")
            self.cap = cap
        except RuntimeError as exc:
            warnings.warn(f"local Jacobian part is singular or nearly so ({exc}); using the bordered system",
                          RuntimeWarning, stacklevel=3)
            self._setup_bordered()

    def _setup_bordered(self):
        self.bordered = True
        n, k = self.Bk.shape
        Bs = sp.csc_matrix(self.Bk)
        M = sp.bmat([[self.A, Bs], [Bs.T, sp.diags(-1.0 / self.ck)]], format="csc")
        try:
            self.blu = splu(M, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalError(f"Jacobian is singular: {exc}") from exc

    def solve(self, r):
        r = np.asarray(r, dtype=float)
        if self.bordered:
            n = len(r)
            sol = self.blu.solve(np.concatenate([r, np.zeros(self.Bk.shape[1])]))
            return sol[:n]
        y = self.lu.solve(r)
        if self.Bk.shape[1] == 0:
            return y
        z = np.linalg.solve(self.cap, self.Bk.T @ y)
        return y - self.AinvB @ z


@dataclass
class SolveReport:
    eps: float
    converged: bool
    history: list
    iterations: int
    phi_inf: float = float("nan")
    phi_h1: float = float("nan")
    D1: float = float("nan")  # of the solution, in shifted form: D = D_shifted * exp(shift)
    D2: float = float("nan")
    masses: Optional[np.ndarray] = None
    farfield_err: float = float("nan")
    rim_max: Optional[np.ndarray] = None
    rim_min: Optional[np.ndarray] = None
    quadratic: bool = False
    clipped: bool = False
    message: str = ""
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def contraction_ratios(self):
        """r_{k+1} / r_k^2 on residuals normalized by the first one."""
        h = np.asarray(self.history) / self.history[0] if self.history else np.zeros(0)
        return h[1:] / np.maximum(h[:-1] ** 2, 1e-300)


def _quadratic_seen(history, bound=10.0):
    if len(history) < 3:
        return False
    h = np.asarray(history) / history[0]
    for k in range(1, len(h) - 1):
        if h[k] < 0.1 and h[k + 1] <= bound * h[k] ** 2:
            return True
    return False


def newton_solve(bundle, opts=None, phi0=None, problem=None):
    """Damped Newton from PU (+ phi0).  Returns (nodal phi, SolveReport)."""
    opts = opts or SolverOptions()
    start = time.perf_counter()
    prob = problem or NonlinearProblem(bundle)
    x = np.zeros(len(prob.free)) if phi0 is None else np.asarray(phi0, dtype=float)[prob.free].copy()
    F = prob.residual(x)
    r = prob.dual_norm(F)
    history = [r]
    r0 = r
    converged, message = False, ""
    it = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            if r <= max(opts.newton_tol * r0, opts.abs_tol):
                converged = True
                break
            if it >= opts.max_iter:
                message = f"no convergence in {opts.max_iter} Newton steps"
                break
            try:
                dx = -prob.jacobian_solve(x, F)
            except NumericalError as exc:
                message = str(exc)
                break
            t = 1.0
            for _ in range(opts.max_halvings + 1):
                xt = x + t * dx
                Ft = prob.residual(xt)
                rt = prob.dual_norm(Ft) if np.all(np.isfinite(Ft)) else np.inf
                if rt < (1.0 - 1e-4 * t) * r:
                    break
                t *= 0.5
            else:
                message = "line search failed: no damped step reduces the residual"
                break
            it += 1
            x, F, r = xt, Ft, rt
            history.append(r)
            if r > opts.divergence_factor * r0:
                message = "diverged"
                break
            # terminal stagnation at round-off level counts as convergence
            if t == 1.0 and len(history) > 2 and r >= 0.5 * history[-2] and r <= 1e3 * np.finfo(float).eps * _load_scale(prob):
                converged = True
                message = "stopped at round-off level"
                break
    phi = prob.full(x)
    report = SolveReport(bundle.scales.eps, converged, history, it, message=message, clipped=prob.clipped,
                         wall_time=time.perf_counter() - start)
    if np.all(np.isfinite(phi)):
        _fill_metrics(report, bundle, prob, phi)
    report.quadratic = _quadratic_seen(history)
    return phi, report


def _load_scale(prob):
    return math.sqrt(max(float(prob.load_S @ prob.system.solve_interior(prob.load_S)), 0.0))


def _fill_metrics(report, bundle, prob, phi):
    cfg, sc = bundle.cfg, bundle.scales
    report.phi_inf = float(np.max(np.abs(phi)))
    report.phi_h1 = discrete.h1_seminorm(phi, bundle.system.K)
    u_q = bundle.PU_q + bundle.quad.interp(phi)
    report.D1 = construct.exp_integral(bundle.quad, bundle.V1_q, u_q)
    report.D2 = construct.exp_integral(bundle.quad, bundle.V2_q, -cfg.tau * u_q)
    masses = np.empty(cfg.m)
    q = bundle.quad
    for i in range(cfg.m):
        mask = construct.annulus_mask(q.points, i, sc)
        expo = u_q if i < cfg.m1 else -cfg.tau * u_q
        V = bundle.V1_q if i < cfg.m1 else bundle.V2_q
        masses[i] = q.integrate(V * np.exp(np.where(mask, expo, -np.inf))) * sc.eps / (2 * math.pi * cfg.alphas[i])
    report.masses = masses
    report.farfield_err = construct.farfield_error(bundle.PU, cfg, extra=phi)
    u = bundle.PU.nodal() + phi
    pts = discrete.vertex_points(bundle.mesh)
    rim_max, rim_min = np.empty(cfg.m), np.empty(cfg.m)
    for i in range(cfg.m):
        ring = pts.distance(i) <= 2.0 * sc.delta[i]
        rim_max[i], rim_min[i] = float(np.max(u[ring])), float(np.min(u[ring]))
    report.rim_max, report.rim_min = rim_max, rim_min
    report.extras["flux_gap"] = flux_gap(prob, phi)


def flux_gap(prob, phi):
    """Discrete boundary flux of u plus int f(u); vanishes at a converged solution.

    The flux through the boundary is sum over boundary hat functions of the weak
    residual; partition of unity rewrites it through interior rows only.
    """
    f_q = prob.nonlinearity(phi)
    load_f = prob.quad.load(f_q)
    interior_a = prob.load_S + prob.K_II @ phi[prob.free]
    boundary_flux = -float(np.sum(interior_a)) - float(np.sum(load_f[prob.system.fixed]))
    return boundary_flux + prob.quad.integrate(f_q)


@dataclass(frozen=True)
class SweepOptions:
    grading: GradingSpec = GradingSpec()
    solver: SolverOptions = SolverOptions()
    route: str = "lifted"


@dataclass
class SweepPoint:
    eps: float
    n_vertices: int
    res_norms: dict
    D1_scaled: float
    D2_scaled: float
    masses: np.ndarray
    projection_gap: float
    report: SolveReport
    ansatz_farfield_err: float
    extras: dict = field(default_factory=dict)


def solve_one(cfg, eps, sweep_opts=None, keep=False):
    """Mesh, ansatz and Newton solve at one eps."""
    sweep_opts = sweep_opts or SweepOptions()
    scales = compute_scales(cfg, eps)
    mesh = triangulate(cfg, scales, sweep_opts.grading)
    bundle = construct.assemble_ansatz(mesh, cfg, scales, route=sweep_opts.route)
    norms = construct.residual_norms(bundle)
    phi, report = newton_solve(bundle, sweep_opts.solver)
    point = SweepPoint(
        eps=float(eps),
        n_vertices=mesh.n_vertices,
        res_norms=norms,
        D1_scaled=bundle.D1_scaled,
        D2_scaled=bundle.D2_scaled,
        masses=construct.annulus_masses(bundle),
        projection_gap=construct.projection_gap(bundle) if bundle.route == "lifted" else float("nan"),
        report=report,
        ansatz_farfield_err=construct.farfield_error(bundle.PU, cfg),
    )
    if keep:
        point.extras.update(bundle=bundle, phi=phi, scales=scales, mesh=mesh)
    return point


def _solve_task(args):
    cfg, eps, sweep_opts = args
    try:
        return solve_one(cfg, eps, sweep_opts)
    except Exception as exc:  # recorded per point; the sweep continues
        return exc


def default_jobs():
    env = os.environ.get("MFPD_JOBS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def continuation(cfg, eps_list, sweep_opts=None, jobs=1):
    """Independent solves along a descending eps list, each seeded by its own ansatz.

    Returns a list aligned with eps_list holding SweepPoint or the exception raised
    at that eps.  Results do not depend on `jobs`.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b > a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be descending")
    tasks = [(cfg, e, sweep_opts) for e in eps_list]
    if jobs <= 1 or len(tasks) <= 1:
        return [_solve_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_task, tasks))
