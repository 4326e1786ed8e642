"""Linear-theory instruments and rate fitting.

* gamma / gamma-tilde systems and gamma*_j, the coefficients that make the
  projected test functions P eta_0j, P eta_j close on every rim;
* the discrete linearized operator L at the ansatz and its near-kernel:
  Rayleigh quotients of the projected Z_0j against random directions, and the
  smallest |mu| of L x = mu K x (so that ||L^{-1}|| = 1/|mu| in the energy norm);
* least-squares log-log rate fits.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, ArpackNoConvergence, eigsh

from . import bubble as bub
from . import construct, discrete, greens
from .ansatz import _require_diagonally_dominant
from .errors import FitError, NumericalError
from .solver import JacobianSolver


@dataclass(frozen=True)
class GammaSystems:
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    gamma_star: np.ndarray
    residual: float


def gamma_matrix(cfg, scales):
    A = greens.green_matrix(cfg.centers)
    N = A.copy()
    N[np.diag_indices_from(N)] = -np.log(scales.hole_radius) / (2.0 * math.pi) + np.diag(A)
    return N, A


def solve_gammas(cfg, scales):
    N, A = gamma_matrix(cfg, scales)
    _require_diagonally_dominant(N, "gamma")
    m = cfg.m
    alpha = cfg.alphas
    rhs = 2.0 * np.eye(m)
    T = (8.0 * math.pi / 3.0) * A * alpha[None, :]
    for j in range(m):
        T[j, j] = (4.0 / 3.0) * alpha[j] * math.log(scales.delta[j]) + 8.0 / 3.0 + (8.0 * math.pi / 3.0) * alpha[j] * A[j, j]
    gamma = np.linalg.solve(N, rhs)
    gamma_t = np.linalg.solve(N, T)
    res = max(np.max(np.abs(N @ gamma - rhs)) / 2.0, np.max(np.abs(N @ gamma_t - T)) / np.max(np.abs(T)))
    if res > 1e-12:
        raise NumericalError(f"gamma solve residual {res:.2e} above 1e-12")
    star = np.empty(m)
    for j in range(m):
        H = A[j, j]
        logd = math.log(scales.delta[j])
        off_t = sum(gamma_t[i, j] * A[i, j] for i in range(m) if i != j)
        off = sum(gamma[i, j] * A[i, j] for i in range(m) if i != j)
        num = gamma_t[j, j] / (2 * math.pi) * logd + ((8 * math.pi / 3) * alpha[j] - gamma_t[j, j]) * H - off_t
        den = 1.0 - gamma[j, j] * H - off + gamma[j, j] / (2 * math.pi) * logd
        star[j] = num / den
    return GammaSystems(gamma, gamma_t, star, float(res))


def gamma_asymptotics(cfg, scales):
    """Leading-order predictions for the diagonals of gamma, gamma-tilde and for gamma*."""
    a = cfg.alphas
    le = math.log(scales.eps)
    return dict(
        gamma=-2.0 * math.pi * (a - 2.0) / le,
        gamma_tilde=-(4.0 * math.pi / 3.0) * (a - 2.0),
        gamma_star=-((a - 2.0) / 3.0) * le,
    )


# projected test functions


def eta0_lift(cfg, scales, gam, j):
    """Closed-form part of P eta_0j: eta_0j + sum_i gamma_ij G(., xi_i)."""
    b = construct.bubble_of(cfg, scales, j)
    c = cfg.centers

    def f(points):
        out = bub.eta0_profile(b.alpha, b.delta_alpha, points.distance(j))
        for i in range(cfg.m):
            out = out + gam.gamma[i, j] * construct._green_to(points, i, c[i])
        return out

    return f


def projected_z0(bundle, gam, j):
    """P Z_0j = -P eta_0j (the projection of a constant vanishes), as a LiftedField."""
    lift = eta0_lift(bundle.cfg, bundle.scales, gam, j)

    def analytic(points):
        return -lift(points)

    trace = analytic(discrete.vertex_points(bundle.mesh))
    corr = bundle.system.solve(np.zeros(bundle.mesh.n_vertices), boundary_values=-trace[bundle.system.fixed],
                               check=False)
    return construct.LiftedField(bundle.mesh, analytic, corr)


# the linearized operator


@dataclass(eq=False)
class LinearizedOperator:
    """-L on interior vertices as A + B diag(c) B^T (A = K - M_{K1+K2})."""

    A: object
    B: np.ndarray
    c: np.ndarray
    K_II: object
    free: np.ndarray

    def apply_L(self, x):
        return -(self.A @ x + self.B @ (self.c * (self.B.T @ x)))


def linearized_operator(bundle):
    sc, cfg, q = bundle.scales, bundle.cfg, bundle.quad
    free = bundle.system.free
    Kw = bundle.K1_q + bundle.K2_q
    A = (bundle.K - q.weighted_mass(Kw)).tocsr()[free][:, free].tocsc()
    cols, coef = [], []
    if sc.lambda1 > 0:
        cols.append(q.load(bundle.K1_q)[free])
        coef.append(1.0 / sc.lambda1)
    lam2 = sc.lambda2 * cfg.tau**2
    if lam2 > 0:
        cols.append(q.load(bundle.K2_q)[free])
        coef.append(1.0 / lam2)
    B = np.stack(cols, axis=1) if cols else np.zeros((len(free), 0))
    return LinearizedOperator(A, B, np.array(coef), bundle.system.K_II, free)


def rayleigh(op, x):
    return abs(float(x @ op.apply_L(x))) / float(x @ (op.K_II @ x))


@dataclass
class NearKernelReport:
    eps: float
    z0_quotients: np.ndarray
    random_quotients: np.ndarray
    mu_min: float
    inverse_norm: float
    converged: bool
    mu_radial: float  # smallest |mu| among modes that are radial around their hole
    inverse_norm_radial: float
    spectrum: list  # (mu, dominant hole, radial fraction) for the computed modes
    c_tilde_z0: np.ndarray  # (m, 2): c~_1, c~_2 on each P Z_0j
    c_tilde_mode: np.ndarray  # c~_1, c~_2 on the near-kernel eigenvector
    mass_K1: float  # int K1 / lambda1
    mass_K2: float  # int K2 / (lambda2 tau^2)
    L_of_one: float  # L^1 norm of L(1)
    notes: list = field(default_factory=list)


def smallest_eigenpairs(op, k=1, seed=0, tol=1e-8, maxiter=1000):
    """The k eigenvalues mu of L x = mu K x closest to zero, by shift-invert Lanczos.

    Returns (mu, vectors, converged), sorted by |mu|.
    """
    solver = JacobianSolver(op.A, op.B, op.c)
    n = op.A.shape[0]
    k = min(k, n - 1)
    # -L x = (-mu) K x; shift-invert at zero needs only solves with -L
    OPinv = LinearOperator((n, n), matvec=solver.solve, dtype=float)
    minus_L = LinearOperator((n, n), matvec=lambda x: -op.apply_L(x), dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    ok = True
    try:
        vals, vecs = eigsh(minus_L, k=k, M=op.K_II, sigma=0.0, which="LM", OPinv=OPinv, v0=v0, tol=tol,
                           maxiter=maxiter)
    except ArpackNoConvergence as exc:
        vals, vecs, ok = exc.eigenvalues, exc.eigenvectors, False
    order = np.argsort(np.abs(vals))
    return -vals[order], vecs[:, order], ok


def radial_fraction(mesh, nodal, k):
    """Share of the patch-k part of a field carried by ring averages (angular mode zero).

    Patch vertices sit on rings of equal radius, so grouping by radius is exact.
    """
    sel = (mesh.anchor == k) & (mesh.tags >= 0)
    if not np.any(sel):
        return 0.0
    rad = np.hypot(*mesh.local[sel].T)
    w = nodal[sel]
    key = np.round(np.log(np.maximum(rad, 1e-300)), 9)
    _, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    means = np.bincount(inv, w) / counts
    total = float(np.sum(w**2))
    return float(np.sum(counts * means**2) / total) if total > 0 else 0.0


def classify_mode(mesh, nodal):
    """(dominant patch, radial fraction there) for an eigenvector."""
    share = [float(np.sum(nodal[mesh.anchor == k] ** 2)) for k in range(len(mesh.centers))]
    k = int(np.argmax(share))
    return k, radial_fraction(mesh, nodal, k)


def c_tilde(bundle, nodal):
    """c~_1 = -(1/lambda1) int K1 phi and c~_2 = -(1/(lambda2 tau^2)) int K2 phi."""
    q, sc = bundle.quad, bundle.scales
    phi_q = q.interp(nodal)
    lam2 = sc.lambda2 * bundle.cfg.tau**2
    c1 = -q.integrate(bundle.K1_q * phi_q) / sc.lambda1 if sc.lambda1 > 0 else 0.0
    c2 = -q.integrate(bundle.K2_q * phi_q) / lam2 if lam2 > 0 else 0.0
    return np.array([c1, c2])


def near_kernel_study(bundle, n_random=8, seed=0):
    cfg, sc, q = bundle.cfg, bundle.scales, bundle.quad
    op = linearized_operator(bundle)
    gam = solve_gammas(cfg, sc)
    z_quot, z_ct = [], []
    for j in range(cfg.m):
        pz = projected_z0(bundle, gam, j).nodal()
        z_quot.append(rayleigh(op, pz[op.free]))
        z_ct.append(c_tilde(bundle, pz))
    rng = np.random.default_rng(seed)
    rand = [rayleigh(op, rng.standard_normal(len(op.free))) for _ in range(n_random)]
    notes = []
    # each bubble with even alpha adds two angular kernel directions (Y1, Y2 are single valued)
    n_even = int(sum(abs(a / 2 - round(a / 2)) < 1e-9 for a in cfg.alphas))
    mus, vecs, ok = smallest_eigenpairs(op, k=2 * n_even + cfg.m + 1, seed=seed)
    if not ok:
        notes.append("eigen-iteration did not reach tolerance; values are the last iterates")
    spectrum, mu_rad, modes = [], float("nan"), []
    for mu, v in zip(mus, vecs.T):
        full = np.zeros(bundle.mesh.n_vertices)
        full[op.free] = v
        hole, frac = classify_mode(bundle.mesh, full)
        spectrum.append((float(mu), hole, frac))
        modes.append(full)
        if frac > 0.5 and mu_rad != mu_rad:
            mu_rad = float(mu)
    if mu_rad != mu_rad:
        notes.append("no radial mode among the computed eigenpairs")
    mu = float(mus[0]) if len(mus) else float("nan")
    mode = modes[0] if modes else np.zeros(bundle.mesh.n_vertices)
    lam2 = sc.lambda2 * cfg.tau**2
    m1 = q.integrate(bundle.K1_q) / sc.lambda1 if sc.lambda1 > 0 else float("nan")
    m2 = q.integrate(bundle.K2_q) / lam2 if lam2 > 0 else float("nan")
    L1 = np.zeros(q.shape)
    if sc.lambda1 > 0:
        L1 = L1 + bundle.K1_q * (1.0 - m1)
    if lam2 > 0:
        L1 = L1 + bundle.K2_q * (1.0 - m2)
    return NearKernelReport(
        eps=sc.eps,
        z0_quotients=np.array(z_quot),
        random_quotients=np.array(rand),
        mu_min=mu,
        inverse_norm=1.0 / abs(mu) if mu == mu and mu != 0 else float("inf"),
        converged=ok,
        mu_radial=mu_rad,
        inverse_norm_radial=1.0 / abs(mu_rad) if mu_rad == mu_rad and mu_rad != 0 else float("nan"),
        spectrum=spectrum,
        c_tilde_z0=np.array(z_ct),
        c_tilde_mode=c_tilde(bundle, mode),
        mass_K1=m1,
        mass_K2=m2,
        L_of_one=discrete.lp_norm(L1, 1.0, q),
        notes=notes,
    )


# rate fitting


@dataclass(frozen=True)
class RateFit:
    name: str
    x: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    r2: float
    notes: tuple = ()

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x) ** self.slope

    def as_dict(self):
        return dict(name=self.name, slope=self.slope, intercept=self.intercept, r2=self.r2,
                    x=[float(v) for v in self.x], values=[float(v) for v in self.values], notes=list(self.notes))


def fit_power(x, values, name="", min_points=4):
    """Least-squares slope of log(value) against log(x); nonpositive or non-finite entries are excluded."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    notes = []
    keep = np.isfinite(v) & (v > 0) & np.isfinite(x) & (x > 0)
    for xi, vi in zip(x[~keep], v[~keep]):
        notes.append(f"excluded point x={xi:.6g}, value={vi:.6g}")
    x, v = x[keep], v[keep]
    if len(x) < min_points:
        raise FitError(f"{name or 'fit'}: {len(x)} usable points, need at least {min_points}")
    lx, lv = np.log(x), np.log(v)
    slope, intercept = np.polyfit(lx, lv, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((lv - pred) ** 2))
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(name, x, v, float(slope), float(intercept), r2, tuple(notes))


def fit_rate(pairs, name=""):
    """Slope of log(value) against log(eps) for (eps, value) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise FitError(f"{name or 'fit'}: no data")
    eps, vals = zip(*pairs)
    return fit_power(eps, vals, name)


def fit_log_growth(pairs, name=""):
    """Exponent p in value ~ |log eps|^p for (eps, value) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise FitError(f"{name or 'fit'}: no data")
    eps, vals = zip(*pairs)
    return fit_power(np.abs(np.log(np.asarray(eps, dtype=float))), vals, name)


def monotone_decreasing(values):
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))
