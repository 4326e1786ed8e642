"""Parameters of the blow-up ansatz: concentration constants, scaling laws and
the matching coefficients beta.

Holes 0..m1-1 carry positive bubbles (they feed the e^u term), holes m1..m-1
carry negative ones (the e^{-tau u} term).  With a single small parameter eps,

    delta_i^alpha_i = d_i eps,        eps_i^((alpha_i - 2)/2) = r_i eps,

and d_i, r_i are fixed by the concentration constants rho_i so that the
rim-balance conditions hold exactly.
"""
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import greens
from .errors import ConfigurationError, NumericalError

Potential = Callable[[np.ndarray, np.ndarray], np.ndarray]


def constant_potential(x, y):
    return np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def _disk_samples(n=1000):
    # deterministic sunflower lattice covering the closed disk, boundary included
    k = np.arange(n)
    rad = np.sqrt((k + 0.5) / n)
    rad[-1] = 1.0
    theta = k * math.pi * (3.0 - math.sqrt(5.0))
    return rad * np.cos(theta), rad * np.sin(theta)


@dataclass(frozen=True)
class Hole:
    center: tuple
    alpha: float
    positive: bool = True

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


@dataclass(frozen=True)
class BlowupConfig:
    holes: tuple
    tau: float = 1.0
    V1: Optional[Potential] = None
    V2: Optional[Potential] = None
    V1_text: str = "1"
    V2_text: str = "1"

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))
        if self.V1 is None:
            object.__setattr__(self, "V1", constant_potential)
        if self.V2 is None:
            object.__setattr__(self, "V2", constant_potential)
        problems = self.violations()
        if problems:
            raise ConfigurationError("; ".join(problems))

    def violations(self):
        out = []
        if len(self.holes) == 0:
            out.append("at least one hole is required")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            out.append(f"tau must be a positive number, got {self.tau}")
        seen_negative = False
        for i, h in enumerate(self.holes):
            if not h.alpha > 2:
                out.append(f"hole {i}: alpha must exceed 2, got {h.alpha}")
            if h.center[0] ** 2 + h.center[1] ** 2 >= 1.0:
                out.append(f"hole {i}: center {h.center} is not inside the unit disk")
            if h.positive and seen_negative:
                out.append(f"hole {i}: positive holes must be listed before negative ones")
            seen_negative |= not h.positive
        for i, j in itertools.combinations(range(len(self.holes)), 2):
            if self.holes[i].center == self.holes[j].center:
                out.append(f"holes {i} and {j} share the center {self.holes[i].center}")
        xs, ys = _disk_samples()
        for name, pot in (("V1", self.V1), ("V2", self.V2)):
            with np.errstate(all="ignore"):
                vals = np.asarray(pot(xs, ys), dtype=float)
            if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
                out.append(f"{name} must be finite and strictly positive on the closed disk")
        return out

    @property
    def m(self):
        return len(self.holes)

    @property
    def m1(self):
        return sum(h.positive for h in self.holes)

    @property
    def centers(self):
        return np.array([h.center for h in self.holes])

    @property
    def alphas(self):
        return np.array([h.alpha for h in self.holes])

    @property
    def signs(self):
        """+1 for positive holes, -1/tau for negative ones: the weight of U_k in U."""
        return np.array([1.0 if h.positive else -1.0 / self.tau for h in self.holes])

    @property
    def lambda1(self):
        return 4.0 * math.pi * sum(h.alpha for h in self.holes if h.positive)

    @property
    def lambda2(self):
        return 4.0 * math.pi * sum(h.alpha for h in self.holes if not h.positive) / self.tau**2

    def potential_at(self, i, x):
        """V1 at a positive hole's point, V2 at a negative one's."""
        pot = self.V1 if self.holes[i].positive else self.V2
        x = np.asarray(x, dtype=float)
        return float(np.asarray(pot(x[0], x[1])))


@dataclass(frozen=True)
class ScaleParams:
    eps: float
    delta: np.ndarray
    hole_radius: np.ndarray
    d: np.ndarray
    r: np.ndarray
    rho: np.ndarray
    lambda1: float
    lambda2: float
    beta: np.ndarray
    eta: np.ndarray = field(default=None)

    @property
    def delta_alpha(self):
        return self.d * self.eps


def compute_rho(cfg):
    A = greens.green_matrix(cfg.centers)  # H on the diagonal, G off it
    w = cfg.alphas + 2.0
    m, m1, tau = cfg.m, cfg.m1, cfg.tau
    rho = np.empty(m)
    for i in range(m):
        if i < m1:
            coef = np.where(np.arange(m) < m1, 1.0, -1.0 / tau)
        else:
            coef = np.where(np.arange(m) < m1, -tau, 1.0)
        coef[i] = 1.0
        rho[i] = np.sum(coef * w * A[i])
    return rho


def annulus_radius(cfg):
    """Outer radius eta_i of the annulus around hole i: half the distance to the
    nearest other center, capped by the distance to the outer circle."""
    c = cfg.centers
    out = 1.0 - np.hypot(c[:, 0], c[:, 1])
    for i in range(cfg.m):
        for j in range(cfg.m):
            if i != j:
                out[i] = min(out[i], 0.5 * math.dist(c[i], c[j]))
    return out


def _geometry_problems(cfg, delta, hole_radius):
    c = cfg.centers
    problems = []
    for i in range(cfg.m):
        wall = 1.0 - math.hypot(*c[i])
        if hole_radius[i] > delta[i] / 4:
            problems.append(f"hole {i}: radius {hole_radius[i]:.3e} exceeds delta/4 = {delta[i] / 4:.3e}")
        if hole_radius[i] > wall / 4:
            problems.append(f"hole {i}: radius {hole_radius[i]:.3e} exceeds a quarter of its distance to the outer circle")
        for j in range(cfg.m):
            if j != i and hole_radius[i] > math.dist(c[i], c[j]) / 4:
                problems.append(f"holes {i} and {j}: radius {hole_radius[i]:.3e} exceeds a quarter of their separation")
    eta = annulus_radius(cfg)
    for i in range(cfg.m):
        if delta[i] > eta[i] / 4:
            problems.append(f"hole {i}: bubble scale {delta[i]:.3e} exceeds a quarter of its annulus radius {eta[i]:.3e}")
    return problems


def compute_scales(cfg, eps):
    if not (eps > 0 and math.isfinite(eps)):
        raise ConfigurationError(f"eps must be positive, got {eps}")
    rho = compute_rho(cfg)
    alpha = cfg.alphas
    V = np.array([cfg.potential_at(i, cfg.centers[i]) for i in range(cfg.m)])
    d = V * np.exp(2.0 * math.pi * rho) / alpha**2
    r = V * np.exp(math.pi * rho) / alpha**2
    delta = (d * eps) ** (1.0 / alpha)
    hole_radius = (r * eps) ** (2.0 / (alpha - 2.0))
    problems = _geometry_problems(cfg, delta, hole_radius)
    if problems:
        raise ConfigurationError(f"eps = {eps:g} is too large: " + "; ".join(problems))
    lam1, lam2 = cfg.lambda1, cfg.lambda2
    assert lam1 > 8 * math.pi * cfg.m1 or cfg.m1 == 0
    assert lam2 * cfg.tau**2 > 8 * math.pi * (cfg.m - cfg.m1) or cfg.m1 == cfg.m
    partial = ScaleParams(eps, delta, hole_radius, d, r, rho, lam1, lam2, beta=None, eta=annulus_radius(cfg))
    beta = solve_beta(cfg, partial)
    return ScaleParams(eps, delta, hole_radius, d, r, rho, lam1, lam2, beta=beta, eta=partial.eta)


def beta_system(cfg, scales):
    """Matrix M and right-hand sides B with beta = B M^{-1} (M is symmetric).

    Row i of beta makes  sum_k beta_ik G(., xi_k)  cancel the boundary values of
    U_i - log(2 alpha_i^2 delta_i^alpha_i) + 4 pi alpha_i H(., xi_i) on every hole rim.
    """
    A = greens.green_matrix(cfg.centers)
    M = -A.copy()
    M[np.diag_indices_from(M)] = np.log(scales.hole_radius) / (2.0 * math.pi) - np.diag(A)
    alpha = cfg.alphas
    c = cfg.centers
    B = np.empty_like(M)
    for i in range(cfg.m):
        for j in range(cfg.m):
            B[i, j] = -4.0 * math.pi * alpha[i] * greens.regular_part(c[i], c[j])
            if i == j:
                B[i, j] += 2.0 * alpha[i] * math.log(scales.delta[i])
            else:
                B[i, j] += 2.0 * alpha[i] * math.log(math.dist(c[i], c[j]))
    return M, B


def _require_diagonally_dominant(M, what):
    diag = np.abs(np.diag(M))
    off = np.sum(np.abs(M), axis=1) - diag
    if np.any(diag <= off):
        raise NumericalError(f"{what} system is not diagonally dominant; eps is too large for a reliable solve")


def solve_beta(cfg, scales):
    M, B = beta_system(cfg, scales)
    _require_diagonally_dominant(M, "beta")
    beta = np.linalg.solve(M, B.T).T
    res = np.max(np.abs(beta @ M - B)) / max(np.max(np.abs(B)), 1.0)
    if res > 1e-12:
        raise NumericalError(f"beta solve residual {res:.2e} above 1e-12")
    return beta


def check_balance(cfg, scales, beta=None):
    """Signed column sums of beta; the scaling laws make entry i equal 2 pi (alpha_i - 2)."""
    beta = scales.beta if beta is None else beta
    m1, tau = cfg.m1, cfg.tau
    pos = beta[:m1].sum(axis=0)
    neg = beta[m1:].sum(axis=0)
    out = np.empty(cfg.m)
    out[:m1] = pos[:m1] - neg[:m1] / tau
    out[m1:] = -tau * pos[m1:] + neg[m1:]
    return out


def with_radii(cfg, scales, r):
    """Scales rebuilt with a different r vector (same eps, d); used for negative controls."""
    r = np.asarray(r, dtype=float)
    hole_radius = (r * scales.eps) ** (2.0 / (cfg.alphas - 2.0))
    partial = ScaleParams(scales.eps, scales.delta, hole_radius, scales.d, r, scales.rho,
                          scales.lambda1, scales.lambda2, None, scales.eta)
    beta = solve_beta(cfg, partial)
    return ScaleParams(scales.eps, scales.delta, hole_radius, scales.d, r, scales.rho,
                       scales.lambda1, scales.lambda2, beta, scales.eta)


REFERENCE = dict(centers=((0.4, 0.0), (-0.4, 0.0)), alphas=(3.0, 4.0), m1=1, tau=1.5)


def reference_config():
    """Holes at (0.4, 0) and (-0.4, 0), alpha = (3, 4), one positive and one negative, tau = 1.5."""
    holes = [Hole(c, a, i < REFERENCE["m1"]) for i, (c, a) in enumerate(zip(REFERENCE["centers"], REFERENCE["alphas"]))]
    return BlowupConfig(holes, tau=REFERENCE["tau"])
