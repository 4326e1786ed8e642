"""Singular Liouville bubbles and the kernel / test functions built from them.

A bubble with center xi, scale delta and weight alpha > 2 is

    w(x) = log(2 alpha^2 delta^alpha / (delta^alpha + |x - xi|^alpha)^2),

the finite-mass solution of  Delta w + |x - xi|^(alpha - 2) e^w = 0  in R^2.

Every function has a radial variant taking r = |x - xi| directly; the mesh code
feeds those with distances computed in hole-local coordinates so that nothing
is lost when r is many orders of magnitude below |xi|.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NumericalError


@dataclass(frozen=True)
class Bubble:
    center: tuple
    delta: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.delta > 0:
            raise ValueError(f"bubble scale must be positive, got {self.delta}")
        if not self.alpha > 2:
            raise ValueError(f"bubble weight must exceed 2, got {self.alpha}")
        k = round(self.alpha / 2)
        if abs(self.alpha - 2 * k) < 1e-9:
            warnings.warn(
                f"alpha = {self.alpha} is an even integer; the linear theory needs alpha outside 2N",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def delta_alpha(self):
        return self.delta ** self.alpha

    def radius(self, x):
        x = np.asarray(x, dtype=float)
        return np.hypot(x[..., 0] - self.center[0], x[..., 1] - self.center[1])


# radial forms; `da` is delta^alpha


def _log_denominator(alpha, da, r):
    with np.errstate(divide="ignore"):
        return np.logaddexp(math.log(da), alpha * np.log(r))


def profile(alpha, da, r):
    r = np.asarray(r, dtype=float)
    return math.log(2.0 * alpha * alpha * da) - 2.0 * _log_denominator(alpha, da, r)


def source_profile(alpha, da, r):
    r = np.asarray(r, dtype=float)
    ra = r**alpha
    return 2.0 * alpha * alpha * da * r ** (alpha - 2.0) / (da + ra) ** 2


def z0_profile(alpha, da, r):
    ra = np.asarray(r, dtype=float) ** alpha
    return (da - ra) / (da + ra)


def eta0_profile(alpha, da, r):
    ra = np.asarray(r, dtype=float) ** alpha
    return -2.0 * da / (da + ra)


def eta_profile(alpha, da, r):
    r = np.asarray(r, dtype=float)
    ra = r**alpha
    return (4.0 / 3.0) * _log_denominator(alpha, da, r) * (da - ra) / (da + ra) + (8.0 / 3.0) * da / (da + ra)


def eval_u(b, x):
    return profile(b.alpha, b.delta_alpha, b.radius(x))


def source(b, x):
    """|x - xi|^(alpha - 2) e^w, which equals -Delta w."""
    return source_profile(b.alpha, b.delta_alpha, b.radius(x))


def kernel_functions(b, y):
    """Bounded solutions Y0, Y1, Y2 of the linearized Liouville operator.

    `y` is in scaled coordinates y = (x - xi) / delta.
    """
    y = np.asarray(y, dtype=float)
    a = b.alpha
    s = np.hypot(y[..., 0], y[..., 1])
    theta = np.arctan2(y[..., 1], y[..., 0])
    sa = s**a
    y0 = (1.0 - sa) / (1.0 + sa)
    amp = s ** (a / 2.0) / (1.0 + sa)
    return y0, amp * np.cos(a * theta / 2.0), amp * np.sin(a * theta / 2.0)


def linearized_weight(alpha, s):
    """2 alpha^2 |y|^(alpha-2) / (1 + |y|^alpha)^2, the potential of the linearized operator."""
    s = np.asarray(s, dtype=float)
    return 2.0 * alpha * alpha * s ** (alpha - 2.0) / (1.0 + s**alpha) ** 2


def test_functions(b, x):
    """Z0, eta0 and eta at x.

    eta is the closed form (4/3) log(delta^a + r^a) Z0 + (8/3) delta^a / (delta^a + r^a).
    It solves  Delta eta + |x-xi|^(alpha-2) e^w eta = 2 |x-xi|^(alpha-2) e^w Z0;
    half of it solves the same equation with right-hand side |x-xi|^(alpha-2) e^w Z0.
    The gamma-tilde system is built on this closed form, so it is kept as is.
    Since Z0 = -eta0 - 1 and Delta Z0 = -|x-xi|^(alpha-2) e^w Z0, eta0 satisfies
    Delta eta0 + |x-xi|^(alpha-2) e^w eta0 = -|x-xi|^(alpha-2) e^w; the power
    alpha - 2 on the right-hand side is what the identity Z0 = -eta0 - 1 forces.
    """
    r = b.radius(x)
    a, da = b.alpha, b.delta_alpha
    return z0_profile(a, da, r), eta0_profile(a, da, r), eta_profile(a, da, r)


test_functions.__test__ = False


def _quad(f, a, b, tol):
    # quad warns about roundoff once it reaches double precision; the error
    # estimate it returns is checked by the callers instead
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, epsabs=0.0, epsrel=tol, limit=400)


def _half_line(f, tol):
    val, err = _quad(f, 0.0, np.inf, tol)
    if not np.isfinite(val) or err > max(10 * tol * abs(val), 1e-13):
        raise NumericalError(f"radial quadrature did not converge: achieved error {err:.3e} for value {val:.6e}")
    return val


def radial_identities(alpha, tol=1e-12):
    """Six whole-plane integrals evaluated by adaptive Gauss-Kronrod quadrature.

    With w(y) = 2 alpha^2 |y|^(alpha-2) / (1 + |y|^alpha)^2 the entries are

        0: int |y|^(alpha-2) / (1 + |y|^alpha)^2           = 2 pi / alpha
        1: int w Y0^2                                       = (4 pi / 3) alpha
        2: int w Y0 log|y|                                  = -4 pi
        3: int w Y0 log(1 + |y|^alpha)                      = -2 pi alpha
        4: int w / (1 + |y|^alpha)                          = 2 pi alpha
        5: int w Y0                                         = 0

    The substitution t = |y|^alpha turns each into a rational integral on (0, inf).
    """
    if not alpha > 2:
        raise ValueError("alpha must exceed 2")
    c = 4.0 * np.pi * alpha  # int w f dy = 4 pi alpha int_0^inf f(t) / (1 + t)^2 dt

    def y0(t):
        return (1.0 - t) / (1.0 + t)

    # log t is integrable at 0 but quad's infinite-range transform dislikes it; split at 1
    def split(f):
        return _half_line_split(f, tol)

    return np.array([
        (2.0 * np.pi / alpha) * _half_line(lambda t: 1.0 / (1.0 + t) ** 2, tol),
        c * _half_line(lambda t: y0(t) ** 2 / (1.0 + t) ** 2, tol),
        c * split(lambda t: y0(t) * math.log(t) / alpha / (1.0 + t) ** 2),
        c * _half_line(lambda t: y0(t) * math.log1p(t) / (1.0 + t) ** 2, tol),
        c * _half_line(lambda t: 1.0 / (1.0 + t) ** 3, tol),
        c * _half_line(lambda t: y0(t) / (1.0 + t) ** 2, tol),
    ])


def _half_line_split(f, tol):
    lo, err_lo = _quad(f, 0.0, 1.0, tol)
    hi, err_hi = _quad(f, 1.0, np.inf, tol)
    val = lo + hi
    if err_lo + err_hi > max(10 * tol * abs(val), 1e-13):
        raise NumericalError(f"radial quadrature did not converge: achieved error {err_lo + err_hi:.3e}")
    return val


CLOSED_FORMS = (
    lambda a: 2.0 * np.pi / a,
    lambda a: 4.0 * np.pi * a / 3.0,
    lambda a: -4.0 * np.pi,
    lambda a: -2.0 * np.pi * a,
    lambda a: 2.0 * np.pi * a,
    lambda a: 0.0,
)


def closed_form_identities(alpha):
    return np.array([f(alpha) for f in CLOSED_FORMS])


def mass(b, inner=0.0, outer=np.inf):
    """int of source(b, .) over the annulus inner < |x - xi| < outer.

    Exact: with t = (r / delta)^alpha the integral is 4 pi alpha [1/(1+t_in) - 1/(1+t_out)].
    """
    a, da = b.alpha, b.delta_alpha
    t_in = inner**a / da
    t_out = np.inf if np.isinf(outer) else outer**a / da
    return 4.0 * np.pi * a * (1.0 / (1.0 + t_in) - (0.0 if np.isinf(t_out) else 1.0 / (1.0 + t_out)))
