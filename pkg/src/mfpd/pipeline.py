"""Per-eps study (mesh, ansatz, Newton, linear diagnostics), sweeps and rate fits."""
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import construct, diagnostics
from .errors import DomainError, FitError
from .solver import SweepOptions, solve_one


def section_line(cfg, n=401):
    """Points on the chord through the first two centers (horizontal for one hole)."""
    c = cfg.centers
    p = c[0]
    d = c[1] - c[0] if cfg.m > 1 else np.array([1.0, 0.0])
    d = d / np.linalg.norm(d)
    # chord p + s d inside the unit circle
    b = float(p @ d)
    disc = math.sqrt(b * b - float(p @ p) + 1.0)
    s = np.linspace(-b - disc, -b + disc, n)[1:-1]
    return p[None, :] + s[:, None] * d[None, :], s


def cross_section(bundle, phi, n=401):
    """u = PU + phi and PU along the section line; NaN inside holes."""
    cfg, sc = bundle.cfg, bundle.scales
    x, s = section_line(cfg, n)
    inside = np.zeros(len(x), dtype=bool)
    for i in range(cfg.m):
        inside |= np.hypot(*(x - cfg.centers[i]).T) <= 1.01 * sc.hole_radius[i]
    u = np.full(len(x), np.nan)
    pu = np.full(len(x), np.nan)
    keep = np.flatnonzero(~inside)
    try:
        u[keep] = construct.evaluate(bundle.PU, x[keep], extra=phi)
        pu[keep] = construct.evaluate(bundle.PU, x[keep])
    except DomainError:
        pass
    return dict(s=s.tolist(), x=x[:, 0].tolist(), y=x[:, 1].tolist(), u=u.tolist(), PU=pu.tolist())


def _near_kernel_summary(nk):
    return dict(
        z0_quotients=nk.z0_quotients.tolist(),
        random_quotients=nk.random_quotients.tolist(),
        mu_min=nk.mu_min,
        inverse_norm=nk.inverse_norm,
        mu_radial=nk.mu_radial,
        inverse_norm_radial=nk.inverse_norm_radial,
        spectrum=[dict(mu=m, hole=h, radial_fraction=f) for m, h, f in nk.spectrum],
        converged=nk.converged,
        c_tilde_z0=nk.c_tilde_z0.tolist(),
        c_tilde_mode=nk.c_tilde_mode.tolist(),
        mass_K1=nk.mass_K1,
        mass_K2=nk.mass_K2,
        L_of_one=nk.L_of_one,
        notes=list(nk.notes),
    )


def analyze_point(cfg, eps, sweep_opts=None, run_diagnostics=True, seed=0, keep=False):
    """solve_one plus near-hole expansion, gamma systems, near-kernel study and a cross-section."""
    sweep_opts = sweep_opts or SweepOptions()
    point = solve_one(cfg, eps, sweep_opts, keep=True)
    bundle, phi = point.extras["bundle"], point.extras["phi"]
    point.extras["expansion_gap"] = construct.near_hole_expansion(bundle).tolist()
    point.extras["section"] = cross_section(bundle, phi)
    if run_diagnostics:
        gam = diagnostics.solve_gammas(cfg, bundle.scales)
        pred = diagnostics.gamma_asymptotics(cfg, bundle.scales)
        point.extras["gammas"] = dict(
            gamma_diag=np.diag(gam.gamma).tolist(),
            gamma_tilde_diag=np.diag(gam.gamma_tilde).tolist(),
            gamma_star=gam.gamma_star.tolist(),
            residual=gam.residual,
            predicted={k: v.tolist() for k, v in pred.items()},
        )
        point.extras["near_kernel"] = _near_kernel_summary(diagnostics.near_kernel_study(bundle, seed=seed))
    if not keep:
        for key in ("bundle", "phi", "scales", "mesh"):
            point.extras.pop(key, None)
    return point


def _task(args):
    cfg, eps, sweep_opts, run_diagnostics, seed = args
    try:
        return analyze_point(cfg, eps, sweep_opts, run_diagnostics, seed)
    except Exception as exc:  # recorded per point; the sweep continues
        return exc


def run_sweep(cfg, eps_list, sweep_opts=None, jobs=1, run_diagnostics=True, seed=0):
    """analyze_point over eps_list (largest first); entries are SweepPoint or the exception raised."""
    tasks = [(cfg, float(e), sweep_opts, run_diagnostics, seed) for e in eps_list]
    if jobs <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_task, tasks))


# fits over a sweep


def _series(points, getter):
    eps, vals = [], []
    for p in points:
        try:
            v = float(getter(p))
        except (KeyError, TypeError, IndexError):
            continue
        eps.append(p.eps)
        vals.append(v)
    return eps, vals


def sweep_fits(points):
    """Rate fits for every swept quantity, keyed by name; failed fits carry an 'error' entry."""
    pts = [p for p in points if not isinstance(p, Exception)]
    m = len(pts[0].masses) if pts else 0
    rate = {
        "projection_gap": lambda p: p.projection_gap,
        "res_L1.05": lambda p: p.res_norms[1.05],
        "res_L2": lambda p: p.res_norms[2.0],
        "D1_scaled_minus_1": lambda p: abs(p.D1_scaled - 1.0),
        "D2_scaled_minus_1": lambda p: abs(p.D2_scaled - 1.0),
        "phi_inf_over_log": lambda p: p.report.phi_inf / abs(math.log(p.eps)),
        "farfield_err": lambda p: p.report.farfield_err,
        "ansatz_farfield_err": lambda p: p.ansatz_farfield_err,
    }
    for i in range(m):
        rate[f"mass_{i + 1}_minus_1"] = lambda p, i=i: abs(p.masses[i] - 1.0)
    growth = {
        "inverse_norm": lambda p: p.extras["near_kernel"]["inverse_norm"],
        "inverse_norm_radial": lambda p: p.extras["near_kernel"]["inverse_norm_radial"],
    }
    for i in range(m):
        growth[f"z0_quotient_{i + 1}"] = lambda p, i=i: p.extras["near_kernel"]["z0_quotients"][i]
    out = {}
    for kind, table, fit in (("eps", rate, diagnostics.fit_rate), ("log_eps", growth, diagnostics.fit_log_growth)):
        for name, getter in table.items():
            eps, vals = _series(pts, getter)
            try:
                res = fit(list(zip(eps, vals)), name=name).as_dict()
                res["against"] = kind
            except FitError as exc:
                res = dict(name=name, against=kind, error=str(exc))
            out[name] = res
    return out
