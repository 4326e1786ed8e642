import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfpd import construct, diagnostics as dg
from mfpd.ansatz import BlowupConfig, Hole, compute_scales, reference_config
from mfpd.errors import FitError
from mfpd.mesh import GradingSpec, triangulate

COARSE = GradingSpec(target_h_far=0.08, n_theta=32)
TWO = BlowupConfig([Hole((0.35, 0.0), 3.0, True), Hole((-0.35, 0.1), 5.0, False)], tau=2.0)


@pytest.fixture(scope="module")
def bundle():
    sc = compute_scales(TWO, 1e-3)
    return construct.assemble_ansatz(triangulate(TWO, sc, COARSE), TWO, sc)


def test_gamma_systems_are_solved_exactly():
    for eps in (1e-2, 1e-5):
        g = dg.solve_gammas(TWO, compute_scales(TWO, eps))
        assert g.residual <= 1e-12


def test_gammas_approach_their_leading_order():
    ratios = []
    for eps in np.logspace(-2, -8, 4):
        sc = compute_scales(TWO, eps)
        g, p = dg.solve_gammas(TWO, sc), dg.gamma_asymptotics(TWO, sc)
        ratios.append([np.diag(g.gamma) / p["gamma"], np.diag(g.gamma_tilde) / p["gamma_tilde"],
                       g.gamma_star / p["gamma_star"]])
    gaps = np.abs(np.array(ratios) - 1.0)  # (eps, quantity, hole)
    assert np.all(np.diff(gaps, axis=0) < 0)
    assert np.all(gaps[-1, 1] < 0.1)


def test_projected_z0_has_zero_trace(bundle):
    g = dg.solve_gammas(TWO, bundle.scales)
    for j in range(2):
        pz = dg.projected_z0(bundle, g, j).nodal()
        assert np.max(np.abs(pz[bundle.mesh.boundary])) < 1e-10


def test_near_kernel_for_odd_weights(bundle):
    r = dg.near_kernel_study(bundle, n_random=6)
    assert r.converged
    assert np.all(r.z0_quotients < r.random_quotients.mean() / 5)
    # with odd alphas there is no angular kernel: the smallest modes are radial
    assert r.mu_radial == r.mu_min
    assert r.spectrum[0][2] > 0.9 and r.spectrum[1][2] > 0.9
    assert {r.spectrum[0][1], r.spectrum[1][1]} == {0, 1}
    assert r.inverse_norm == pytest.approx(1 / abs(r.mu_min))
    assert abs(r.mass_K1 - 1) < 1e-3 and abs(r.mass_K2 - 1) < 1e-3
    assert r.L_of_one < 1e-2


def test_radial_fraction(bundle):
    mesh = bundle.mesh
    off = mesh.offsets(0)
    r = np.hypot(*off.T)
    theta = np.arctan2(off[:, 1], off[:, 0])
    radial = np.exp(-r)
    angular = np.exp(-r) * np.cos(2 * theta)
    assert dg.radial_fraction(mesh, radial, 0) == pytest.approx(1.0, abs=1e-12)
    assert dg.radial_fraction(mesh, angular, 0) < 1e-10
    off1 = mesh.offsets(1)
    angular1 = np.hypot(*off1.T) * np.sin(2 * np.arctan2(off1[:, 1], off1[:, 0]))
    hole, frac = dg.classify_mode(mesh, np.where(mesh.anchor == 1, angular1, 0.0))
    assert hole == 1 and frac < 0.5


def test_rayleigh_of_random_directions_is_order_one(bundle):
    op = dg.linearized_operator(bundle)
    x = np.random.default_rng(0).standard_normal(len(op.free))
    assert 0.5 < dg.rayleigh(op, x) < 1.5


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 10), st.integers(4, 12))
def test_fit_rate_recovers_an_exact_power(slope, c, n):
    eps = np.logspace(-1, -6, n)
    fit = dg.fit_rate(zip(eps, c * eps**slope))
    assert fit.slope == pytest.approx(slope, abs=1e-12)
    if abs(slope) > 1e-3:  # r2 is meaningless for flat data
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(fit.predict(eps), c * eps**slope, rtol=1e-10)


def test_fit_log_growth_recovers_an_exact_power():
    eps = np.logspace(-2, -4, 6)
    fit = dg.fit_log_growth(zip(eps, 5 * np.abs(np.log(eps)) ** 1.3))
    assert fit.slope == pytest.approx(1.3, abs=1e-12)


def test_fit_errors_and_exclusions():
    with pytest.raises(FitError):
        dg.fit_rate([(1e-2, 1.0), (1e-3, 0.5)])
    with pytest.raises(FitError):
        dg.fit_rate([])
    with pytest.raises(FitError):
        dg.fit_rate([(e, -1.0) for e in (1e-1, 1e-2, 1e-3, 1e-4)])
    fit = dg.fit_rate([(1e-1, 1.0), (1e-2, 0.1), (1e-3, math.nan), (1e-4, 1e-3), (1e-5, 1e-4)])
    assert len(fit.notes) == 1 and fit.slope == pytest.approx(1.0)
    assert fit.as_dict()["name"] == ""


def test_monotone_decreasing():
    assert dg.monotone_decreasing([3, 2, 1])
    assert not dg.monotone_decreasing([3, 3, 1])
