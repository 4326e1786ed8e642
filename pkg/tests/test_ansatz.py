import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfpd.ansatz import (BlowupConfig, Hole, annulus_radius, beta_system, check_balance, compute_rho, compute_scales,
                         reference_config, solve_beta, with_radii)
from mfpd.diagnostics import fit_rate
from mfpd.errors import ConfigurationError

CFG = reference_config()
EPS = np.logspace(-2, -4, 6)


def _oracle_rho():
    # closed forms written out for centers (+-0.4, 0): H(xi, xi) = log(0.84)/2pi, G = log(1.3456/0.64)/4pi
    H = math.log(0.84) / (2 * math.pi)
    G = math.log(1.3456 / 0.64) / (4 * math.pi)
    tau = 1.5
    return np.array([5 * H - 6 / tau * G, 6 * H - tau * 5 * G])


def test_rho_matches_hand_computed_values():
    assert np.allclose(compute_rho(CFG), _oracle_rho(), atol=1e-14)
    assert np.allclose(compute_rho(CFG), [-0.375290723760668, -0.610016545546193], atol=1e-14)


def test_scales_frozen_values():
    s = compute_scales(CFG, 1e-2)
    assert np.allclose(s.delta, [0.047194780509742, 0.060649039766903], rtol=1e-12)
    assert np.allclose(s.hole_radius, [1.167990747666062e-07, 9.195765061618539e-05], rtol=1e-12)
    s = compute_scales(CFG, 1e-4)
    assert np.allclose(s.delta, [0.010167807231863, 0.019178910356554], rtol=1e-12)


def test_scaling_laws_hold():
    for eps in EPS:
        s = compute_scales(CFG, eps)
        a = CFG.alphas
        assert np.allclose(s.delta**a, s.d * eps, rtol=1e-12)
        assert np.allclose(s.hole_radius ** ((a - 2) / 2), s.r * eps, rtol=1e-12)


@pytest.mark.parametrize("eps", EPS)
def test_balance_is_exact(eps):
    s = compute_scales(CFG, eps)
    assert np.max(np.abs(check_balance(CFG, s) - 2 * math.pi * (CFG.alphas - 2))) <= 1e-9


def test_balance_fails_for_perturbed_radii():
    s = compute_scales(CFG, 1e-3)
    bad = with_radii(CFG, s, s.r * np.array([1.5, 0.7]))
    assert np.max(np.abs(check_balance(CFG, bad) - 2 * math.pi * (CFG.alphas - 2))) > 1e-2


@settings(max_examples=20, deadline=None)
@given(st.floats(0.15, 0.6), st.floats(2.2, 7.0), st.floats(2.2, 7.0), st.floats(0.3, 3.0), st.floats(-5, -3))
def test_balance_property(sep, a1, a2, tau, log_eps):
    cfg = BlowupConfig([Hole((sep, 0.0), a1, True), Hole((-sep, 0.1), a2, False)], tau=tau)
    try:
        s = compute_scales(cfg, 10.0**log_eps)
    except ConfigurationError:
        return
    assert np.max(np.abs(check_balance(cfg, s) - 2 * math.pi * (cfg.alphas - 2))) <= 1e-9


def test_beta_residual_and_symmetry_of_the_system():
    s = compute_scales(CFG, 1e-3)
    M, B = beta_system(CFG, s)
    assert np.allclose(M, M.T)
    beta = solve_beta(CFG, s)
    assert np.max(np.abs(beta @ M - B)) <= 1e-12 * np.max(np.abs(B))


def test_beta_tends_to_its_leading_order():
    diag_gap, off = [], []
    for eps in np.logspace(-2, -8, 7):
        b = compute_scales(CFG, eps).beta
        diag_gap.append(np.max(np.abs(np.diag(b) - 2 * math.pi * (CFG.alphas - 2))))
        off.append(np.max(np.abs(b - np.diag(np.diag(b)))))
    assert np.all(np.diff(diag_gap) < 0)
    assert np.all(np.diff(off) < 0)
    # both gaps are O(1 / |log eps|): scaled by |log eps| they stay bounded
    logs = np.abs(np.log(np.logspace(-2, -8, 7)))
    scaled = np.array(diag_gap) * logs
    assert scaled.max() / scaled.min() < 2.0


@pytest.mark.parametrize("i", [0, 1])
def test_radius_to_scale_exponent(i):
    eps = np.logspace(-2, -6, 5)
    ratio = [compute_scales(CFG, e).hole_radius[i] / compute_scales(CFG, e).delta[i] for e in eps]
    a = CFG.alphas[i]
    fit = fit_rate(zip(eps, ratio))
    assert fit.slope == pytest.approx((a + 2) / (a * (a - 2)), abs=1e-10)


def test_lambda_values():
    assert CFG.lambda1 == pytest.approx(12 * math.pi)
    assert CFG.lambda2 == pytest.approx(16 * math.pi / 2.25)
    assert CFG.lambda1 > 8 * math.pi and CFG.lambda2 * CFG.tau**2 > 8 * math.pi


def test_annulus_radius():
    assert np.allclose(annulus_radius(CFG), [0.4, 0.4])


def test_config_collects_all_problems():
    with pytest.raises(ConfigurationError) as exc:
        BlowupConfig([Hole((0.0, 1.2), 1.5, False), Hole((0.0, 1.2), 3.0, True)], tau=-1.0,
                     V1=lambda x, y: x)
    msg = str(exc.value)
    for part in ("tau", "alpha must exceed 2", "not inside", "listed before", "share the center", "V1"):
        assert part in msg


def test_too_large_eps_is_rejected():
    one = BlowupConfig([Hole((0.2, 0.1), 3.0, True)])
    with pytest.raises(ConfigurationError, match="too large"):
        compute_scales(one, 0.5)
    with pytest.raises(ConfigurationError):
        compute_scales(one, -1.0)


def test_potential_at_the_centers_enters_the_scales():
    base = BlowupConfig([Hole((0.2, 0.1), 3.0, True)])
    scaled = BlowupConfig([Hole((0.2, 0.1), 3.0, True)], V1=lambda x, y: 2.0 + 0 * x)
    s0, s1 = compute_scales(base, 1e-3), compute_scales(scaled, 1e-3)
    assert np.allclose(s1.d, 2 * s0.d) and np.allclose(s1.r, 2 * s0.r)
