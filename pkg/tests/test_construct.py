import math

import numpy as np
import pytest

from mfpd import construct, discrete, greens
from mfpd.ansatz import BlowupConfig, Hole, compute_scales, reference_config
from mfpd.errors import DomainError
from mfpd.mesh import GradingSpec, refine, triangulate

COARSE = GradingSpec(target_h_far=0.08, n_theta=32)
ONE = BlowupConfig([Hole((0.2, 0.1), 3.0, True)])


@pytest.fixture(scope="module")
def one_hole_bundles():
    sc = compute_scales(ONE, 1e-3)
    mesh = triangulate(ONE, sc, COARSE)
    return [(construct.assemble_ansatz(m, ONE, sc, "lifted"), construct.assemble_ansatz(m, ONE, sc, "plain"))
            for m in (mesh, refine(mesh))]


def test_routes_agree_to_discretization_order(one_hole_bundles):
    gaps = [np.max(np.abs(a.PU.nodal() - b.PU.nodal())) for a, b in one_hole_bundles]
    assert gaps[1] < gaps[0] / 3
    assert gaps[1] < 1e-2 * np.max(np.abs(one_hole_bundles[1][0].PU.nodal()))


def test_projection_has_zero_trace(one_hole_bundles):
    for a, b in one_hole_bundles:
        for bundle in (a, b):
            assert np.max(np.abs(bundle.PU.nodal()[bundle.mesh.boundary])) < 1e-10


def test_single_positive_hole(one_hole_bundles):
    a, _ = one_hole_bundles[0]
    assert math.isnan(a.D2_scaled)
    assert abs(a.D1_scaled - 1) < 0.01
    assert abs(construct.annulus_masses(a)[0] - 1) < 0.01
    norms = construct.residual_norms(a)
    assert np.isfinite(norms[1.05]) and np.isfinite(norms[2.0])


def test_single_negative_hole():
    cfg = BlowupConfig([Hole((0.2, 0.1), 3.0, False)], tau=2.0)
    sc = compute_scales(cfg, 1e-3)
    b = construct.assemble_ansatz(triangulate(cfg, sc, COARSE), cfg, sc)
    assert math.isnan(b.D1_scaled)
    assert abs(b.D2_scaled - 1) < 0.01
    # the negative bubble drives PU to -infinity at the hole, like -U/tau
    assert b.PU.nodal().min() < -5


def test_projection_gap_shrinks_with_eps():
    cfg = reference_config()
    gaps = []
    for eps in (1e-2, 1e-3):
        sc = compute_scales(cfg, eps)
        gaps.append(construct.projection_gap(construct.assemble_ansatz(triangulate(cfg, sc, COARSE), cfg, sc)))
    assert gaps[1] < gaps[0] / 5


def test_green_superposition_is_the_weighted_sum():
    cfg = reference_config()
    x = np.array([[0.0, 0.85], [0.6, -0.6]])
    direct = (2 * math.pi * 5 * greens.green(x, np.array([0.4, 0.0]))
              - 2 * math.pi / 1.5 * 6 * greens.green(x, np.array([-0.4, 0.0])))
    assert np.allclose(construct.green_superposition(cfg, x), direct, atol=1e-14)


def test_evaluate_at_vertices_reproduces_nodal_values(one_hole_bundles):
    a, _ = one_hole_bundles[0]
    mesh = a.mesh
    free = np.flatnonzero(mesh.anchor < 0)[:20]
    vals = construct.evaluate(a.PU, mesh.vertices[free])
    assert np.allclose(vals, a.PU.nodal()[free], atol=1e-10)
    with pytest.raises(DomainError):
        construct.locate(mesh, [[1.5, 0.0]])


def test_probe_points():
    ring, mids = construct.probe_points(reference_config())
    assert ring.shape == (16, 2)
    assert np.allclose(np.hypot(*ring.T), 0.85)
    assert np.allclose(mids, [[0.0, 0.0]])


def test_projected_bubble_without_lift_matches_plain_route(one_hole_bundles):
    a, b = one_hole_bundles[0]
    pb = construct.project_bubble(b.mesh, b.bubbles[0], b.system)
    assert np.allclose(pb.nodal(), b.projected[0].nodal())
    with pytest.raises(DomainError):
        construct.project_bubble(b.mesh, type(b.bubbles[0])((0.5, 0.5), 0.01, 3.0))
