"""Mesh dependence of the linear diagnostics on the reference instance at one eps.

Refines the far-field size and the ring resolution together and prints the
smallest near-kernel eigenvalue, the inverse-norm estimates and the projected
Z0 Rayleigh quotients, to separate discretization effects from eps effects.

    python3 scripts/convergence_study.py [eps]
"""
import sys

from mfpd import construct, diagnostics
from mfpd.ansatz import compute_scales, reference_config
from mfpd.mesh import GradingSpec, triangulate

LEVELS = [(0.08, 48), (0.056, 64), (0.04, 96), (0.028, 128)]


def main():
    eps = float(sys.argv[1]) if len(sys.argv) > 1 else 1e-4
    cfg = reference_config()
    sc = compute_scales(cfg, eps)
    print(f"eps = {eps:g}")
    print(f"{'h_far':>7}{'n_theta':>9}{'vertices':>10}{'mu_min':>12}{'|L^-1|':>10}{'radial':>10}  Z0 quotients")
    for h, n in LEVELS:
        mesh = triangulate(cfg, sc, GradingSpec(target_h_far=h, n_theta=n))
        bundle = construct.assemble_ansatz(mesh, cfg, sc)
        nk = diagnostics.near_kernel_study(bundle)
        q = ", ".join(f"{v:.4f}" for v in nk.z0_quotients)
        print(f"{h:>7.3f}{n:>9d}{mesh.n_vertices:>10d}{nk.mu_min:>12.3e}{nk.inverse_norm:>10.1f}"
              f"{nk.inverse_norm_radial:>10.2f}  {q}")


if __name__ == "__main__":
    main()
