"""Command line entry point.

    mfpd ansatz CONFIG     ansatz and residual only, per eps
    mfpd solve CONFIG      ansatz and Newton solve per eps
    mfpd sweep CONFIG      solve plus linear-theory diagnostics, rate fits and plots
    mfpd verify CONFIG     identity and consistency checks
    mfpd greens --x X1,X2 --y Y1,Y2

Exit codes: 0 success, 2 some eps failed (or a verify check failed),
3 configuration error, 4 internal error.
"""
import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import bubble, construct, diagnostics, greens, pipeline, plots, solver
from .ansatz import check_balance, compute_scales
from .config import ConfigViolations, load_config
from .errors import ConfigurationError, DomainError, MfpdError, SingularityError
from .mesh import triangulate

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_INTERNAL = 0, 2, 3, 4


def csv_columns(m):
    return (["eps", "n_vertices", "res_L1.05", "res_L2", "phi_inf", "phi_h1", "D1_scaled", "D2_scaled"]
            + [f"mass_{i + 1}" for i in range(m)] + ["farfield_err", "newton_iters", "converged"])


def _f(v):
    return "%.12e" % float(v)


def results_rows(points, eps_list, m):
    """CSV rows aligned with eps_list; a failed point keeps its eps and reports NaN elsewhere."""
    rows = []
    for eps, p in zip(eps_list, points):
        if isinstance(p, Exception):
            rows.append([_f(eps), "0"] + [_f(math.nan)] * (6 + m + 1) + ["0", "false"])
            continue
        r = p.report
        rows.append([_f(p.eps), str(p.n_vertices), _f(p.res_norms[1.05]), _f(p.res_norms[2.0]), _f(r.phi_inf),
                     _f(r.phi_h1), _f(p.D1_scaled), _f(p.D2_scaled)] + [_f(v) for v in p.masses]
                    + [_f(r.farfield_err), str(r.iterations), "true" if r.converged else "false"])
    return rows


def results_csv(points, eps_list, m):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(m))
    w.writerows(results_rows(points, eps_list, m))
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def point_record(eps, p):
    if isinstance(p, Exception):
        return dict(eps=eps, error=f"{type(p).__name__}: {p}")
    r = p.report
    rec = dict(
        eps=p.eps, n_vertices=p.n_vertices, residual_norms={str(k): v for k, v in p.res_norms.items()},
        D1_scaled=p.D1_scaled, D2_scaled=p.D2_scaled, masses=p.masses, projection_gap=p.projection_gap,
        ansatz_farfield_err=p.ansatz_farfield_err,
        newton=dict(converged=r.converged, iterations=r.iterations, history=r.history, quadratic=r.quadratic,
                    contraction_ratios=r.contraction_ratios, message=r.message, clipped=r.clipped),
        phi_inf=r.phi_inf, phi_h1=r.phi_h1, solution_masses=r.masses, farfield_err=r.farfield_err,
        rim_max=r.rim_max, rim_min=r.rim_min, flux_gap=r.extras.get("flux_gap"),
    )
    for key in ("expansion_gap", "gammas", "near_kernel"):
        if key in p.extras:
            rec[key] = p.extras[key]
    return rec


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_plots(out_dir, points):
    ok = [p for p in points if not isinstance(p, Exception)]
    if not ok:
        return []
    eps = [p.eps for p in ok]
    files = {
        "residual_rate.svg": plots.line_plot(
            [("||R||_1.05", eps, [p.res_norms[1.05] for p in ok]), ("||R||_2", eps, [p.res_norms[2.0] for p in ok])],
            "Ansatz residual", "eps", "norm", xlog=True, ylog=True),
        "phi_decay.svg": plots.line_plot(
            [("||phi||_inf", eps, [p.report.phi_inf for p in ok]),
             ("||phi||_inf / |log eps|", eps, [p.report.phi_inf / abs(math.log(p.eps)) for p in ok]),
             ("|phi|_H1", eps, [p.report.phi_h1 for p in ok])],
            "Correction size", "eps", "norm", xlog=True, ylog=True),
        "farfield.svg": plots.line_plot(
            [("solution", eps, [p.report.farfield_err for p in ok]),
             ("ansatz", eps, [p.ansatz_farfield_err for p in ok])],
            "Distance to the Green superposition on |x| = 0.85", "eps", "max error", xlog=True, ylog=True),
    }
    sections = [(f"eps={p.eps:.2e}", p.extras["section"]["s"], p.extras["section"]["u"])
                for p in ok if "section" in p.extras]
    if sections:
        files["cross_section.svg"] = plots.line_plot(sections, "Solution along the line through the centers",
                                                     "arc length from the first center", "u")
    for name, text in files.items():
        write_text(os.path.join(out_dir, name), text)
    return sorted(files)


def _jobs(args, cfg):
    env = os.environ.get("MFPD_JOBS")
    if env:
        return max(1, int(env))
    if args.jobs:
        return args.jobs
    if cfg.jobs:
        return cfg.jobs
    return solver.default_jobs()


def cmd_run(args, cfg, diagnose):
    out_dir = args.output or cfg.output
    os.makedirs(out_dir, exist_ok=True)
    jobs = _jobs(args, cfg)
    points = pipeline.run_sweep(cfg.problem, cfg.eps, cfg.sweep_options, jobs=jobs,
                                run_diagnostics=diagnose and cfg.diagnostics, seed=cfg.seed)
    m = cfg.problem.m
    write_text(os.path.join(out_dir, "results.csv"), results_csv(points, cfg.eps, m))
    report = dict(config=cfg.as_dict(), points=[point_record(e, p) for e, p in zip(cfg.eps, points)])
    if diagnose:
        report["fits"] = pipeline.sweep_fits(points)
    if diagnose and cfg.plots:
        report["plots"] = write_plots(out_dir, points)
    write_text(os.path.join(out_dir, "report.json"), json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    failed = [e for e, p in zip(cfg.eps, points) if isinstance(p, Exception) or not p.report.converged]
    for e, p in zip(cfg.eps, points):
        if isinstance(p, Exception):
            print(f"eps={e:.3e}: failed ({type(p).__name__}: {p})", file=sys.stderr)
        else:
            r = p.report
            print(f"eps={e:.3e}: {'converged' if r.converged else 'NOT converged'} in {r.iterations} steps, "
                  f"|phi|_inf={r.phi_inf:.3e}, far-field error {r.farfield_err:.3e}")
    print(f"wrote {out_dir}/results.csv and report.json")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_ansatz(args, cfg):
    out_dir = args.output or cfg.output
    os.makedirs(out_dir, exist_ok=True)
    m = cfg.problem.m
    cols = (["eps", "n_vertices", "res_L1.05", "res_L2", "D1_scaled", "D2_scaled"]
            + [f"mass_{i + 1}" for i in range(m)] + ["projection_gap", "farfield_err"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for eps in cfg.eps:
        sc = compute_scales(cfg.problem, eps)
        mesh = triangulate(cfg.problem, sc, cfg.grading)
        b = construct.assemble_ansatz(mesh, cfg.problem, sc, route=cfg.route)
        norms = construct.residual_norms(b)
        gap = construct.projection_gap(b) if b.route == "lifted" else math.nan
        w.writerow([_f(eps), str(mesh.n_vertices), _f(norms[1.05]), _f(norms[2.0]), _f(b.D1_scaled),
                    _f(b.D2_scaled)] + [_f(v) for v in construct.annulus_masses(b)]
                   + [_f(gap), _f(construct.farfield_error(b.PU, cfg.problem))])
        print(f"eps={eps:.3e}: ||R||_1.05={norms[1.05]:.3e}, D scaled {b.D1_scaled:.4f} / {b.D2_scaled:.4f}")
    write_text(os.path.join(out_dir, "ansatz.csv"), buf.getvalue())
    return EXIT_OK


def verify_checks(cfg, fd_eps=None):
    """[(name, passed, detail)] for the closed-form and consistency checks."""
    out = []
    for a in (2.5, 3.0, 4.0, 5.5) + tuple(sorted(set(cfg.problem.alphas))):
        num = bubble.radial_identities(a)
        ref = bubble.closed_form_identities(a)
        err = float(np.max(np.abs(num - ref) / np.maximum(np.abs(ref), 1.0)))
        out.append((f"radial identities alpha={a:g}", err <= 1e-8, f"max relative gap {err:.2e}"))
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-0.6, 0.6, size=(20, 2))
    sym = max(abs(greens.green(pts[i], pts[i + 1]) - greens.green(pts[i + 1], pts[i])) for i in range(19))
    out.append(("Green symmetry", sym <= 1e-12, f"max gap {sym:.2e}"))
    for eps in cfg.eps:
        sc = compute_scales(cfg.problem, eps)
        bal = check_balance(cfg.problem, sc)
        target = 2 * math.pi * (cfg.problem.alphas - 2)
        err = float(np.max(np.abs(bal - target)))
        out.append((f"balance eps={eps:.3e}", err <= 1e-9, f"max gap {err:.2e}"))
        gam = diagnostics.solve_gammas(cfg.problem, sc)
        out.append((f"gamma systems eps={eps:.3e}", gam.residual <= 1e-12, f"residual {gam.residual:.2e}"))
    eps = cfg.eps[0] if fd_eps is None else fd_eps
    sc = compute_scales(cfg.problem, eps)
    b = construct.assemble_ansatz(triangulate(cfg.problem, sc, cfg.grading), cfg.problem, sc, route=cfg.route)
    gaps = solver.jacobian_fd_check(solver.NonlinearProblem(b), seed=cfg.seed)
    out.append((f"Jacobian vs finite differences eps={eps:.3e}", float(gaps.max()) <= 1e-5,
                f"max relative gap {gaps.max():.2e} over {len(gaps)} directions"))
    return out


def cmd_verify(args, cfg):
    checks = verify_checks(cfg)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    out_dir = args.output or cfg.output
    os.makedirs(out_dir, exist_ok=True)
    write_text(os.path.join(out_dir, "verify.json"),
               json.dumps(_clean([dict(name=n, passed=ok, detail=d) for n, ok, d in checks]), indent=2) + "\n")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_PARTIAL


def _point(text):
    vals = [float(v) for v in text.replace(" ", "").split(",")]
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return np.array(vals)


def cmd_greens(args):
    x, y = args.x, args.y
    try:
        print(f"G(x, y)   = {greens.green(x, y):.15e}")
    except SingularityError:
        print("G(x, y)   = singular (x = y)")
    print(f"H(x, y)   = {greens.regular_part(x, y):.15e}")
    print(f"Robin(x)  = {greens.robin(x):.15e}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mfpd", description="Blow-up solutions of the two-exponential mean field "
                                                         "equation on the pierced unit disk.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (("ansatz", "ansatz and residual only"), ("solve", "ansatz and Newton solve"),
                            ("sweep", "solve with diagnostics, fits and plots"),
                            ("verify", "identity and consistency checks")):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("config", help="JSON run configuration")
        s.add_argument("--output", help="output directory (overrides the config)")
        s.add_argument("--jobs", type=int, help="parallel eps solves (MFPD_JOBS overrides)")
    g = sub.add_parser("greens", help="Green function, regular part and Robin function at a pair of points")
    g.add_argument("--x", type=_point, required=True, help="first point, e.g. 0.1,0.2")
    g.add_argument("--y", type=_point, required=True, help="second point")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "greens":
            return cmd_greens(args)
        try:
            cfg = load_config(args.config)
        except ConfigViolations as exc:
            for path, msg in exc.violations:
                print(f"config error at {path or '/'}: {msg}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.command == "ansatz":
            return cmd_ansatz(args, cfg)
        if args.command == "verify":
            return cmd_verify(args, cfg)
        return cmd_run(args, cfg, diagnose=args.command == "sweep")
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MfpdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # last-resort guard so the exit code stays meaningful
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
