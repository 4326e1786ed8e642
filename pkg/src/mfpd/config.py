"""JSON run configuration: schema checks with JSON-pointer paths, then typed objects.

Example::

    {
      "domain": "unit_disk",
      "holes": [{"center": [0.4, 0.0], "alpha": 3, "sign": "positive"},
                {"center": [-0.4, 0.0], "alpha": 4, "sign": "negative"}],
      "tau": 1.5,
      "V1": "1", "V2": "1",
      "eps": {"start": 1e-2, "end": 1e-4, "points": 6},
      "mesh": {"target_h_far": 0.04},
      "solver": {"max_iter": 12},
      "output": "out",
      "plots": false,
      "seed": 0
    }
"""
import json
import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .ansatz import BlowupConfig, Hole, _disk_samples, compute_scales
from .errors import ConfigurationError, MfpdError
from .expr import Expression, ExprSyntaxError
from .mesh import GradingSpec
from .solver import SolverOptions, SweepOptions

TOP_KEYS = {"domain", "holes", "tau", "V1", "V2", "eps", "mesh", "solver", "route", "output", "plots", "seed",
            "jobs", "diagnostics"}
MESH_KEYS = {f.name for f in fields(GradingSpec)} - {"seed"}
SOLVER_KEYS = {f.name for f in fields(SolverOptions)}


class ConfigViolations(ConfigurationError):
    """All schema violations of a config, each as (JSON pointer, message)."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.violations))


@dataclass(frozen=True)
class RunConfig:
    problem: BlowupConfig
    eps: tuple
    grading: GradingSpec
    solver: SolverOptions
    route: str = "lifted"
    output: str = "mfpd_out"
    plots: bool = False
    seed: int = 0
    jobs: Optional[int] = None
    diagnostics: bool = True

    @property
    def sweep_options(self):
        return SweepOptions(grading=self.grading, solver=self.solver, route=self.route)

    def as_dict(self):
        return dict(
            domain="unit_disk",
            holes=[dict(center=list(h.center), alpha=h.alpha, sign="positive" if h.positive else "negative")
                   for h in self.problem.holes],
            tau=self.problem.tau,
            V1=self.problem.V1_text,
            V2=self.problem.V2_text,
            eps=list(self.eps),
            mesh={f.name: getattr(self.grading, f.name) for f in fields(GradingSpec)},
            solver={f.name: getattr(self.solver, f.name) for f in fields(SolverOptions)},
            route=self.route,
            output=self.output,
            plots=self.plots,
            seed=self.seed,
            jobs=self.jobs,
            diagnostics=self.diagnostics,
        )


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _potential(text, path, out):
    if not isinstance(text, str):
        out.append((path, "must be an expression string"))
        return None
    try:
        pot = Expression(text)
    except ExprSyntaxError as exc:
        out.append((path, f"syntax error: {exc}"))
        return None
    xs, ys = _disk_samples()
    vals = pot(xs, ys)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        out.append((path, "must evaluate finite and strictly positive at all 1000 sample points of the disk"))
        return None
    return pot


def _eps_values(spec, out):
    if _is_number(spec):
        if spec <= 0:
            out.append(("/eps", "must be positive"))
            return None
        return (float(spec),)
    if not isinstance(spec, dict):
        out.append(("/eps", "must be a number or an object {start, end, points}"))
        return None
    ok = True
    for key in sorted(set(spec) - {"start", "end", "points"}):
        out.append((f"/eps/{key}", "unknown key"))
        ok = False
    for key in ("start", "end"):
        v = spec.get(key)
        if not _is_number(v) or v <= 0:
            out.append((f"/eps/{key}", "must be a positive number"))
            ok = False
    n = spec.get("points")
    if not _is_int(n) or n < 1:
        out.append(("/eps/points", "must be a positive integer"))
        ok = False
    if ok and spec["start"] < spec["end"]:
        out.append(("/eps", "start must not be below end (the sweep runs toward smaller eps)"))
        ok = False
    if not ok:
        return None
    if n == 1:
        return (float(spec["start"]),)
    return tuple(float(v) for v in np.logspace(math.log10(spec["start"]), math.log10(spec["end"]), n))


def _options(section, name, keys, out):
    if section is None:
        return {}
    if not isinstance(section, dict):
        out.append((f"/{name}", "must be an object"))
        return {}
    good = {}
    for key, v in section.items():
        if key not in keys:
            out.append((f"/{name}/{key}", "unknown key"))
        elif v is not None and not _is_number(v):
            out.append((f"/{name}/{key}", "must be a number"))
        else:
            good[key] = v
    return good


def _holes(spec, out):
    if not isinstance(spec, list) or not spec:
        out.append(("/holes", "must be a non-empty array"))
        return None
    holes, ok, seen_negative = [], True, False
    for i, h in enumerate(spec):
        base = f"/holes/{i}"
        if not isinstance(h, dict):
            out.append((base, "must be an object"))
            ok = False
            continue
        for key in sorted(set(h) - {"center", "alpha", "sign"}):
            out.append((f"{base}/{key}", "unknown key"))
            ok = False
        c = h.get("center")
        if not (isinstance(c, list) and len(c) == 2 and all(_is_number(v) for v in c)):
            out.append((f"{base}/center", "must be an array of two numbers"))
            ok = False
        elif c[0] ** 2 + c[1] ** 2 >= 1.0:
            out.append((f"{base}/center", "must lie inside the unit disk"))
            ok = False
        a = h.get("alpha")
        if not _is_number(a) or a <= 2:
            out.append((f"{base}/alpha", "must be a number greater than 2"))
            ok = False
        sign = h.get("sign", "positive")
        if sign not in ("positive", "negative"):
            out.append((f"{base}/sign", "must be 'positive' or 'negative'"))
            ok = False
        elif sign == "positive" and seen_negative:
            out.append((f"{base}/sign", "positive holes must be listed before negative ones"))
            ok = False
        seen_negative |= sign == "negative"
        if ok:
            holes.append(Hole(tuple(c), float(a), sign == "positive"))
    if ok:
        centers = [h.center for h in holes]
        for i in range(len(centers)):
            for j in range(i):
                if centers[i] == centers[j]:
                    out.append((f"/holes/{i}/center", f"coincides with hole {j}"))
                    ok = False
    return holes if ok else None


def parse_config(text):
    """RunConfig from JSON text; raises ConfigViolations listing every problem found."""
    out = []
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigViolations([("", f"invalid JSON: {exc}")]) from None
    if not isinstance(data, dict):
        raise ConfigViolations([("", "top level must be an object")])
    for key in sorted(set(data) - TOP_KEYS):
        out.append((f"/{key}", "unknown key"))
    if data.get("domain", "unit_disk") != "unit_disk":
        out.append(("/domain", "only 'unit_disk' is supported"))
    holes = _holes(data.get("holes"), out)
    tau = data.get("tau", 1.0)
    if not _is_number(tau) or tau <= 0:
        out.append(("/tau", "must be a positive number"))
    V1 = _potential(data.get("V1", "1"), "/V1", out)
    V2 = _potential(data.get("V2", "1"), "/V2", out)
    eps = None
    if "eps" in data:
        eps = _eps_values(data["eps"], out)
    else:
        out.append(("/eps", "is required"))
    mesh_opts = _options(data.get("mesh"), "mesh", MESH_KEYS, out)
    solver_opts = _options(data.get("solver"), "solver", SOLVER_KEYS, out)
    route = data.get("route", "lifted")
    if route not in ("lifted", "plain"):
        out.append(("/route", "must be 'lifted' or 'plain'"))
    output = data.get("output", "mfpd_out")
    if not isinstance(output, str) or not output:
        out.append(("/output", "must be a non-empty path string"))
    for key in ("plots", "diagnostics"):
        if key in data and not isinstance(data[key], bool):
            out.append((f"/{key}", "must be true or false"))
    seed = data.get("seed", 0)
    if not _is_int(seed) or seed < 0:
        out.append(("/seed", "must be a nonnegative integer"))
    jobs = data.get("jobs")
    if jobs is not None and (not _is_int(jobs) or jobs < 1):
        out.append(("/jobs", "must be a positive integer"))

    grading = solver = problem = None
    if not any(p.startswith("/mesh") for p, _ in out):
        try:
            grading = GradingSpec(**{k: (int(v) if k in ("n_theta", "layers", "relax_iterations") and v is not None
                                         else v) for k, v in mesh_opts.items()}, seed=seed if _is_int(seed) else 0)
        except (MfpdError, ValueError, TypeError) as exc:
            out.append(("/mesh", str(exc)))
    if not any(p.startswith("/solver") for p, _ in out):
        try:
            solver = SolverOptions(**{k: (int(v) if k in ("max_iter", "max_halvings") else float(v))
                                      for k, v in solver_opts.items()})
        except (ValueError, TypeError) as exc:
            out.append(("/solver", str(exc)))
    if holes is not None and V1 is not None and V2 is not None and _is_number(tau) and tau > 0:
        try:
            problem = BlowupConfig(holes, tau=float(tau), V1=V1, V2=V2, V1_text=V1.text, V2_text=V2.text)
        except ConfigurationError as exc:
            out.append(("/holes", str(exc)))
    if problem is not None and eps is not None:
        for e in eps:
            try:
                compute_scales(problem, e)
            except MfpdError as exc:
                out.append(("/eps", str(exc)))
    if out:
        raise ConfigViolations(out)
    return RunConfig(problem, eps, grading, solver, route=route, output=output, plots=data.get("plots", False),
                     seed=seed, jobs=jobs, diagnostics=data.get("diagnostics", True))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
