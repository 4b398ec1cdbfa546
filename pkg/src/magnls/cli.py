"""Configuration-driven command line front end.

Commands: ground, landscape, reduce, solve, sweep, check.  Every run reads
a JSON config (strict schema: unknown keys are rejected so a typo in a
tolerance name cannot silently corrupt a ladder study), writes CSV + JSON
reports stamped with the config hash, and renders PNG figures next to
them.  Exit codes: 0 ok, 2 config error, 3 non-convergence/contraction,
4 linear/eigen/Newton failure, 5 check failures, 6 domain/input errors,
7 unexpected.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .ansatz import AnsatzParams, build_ansatz
from .errors import (ConfigError, ContractionFailure, DomainError,
                     EigenSolveFailure, FlatField, GridMismatch,
                     IllConditioned, LinearSolveFailure, MagnlsError,
                     NewtonDivergence, NonConvergence, OutOfBox, ParseError,
                     SingularHessian, SupercriticalExponent, TooLarge,
                     UnknownIdentifier)
from .fields import spec_from_json
from .grids import ComplexField, build_grid, modulus_slices_csv, save_field
from .groundstate import (profile_metadata, profile_to_csv,
                          solve_ground_state)
from .landscape import (CONVENTIONS, classify_manifold, find_critical_points,
                        lambda_eval)
from .reduction import (coercivity_estimate, expansion_report, residual_norm,
                        solve_correction)
from .solver import concentration_sweep, refine_newton
from . import report as rpt

EXIT_CODES = [
    ((ConfigError,), 2),
    ((NonConvergence, ContractionFailure), 3),
    ((LinearSolveFailure, EigenSolveFailure, NewtonDivergence,
      SingularHessian, IllConditioned), 4),
    ((DomainError, SupercriticalExponent, OutOfBox, FlatField, GridMismatch,
      TooLarge, ParseError, UnknownIdentifier), 6),
]

_SCHEMA = {
    "n": int,
    "p": (int, float),
    "fields": dict,
    "grid": dict,
    "epsilons": list,
    "xi": list,
    "sigma": (int, float),
    "seeds": (list, str),
    "landscape": dict,
    "tolerances": dict,
    "convention": str,
    "seed": int,
    "threads": int,
}
_GRID_KEYS = {"L", "m", "margin", "center"}
_LANDSCAPE_KEYS = {"box", "n_starts", "cluster_tol", "newton_tol"}
_TOL_KEYS = {"fp_tol", "newton_tol", "ode_tol"}
_FIELD_KEYS = {"V", "K", "A"}


def validate_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key, value in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        if not isinstance(value, _SCHEMA[key]):
            raise ConfigError(f"config key {key!r} has wrong type")
    for block, allowed in (("grid", _GRID_KEYS),
                           ("landscape", _LANDSCAPE_KEYS),
                           ("tolerances", _TOL_KEYS),
                           ("fields", _FIELD_KEYS)):
        for key in cfg.get(block, {}):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in {block!r} block")
    tols = cfg.get("tolerances", {})
    for name, value in tols.items():
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError(f"tolerance {name!r} must be positive")
    n = cfg.get("n", 2)
    if n not in (1, 2, 3):
        raise ConfigError("n must be 1, 2 or 3")
    p = cfg.get("p", 3.0)
    conv = cfg.get("convention", "derived")
    if conv not in CONVENTIONS:
        raise ConfigError(f"convention must be one of {CONVENTIONS}")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    return validate_config(cfg)


class Run:
    """Materialized configuration for one command invocation."""

    def __init__(self, cfg, out_dir, convention=None, threads=None):
        self.cfg = cfg
        self.out = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.n = cfg.get("n", 2)
        self.p = float(cfg.get("p", 3.0))
        self.convention = convention or cfg.get("convention", "derived")
        self.threads = threads or cfg.get("threads", 1)
        tols = cfg.get("tolerances", {})
        self.fp_tol = float(tols.get("fp_tol", 1e-9))
        self.newton_tol = float(tols.get("newton_tol", 1e-9))
        self.ode_tol = float(tols.get("ode_tol", 1e-10))
        self.rng_seed = int(cfg.get("seed", 0))
        self._spec = None
        self._profile = None

    def path(self, name):
        return os.path.join(self.out, name)

    @property
    def spec(self):
        if self._spec is None:
            self._spec = spec_from_json(self.cfg.get("fields", {}), self.n)
        return self._spec

    @property
    def profile(self):
        if self._profile is None:
            self._profile = solve_ground_state(self.n, self.p, self.ode_tol)
        return self._profile

    def grid(self, center=None):
        g = self.cfg.get("grid", {})
        if "L" not in g or "m" not in g:
            raise ConfigError("grid block needs L and m")
        c = center if center is not None else g.get("center")
        return build_grid(self.n, float(g["L"]), int(g["m"]),
                          center=tuple(c) if c is not None else None)

    @property
    def grid_margin(self):
        return self.cfg.get("grid", {}).get("margin")

    def epsilons(self):
        eps = self.cfg.get("epsilons")
        if not eps:
            raise ConfigError("config needs a nonempty 'epsilons' ladder")
        return [float(e) for e in eps]

    def xi(self):
        xi = self.cfg.get("xi")
        if xi is None:
            raise ConfigError("command needs 'xi' in the config")
        return np.asarray(xi, dtype=float)

    def landscape_points(self):
        block = self.cfg.get("landscape")
        if block is None or "box" not in block:
            raise ConfigError("landscape block with 'box' required")
        box = (np.asarray(block["box"][0], float),
               np.asarray(block["box"][1], float))
        pts = find_critical_points(
            self.spec, self.p, box,
            n_starts=int(block.get("n_starts", 64)),
            newton_tol=float(block.get("newton_tol", 1e-10)),
            convention=self.convention, seed=self.rng_seed)
        return box, block, pts


def cmd_ground(run):
    prof = run.profile
    profile_to_csv(prof, run.path("profile.csv"))
    meta = profile_metadata(prof)
    rpt.write_json(run.path("profile.json"), meta, config=run.cfg,
                   convention=run.convention)
    rpt.plot_profile(prof, run.path("ground_profile.png"))
    print(f"ground state: U(0) = {prof.shoot_height:.10g}, "
          f"decay rate {prof.decay_rate:.6g}")
    return 0


def cmd_landscape(run):
    box, block, pts = run.landscape_points()
    manifolds = classify_manifold(
        pts, cluster_tol=float(block.get("cluster_tol", 0.25)))
    rows = [(list(cp.x) + [lambda_eval(run.spec, cp.x, run.p,
                                       run.convention).value, cp.kind]
             + list(cp.hessian_eigenvalues)) for cp in pts]
    header = [f"x{j+1}" for j in range(run.n)] + ["lambda", "kind"] + \
        [f"eig{j+1}" for j in range(run.n)]
    rpt.write_csv(run.path("critical_points.csv"), header,
                  [[*map(_plain, row)] for row in rows])
    payload = {"manifolds": [{
        "shape": man.shape,
        "multiplicity_bound": man.multiplicity_bound,
        "bott_nondegenerate": man.bott_nondegenerate,
        "shape_params": man.shape_params,
        "n_points": len(man.points),
        "normal_eigenvalues": man.normal_eigenvalues,
    } for man in manifolds]}
    rpt.write_json(run.path("manifolds.json"), payload, config=run.cfg,
                   convention=run.convention)
    rpt.plot_landscape(run.spec, run.p, box, manifolds,
                       run.path("landscape.png"), run.convention)
    for man in manifolds:
        print(f"manifold: {man.shape}, points {len(man.points)}, "
              f"multiplicity bound {man.multiplicity_bound}, "
              f"Bott nondegenerate {man.bott_nondegenerate}")
    return 0


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return float(v)
    return v


def cmd_reduce(run):
    xi = run.xi()
    grid = run.grid(center=xi)
    eps_ladder = run.epsilons()
    margin = run.grid_margin

    def ladder_entry(eps):
        params = AnsatzParams(eps=eps, xi=xi, sigma=0.0)
        res = residual_norm(run.profile, run.spec, params, grid,
                            margin=margin)
        red = solve_correction(run.profile, run.spec, params, grid,
                               fp_tol=run.fp_tol, margin=margin)
        coer = coercivity_estimate(run.profile, run.spec, params, grid,
                                   margin=margin)
        return res, red, coer

    if run.threads > 1:
        with ThreadPoolExecutor(run.threads) as pool:
            results = list(pool.map(ladder_entry, eps_ladder))
    else:
        results = [ladder_entry(e) for e in eps_ladder]

    exp = expansion_report(run.profile, run.spec, xi, eps_ladder, grid,
                           fp_tol=run.fp_tol, convention=run.convention,
                           with_gradient=True, margin=margin)
    rows = []
    for eps, (res, red, coer), lam, err in zip(
            eps_ladder, results, exp.lambda_values, exp.errors):
        rows.append([eps, res, red.w_norm_e, red.psi, lam, err, coer])
    rpt.write_csv(run.path("ladders.csv"),
                  ["eps", "residual_norm", "w_norm", "psi", "c1_lambda",
                   "error", "coercivity"], rows)
    payload = {
        "eps": list(exp.eps_ladder),
        "psi": list(exp.psi_values),
        "c1_lambda": list(exp.lambda_values),
        "errors": list(exp.errors),
        "slope": exp.slope,
        "c1": exp.c1,
        "grad_errors": list(exp.grad_errors),
        "grad_slope": exp.grad_slope,
        "residual_norms": [r[0] for r in results],
        "w_norms": [r[1].w_norm_e for r in results],
        "coercivity": [r[2] for r in results],
    }
    rpt.write_json(run.path("expansion.json"), payload, config=run.cfg,
                   convention=run.convention)
    rpt.plot_ladders(eps_ladder, {
        "residual": [r[0] for r in results],
        "w_norm": [r[1].w_norm_e for r in results],
        "|psi - c1*lambda|": list(exp.errors),
        "grad error": list(exp.grad_errors),
    }, run.path("reduce_ladders.png"))
    grad_note = (f"{exp.grad_slope:.3f}" if exp.grad_slope is not None
                 else "undefined (gradient at noise floor)")
    print(f"expansion slope {exp.slope:.3f}, gradient slope {grad_note}")
    return 0


def cmd_solve(run):
    eps = run.epsilons()[0]
    xi = run.xi()
    grid = run.grid(center=xi)
    params = AnsatzParams(eps=eps, xi=xi,
                          sigma=float(run.cfg.get("sigma", 0.0)))
    red = solve_correction(run.profile, run.spec, params, grid,
                           fp_tol=run.fp_tol, margin=run.grid_margin)
    z = build_ansatz(run.profile, run.spec, params, grid)
    u0 = ComplexField(grid, z.values + red.w.values)
    branch = refine_newton(u0, run.spec, eps, grid,
                           newton_tol=run.newton_tol, p=run.p)
    save_field(run.path("solution.bin"), branch.u)
    modulus_slices_csv(run.path("solution_slices.csv"), branch.u)
    payload = {
        "eps": eps, "xi": xi, "psi": red.psi, "w_norm": red.w_norm_e,
        "newton_iterations": branch.newton_iterations,
        "final_residual": branch.final_residual,
        "peak": branch.peak, "phase_gradient": branch.phase_gradient,
        "energy": branch.energy,
    }
    rpt.write_json(run.path("branch.json"), payload, config=run.cfg,
                   convention=run.convention)
    rpt.plot_solution(branch.u, run.path("solution.png"))
    print(f"solved: residual {branch.final_residual:.3e}, peak "
          f"{np.round(branch.peak, 6)}")
    return 0


def cmd_sweep(run):
    seeds_cfg = run.cfg.get("seeds", "auto")
    crit = None
    if seeds_cfg == "auto":
        _, block, pts = run.landscape_points()
        manifolds = classify_manifold(
            pts, cluster_tol=float(block.get("cluster_tol", 0.25)))
        seeds = []
        for man in manifolds:
            xs = np.array([cp.x for cp in man.points])
            if man.shape == "point" or len(xs) == 1:
                seeds.append(xs.mean(axis=0))
            else:
                s1 = xs[0]
                s2 = xs[np.argmax(np.linalg.norm(xs - s1, axis=1))]
                seeds.extend([s1, s2])
        crit = np.array([cp.x for cp in pts])
        seeds = np.array(seeds)
    else:
        seeds = np.asarray(seeds_cfg, dtype=float)
        crit = seeds
    m = int(run.cfg.get("grid", {}).get("m", 129))
    margin = run.grid_margin
    kw = {} if margin is None else {"margin": margin}
    report = concentration_sweep(run.profile, run.spec, run.epsilons(),
                                 seeds, m, critical_points=crit,
                                 fp_tol=run.fp_tol,
                                 newton_tol=run.newton_tol, **kw)
    rows = []
    for e in report.entries:
        if e.failure:
            # columns: peak_x (n), dist, phase_grad (n), psi, energy
            rows.append([e.eps, *e.seed, *(["nan"] * (2 * run.n + 3)),
                         e.failure.split(":")[0]])
        else:
            rows.append([e.eps, *e.seed, *e.peak_x, e.dist_to_critical,
                         *e.phase_gradient, e.psi, e.energy, "ok"])
    header = (["eps"] + [f"seed{j+1}" for j in range(run.n)]
              + [f"peak_x{j+1}" for j in range(run.n)] + ["dist"]
              + [f"phase_grad{j+1}" for j in range(run.n)]
              + ["psi", "energy", "status"])
    rpt.write_csv(run.path("sweep.csv"), header, rows)
    payload = {
        "eps_ladder": list(report.eps_ladder),
        "distinct_orbits": {f"{k:g}": v
                            for k, v in report.distinct_orbits.items()},
        "entries": [{
            "eps": e.eps, "seed": e.seed,
            "peak_x": e.peak_x, "dist": e.dist_to_critical,
            "phase_gradient": e.phase_gradient,
            "A_at_peak": e.seed_field_A,
            "psi": e.psi, "energy": e.energy,
            "failure": e.failure,
        } for e in report.entries],
    }
    rpt.write_json(run.path("sweep.json"), payload, config=run.cfg,
                   convention=run.convention)
    rpt.plot_sweep(report, run.path("sweep.png"))
    for eps, count in report.distinct_orbits.items():
        print(f"eps={eps:g}: {count} distinct orbit(s)")
    return 0


def cmd_check(run):
    """Fast property battery; nonzero exit on any failure."""
    from .checks import run_battery
    results = run_battery(run)
    payload = {"checks": [{"name": name, "passed": ok, "detail": detail}
                          for name, ok, detail in results]}
    rpt.write_json(run.path("check.json"), payload, config=run.cfg,
                   convention=run.convention)
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 0 if not failed else 5


COMMANDS = {
    "ground": cmd_ground,
    "landscape": cmd_landscape,
    "reduce": cmd_reduce,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="magnls",
        description="Semiclassical magnetic NLS reduction toolkit",
        epilog="Exit codes: 0 ok, 2 config, 3 non-convergence, "
               "4 solver failure, 5 check failures, 6 domain errors, "
               "7 unexpected.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=None,
                        help="output directory (default: cwd or MAGNLS_OUT)")
    parser.add_argument("--threads", type=int, default=None,
                        help="parallel ladder/sweep entries")
    parser.add_argument("--convention", choices=list(CONVENTIONS),
                        default=None,
                        help="Lambda exponent convention override")
    parser.add_argument("--version", action="version", version=__version__)
    args = parser.parse_args(argv)

    out = args.out or os.environ.get("MAGNLS_OUT") or "."
    threads = args.threads
    if threads is None and os.environ.get("MAGNLS_THREADS"):
        threads = int(os.environ["MAGNLS_THREADS"])
    convention = args.convention or os.environ.get("MAGNLS_CONVENTION")

    try:
        cfg = load_config(args.config)
        if args.command != "ground" and float(cfg.get("p", 3.0)) < 2.0:
            raise ConfigError(
                "energy operators need p >= 2; only the ground command "
                "accepts 1 < p < 2")
        run = Run(cfg, out, convention=convention, threads=threads)
        return COMMANDS[args.command](run)
    except MagnlsError as exc:
        for classes, code in EXIT_CODES:
            if isinstance(exc, classes):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return 7
    except Exception as exc:  # pragma: no cover
        print(f"unexpected error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 7


if __name__ == "__main__":
    sys.exit(main())
