"""Gauge-fixed Newton refinement and concentration sweeps.

refine_newton polishes the corrected ansatz z + w into a genuine discrete
critical point.  The linearization always has the phase direction i*u in
its kernel at a solution, so every Newton step is solved in the subspace
Sobolev-orthogonal to i*u_current; that gauge fixing is re-anchored per
step rather than pinned at a node, because node pinning fails where the
modulus is tiny.

Sweeps walk a decreasing eps ladder, re-center the box at each seed
(peaks sit at xi = x*/eps, which moves as eps changes), and record peak
location, peak phase gradient, and the distance of eps * peak to the
critical set of the auxiliary landscape.  Solutions are counted as orbits:
two refined fields are the same orbit when some global phase rotation
brings them within 10 * newton_tol in the Sobolev norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzParams, DECAY_MARGIN, build_ansatz, tangent_frame
from .discretization import MagneticModel
from .errors import (FlatField, MagnlsError, NewtonDivergence,
                     SingularHessian)
from .grids import ComplexField, build_grid
from .groundstate import scaling_factors
from .fields import eval_field
from .krylov import minres
from .reduction import solve_correction


@dataclass
class SolveBranch:
    eps: float
    seed_xi: np.ndarray
    u: ComplexField
    newton_iterations: int
    final_residual: float
    peak: np.ndarray
    phase_gradient: np.ndarray
    energy: float


@dataclass
class SweepEntry:
    eps: float
    seed: np.ndarray            # seed location in the slow variable x
    xi: np.ndarray              # seed / eps
    peak: np.ndarray = None     # x* in the fast variable
    peak_x: np.ndarray = None   # eps * x*
    dist_to_critical: float = None
    phase_gradient: np.ndarray = None
    seed_field_A: np.ndarray = None   # A at eps * x*
    psi: float = None
    energy: float = None
    w_norm: float = None
    residual: float = None
    failure: str = None
    branch: SolveBranch = None


@dataclass
class SweepReport:
    eps_ladder: np.ndarray
    entries: list = field(default_factory=list)
    distinct_orbits: dict = field(default_factory=dict)  # eps -> count

    def entries_for(self, eps):
        return [e for e in self.entries if e.eps == eps and e.failure is None]


def refine_newton(u0, spec, eps, grid, newton_tol=1e-9, p=3.0, max_iter=120,
                  inner_maxiter=600):
    """Damped gauge-fixed Newton on the Sobolev gradient.

    Backtracks on the residual norm; raises NewtonDivergence when no step
    reduces it and SingularHessian when the start is too close to the zero
    field for the gauge direction to exist (the zero field is a critical
    point whose quadratic part is degenerate along every phase rotation).
    """
    model = MagneticModel(grid, spec, eps, p)
    u = u0.values.copy()
    if model.norm(u) < 1e-10:
        raise SingularHessian(
            "start field is numerically zero; the gauge direction i*u is "
            "degenerate there")
    g = model.gradient(u)
    res = model.norm(g)
    for it in range(max_iter):
        if res <= newton_tol:
            return _branch(model, spec, eps, grid, u, it, res)
        q = 1j * u
        qn = model.norm(q)
        q = q / qn

        def project(v):
            return v - model.inner(v, q) * q

        def op(v):
            return project(model.hessian(u, project(v)))

        rhs = -project(g)
        forcing = min(0.1, res)
        step, st = minres(op, rhs, model.inner,
                          tol=max(forcing * res, 1e-14),
                          maxiter=inner_maxiter)
        if st.iterations == 0 and not st.converged:
            raise SingularHessian("Newton linearization breakdown")
        step = project(step)
        t = 1.0
        accepted = False
        while t >= 2.0**-10:
            u_try = u + t * step
            if model.norm(u_try) < 1e-12:
                t *= 0.5
                continue
            g_try = model.gradient(u_try)
            res_try = model.norm(g_try)
            if res_try < (1.0 - 1e-4 * t) * res:
                u, g, res = u_try, g_try, res_try
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise NewtonDivergence(
                f"no residual decrease from {res:.3e} at iteration {it}")
    if res <= newton_tol:
        return _branch(model, spec, eps, grid, u, max_iter, res)
    raise NewtonDivergence(
        f"Newton stopped at residual {res:.3e} > tol {newton_tol:.3e}")


def _branch(model, spec, eps, grid, u, iterations, res):
    uf = ComplexField(grid, u)
    peak, phase = peak_and_phase(uf, grid)
    return SolveBranch(eps=eps, seed_xi=np.asarray(grid.center, dtype=float),
                       u=uf, newton_iterations=iterations,
                       final_residual=res, peak=peak, phase_gradient=phase,
                       energy=model.energy(u))


def peak_and_phase(u, grid):
    """Sub-grid peak of |u| (3-point quadratic fit per axis) and the
    centered-difference gradient of the unwrapped phase at the peak node."""
    vals = np.abs(u.values)
    vmax = float(vals.max())
    if vmax <= 0.0:
        raise FlatField("field is identically zero")
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    if any(k == 0 or k == grid.m - 1 for k in idx):
        raise FlatField("modulus maximum sits on the boundary")
    h = grid.h
    sq = vals**2
    peak = np.empty(grid.n)
    phase_grad = np.empty(grid.n)
    uv = u.values
    for j in range(grid.n):
        up = list(idx); up[j] += 1
        dn = list(idx); dn[j] -= 1
        f0 = sq[idx]
        fp = sq[tuple(up)]
        fm = sq[tuple(dn)]
        curv = fm - 2.0 * f0 + fp
        if curv >= 0.0:
            raise FlatField(f"modulus maximum not isolated along axis {j}")
        peak[j] = grid.axis(j)[idx[j]] + 0.5 * h * (fm - fp) / curv
        if min(np.abs(uv[tuple(up)]), np.abs(uv[tuple(dn)])) \
                > 1e-6 * vmax:
            ratio = uv[tuple(up)] * np.conj(uv[tuple(dn)])
            phase_grad[j] = float(np.angle(ratio)) / (2.0 * h)
        else:
            phase_grad[j] = 0.0
    return peak, phase_grad


def frame_warmstart(model, u, frame, max_steps=3, cap_fraction=0.35):
    """Newton steps restricted to the tangent-frame span.

    After the orthogonal correction, the remaining gradient at z + w lies
    (almost) in the frame directions; its critical point there is the
    finite-dimensional critical point the reduction predicts.  Jumping to
    it in the frame coordinates costs a handful of Hessian applies and
    spares the full Newton a long crawl along the soliton-position valley
    (whose curvatures scale like eps^2)."""
    basis = frame.basis
    k = len(basis)
    u_norm = model.norm(u)
    for _ in range(max_steps):
        g = model.gradient(u)
        rhs = -np.array([model.inner(b, g) for b in basis])
        if np.linalg.norm(rhs) < 1e-12:
            break
        hb = [model.hessian(u, b) for b in basis]
        A = np.array([[model.inner(basis[a], hb[b]) for b in range(k)]
                      for a in range(k)])
        try:
            delta = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            break
        move = sum(d * b for d, b in zip(delta, basis))
        mn = model.norm(move)
        if mn > cap_fraction * u_norm:
            move *= cap_fraction * u_norm / mn
        u_try = u + move
        if model.norm(model.gradient(u_try)) >= model.norm(g):
            break
        u = u_try
    return u


def orbit_distance(u1, u2, model=None):
    """min over global phase of ||u1 - e^{i s} u2|| in the Sobolev norm."""
    from .discretization import _bare_inner
    if u1.grid != u2.grid:
        raise MagnlsError("orbit distance needs a common grid")
    g = u1.grid
    n1 = _bare_inner(g, u1.values, u1.values)
    n2 = _bare_inner(g, u2.values, u2.values)
    # complex pairing integral grad u1 . conj grad u2 + u1 conj u2
    h = g.h
    acc = np.vdot(u2.values, u1.values)
    for j in range(g.n):
        sl_p = [slice(None)] * g.n
        sl_m = [slice(None)] * g.n
        sl_p[j] = slice(1, None)
        sl_m[j] = slice(0, -1)
        d1 = u1.values[tuple(sl_p)] - u1.values[tuple(sl_m)]
        d2 = u2.values[tuple(sl_p)] - u2.values[tuple(sl_m)]
        acc += np.vdot(d2, d1) / h**2
    pairing = abs(complex(acc)) * h**g.n
    return float(np.sqrt(max(n1 + n2 - 2.0 * pairing, 0.0)))


def sweep_grid(n, seeds_xi, m, beta_min=1.0, margin=DECAY_MARGIN):
    """One common box covering every seed with the decay margin."""
    seeds_xi = np.atleast_2d(np.asarray(seeds_xi, dtype=float))
    center = seeds_xi.mean(axis=0)
    spread = float(np.max(np.abs(seeds_xi - center))) if len(seeds_xi) else 0.0
    L = spread + margin / beta_min
    return build_grid(n, L, m, center=tuple(center))


def concentration_sweep(profile, spec, eps_ladder, seeds, m,
                        critical_points=None, fp_tol=1e-9, newton_tol=1e-9,
                        margin=DECAY_MARGIN):
    """Reduce + refine every (eps, seed); seeds are given in the slow
    variable (critical points of the landscape) and rescaled to xi = x/eps.

    Per-entry failures are recorded and the sweep continues.  Orbits are
    deduplicated per eps at threshold 10 * newton_tol.
    """
    eps_ladder = np.asarray(eps_ladder, dtype=float)
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    report = SweepReport(eps_ladder=eps_ladder)
    crit = None
    if critical_points is not None and len(critical_points):
        crit = np.atleast_2d(np.asarray(critical_points, dtype=float))

    for eps in eps_ladder:
        xis = seeds / eps
        betas = []
        for s in seeds:
            sample = eval_field(spec, s)
            betas.append(scaling_factors(sample.V, sample.K, profile.p)[1])
        grid = sweep_grid(spec.n, xis, m, beta_min=min(betas), margin=margin)
        branches = []
        for seed, xi in zip(seeds, xis):
            entry = SweepEntry(eps=float(eps), seed=seed, xi=xi)
            report.entries.append(entry)
            try:
                params = AnsatzParams(eps=eps, xi=xi, sigma=0.0)
                red = solve_correction(profile, spec, params, grid,
                                       fp_tol=fp_tol, margin=margin)
                z = build_ansatz(profile, spec, params, grid, margin=margin)
                frame = tangent_frame(z, profile, spec, params, grid,
                                      margin=margin)
                model = MagneticModel(grid, spec, eps, profile.p)
                u_start = frame_warmstart(model, z.values + red.w.values,
                                          frame)
                u0 = ComplexField(grid, u_start)
                branch = refine_newton(u0, spec, eps, grid,
                                       newton_tol=newton_tol, p=profile.p)
                entry.branch = branch
                entry.peak = branch.peak
                entry.peak_x = eps * branch.peak
                entry.phase_gradient = branch.phase_gradient
                entry.psi = red.psi
                entry.energy = branch.energy
                entry.w_norm = red.w_norm_e
                entry.residual = branch.final_residual
                entry.seed_field_A = eval_field(spec, entry.peak_x).A
                if crit is not None:
                    entry.dist_to_critical = float(np.min(
                        np.linalg.norm(crit - entry.peak_x, axis=1)))
                branches.append(branch)
            except MagnlsError as exc:
                entry.failure = f"{type(exc).__name__}: {exc}"
        # orbit dedup on the shared grid
        distinct = []
        for b in branches:
            if all(orbit_distance(b.u, other.u) > 10 * newton_tol
                   for other in distinct):
                distinct.append(b)
        report.distinct_orbits[float(eps)] = len(distinct)
    return report
