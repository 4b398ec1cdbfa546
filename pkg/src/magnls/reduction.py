"""The finite-dimensional reduction engine.

For fixed (eps, xi, sigma) the correction w solves the projected critical
point equation P grad f(z + w) = 0 with w orthogonal to the tangent frame.
Writing grad f(z + w) = grad f(z) + H(z) w + R(z, w), the fixed point
iteration is

    w_{k+1} = solve_L( -P grad f(z) - P R(z, w_k) ),

one projected MINRES solve with the frozen Hessian L = P H(z) P per outer
step; the remainder R is evaluated directly from the discrete operators.
The iteration starts at w = 0, is confined to a ball (abort when the
iterate reaches half the ansatz norm), and converges fast because R is
quadratically small in w.

The reduced value Psi(xi) = f(z + w) is compared against C1 * Lambda(eps
xi) with C1 = (1/2 - 1/(p+1)) C0; ladders over decreasing eps produce the
slopes that the acceptance suite checks.  The reduced gradient is taken in
the slow variable: (1/eps) d/dxi Psi by centered differences, which is the
object that converges to C1 * grad Lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzParams, build_ansatz, tangent_frame
from .discretization import MagneticModel
from .errors import ContractionFailure, LinearSolveFailure
from .grids import ComplexField
from .groundstate import profile_moments
from .krylov import lanczos_smallest_abs, minres
from .landscape import c0_from_moments, lambda_eval


@dataclass
class ReductionResult:
    params: AnsatzParams
    w: ComplexField
    w_norm_e: float
    psi: float
    iterations: int
    fixed_point_residual: float
    linear_solve_stats: list = field(default_factory=list)


@dataclass
class ExpansionReport:
    eps_ladder: np.ndarray
    psi_values: np.ndarray
    lambda_values: np.ndarray      # C1 * Lambda(eps xi)
    errors: np.ndarray             # |psi - C1 Lambda|
    slope: float
    c1: float
    grad_psi: np.ndarray = None    # per eps, slow-variable gradient of Psi
    grad_lambda: np.ndarray = None  # per eps, C1 * grad Lambda(eps xi)
    grad_errors: np.ndarray = None
    grad_slope: float = None


def fit_loglog_slope(eps_values, values, floor=1e-300):
    """Least-squares slope of log(value) against log(eps)."""
    x = np.log(np.asarray(eps_values, dtype=float))
    y = np.log(np.maximum(np.asarray(values, dtype=float), floor))
    x = x - x.mean()
    return float((x @ (y - y.mean())) / (x @ x))


def _setup(profile, spec, params, grid, margin=None):
    model = MagneticModel(grid, spec, params.eps, profile.p)
    kw = {} if margin is None else {"margin": margin}
    z = build_ansatz(profile, spec, params, grid, **kw)
    frame = tangent_frame(z, profile, spec, params, grid, **kw)
    return model, z.values, frame


def residual_norm(profile, spec, params, grid, margin=None):
    """Sobolev norm of the unprojected energy gradient at the bare ansatz."""
    model, z, _ = _setup(profile, spec, params, grid, margin)
    return model.norm(model.gradient(z))


def solve_correction(profile, spec, params, grid, fp_tol=1e-9, max_iter=30,
                     inner_maxiter=500, w0=None, margin=None):
    """Fixed-point solve for the orthogonal correction w.

    Raises ContractionFailure when the iterate escapes the trust ball or
    max_iter is exhausted (the semiclassical parameter is then too large
    for this xi), and LinearSolveFailure when an inner solve goes bad.
    """
    model, z, frame = _setup(profile, spec, params, grid, margin)
    z_norm = model.norm(z)

    def L_apply(v):
        return frame.project(model.hessian(z, frame.project(v)))

    g_z = model.gradient(z)
    Pg_z = frame.project(g_z)
    w = np.zeros_like(z) if w0 is None else frame.project(w0.copy())
    stats_log = []
    fp_res = model.norm(Pg_z) if w0 is None \
        else model.norm(frame.project(model.gradient(z + w)))

    def _result(it, res):
        return ReductionResult(
            params=params, w=ComplexField(grid, w.copy()),
            w_norm_e=model.norm(w), psi=model.energy(z + w),
            iterations=it, fixed_point_residual=res,
            linear_solve_stats=stats_log)

    if fp_res <= fp_tol:
        return _result(0, fp_res)
    for it in range(1, max_iter + 1):
        if it > 1 or w0 is not None:
            remainder = (model.gradient(z + w) - g_z - model.hessian(z, w))
        else:
            remainder = np.zeros_like(z)
        rhs = -(Pg_z + frame.project(remainder))
        tol = max(1e-2 * fp_res, 0.02 * fp_tol)
        w_next, st = minres(L_apply, rhs, model.inner, tol=tol,
                            maxiter=inner_maxiter, x0=w)
        stats_log.append((st.iterations, st.residual))
        if not st.converged and st.residual > 10 * tol:
            raise LinearSolveFailure(
                f"projected Hessian solve stalled at residual "
                f"{st.residual:.3e} (tol {tol:.3e})")
        w_next = frame.project(w_next)
        diff = model.norm(w_next - w)
        w = w_next
        w_norm = model.norm(w)
        if w_norm > 0.5 * z_norm:
            raise ContractionFailure(
                f"correction norm {w_norm:.3e} left the trust ball "
                f"(ansatz norm {z_norm:.3e}); eps too large?")
        fp_res = model.norm(frame.project(model.gradient(z + w)))
        # accept on the projected residual; the step-difference criterion
        # alone can jitter at the inner-solve rounding floor, so a
        # comfortably met residual concludes even if diff has not settled
        if fp_res <= fp_tol and (diff <= fp_tol or fp_res <= 0.5 * fp_tol):
            return _result(it, fp_res)
    raise ContractionFailure(
        f"correction fixed point not converged after {max_iter} iterations "
        f"(residual {fp_res:.3e})")


def reduced_functional(profile, spec, eps, xi, grid, fp_tol=1e-9,
                       margin=None):
    """Psi(xi) = f(z + w) at sigma = 0."""
    params = AnsatzParams(eps=eps, xi=np.asarray(xi, dtype=float), sigma=0.0)
    return solve_correction(profile, spec, params, grid, fp_tol=fp_tol,
                            margin=margin).psi


def expansion_report(profile, spec, xi, eps_ladder, grid_for_eps,
                     fp_tol=1e-9, convention="derived",
                     with_gradient=True, h_xi=1e-3, margin=None):
    """Per-eps expansion errors |Psi - C1 Lambda| and their fitted slope.

    grid_for_eps maps eps -> Grid (a constant function is fine); the
    centered xi-differences for the reduced gradient reuse the same grid
    so the discretization offset cancels smoothly.
    """
    eps_ladder = np.asarray(eps_ladder, dtype=float)
    if eps_ladder.size < 3 or np.any(np.diff(eps_ladder) >= 0):
        raise ContractionFailure("ladder needs >= 3 strictly decreasing eps")
    xi = np.asarray(xi, dtype=float)
    m = profile_moments(profile)
    c0 = c0_from_moments(m, convention)
    c1 = (0.5 - 1.0 / (profile.p + 1.0)) * c0

    psis, lams, grads_psi, grads_lam = [], [], [], []
    for eps in eps_ladder:
        grid = grid_for_eps(eps) if callable(grid_for_eps) else grid_for_eps
        psis.append(reduced_functional(profile, spec, eps, xi, grid, fp_tol,
                                       margin=margin))
        lams.append(c1 * lambda_eval(spec, eps * xi, profile.p,
                                     convention).value)
        if with_gradient:
            g = np.zeros(len(xi))
            for j in range(len(xi)):
                e_j = np.zeros(len(xi))
                e_j[j] = h_xi
                up = reduced_functional(profile, spec, eps, xi + e_j, grid,
                                        fp_tol, margin=margin)
                dn = reduced_functional(profile, spec, eps, xi - e_j, grid,
                                        fp_tol, margin=margin)
                g[j] = (up - dn) / (2.0 * h_xi * eps)
            grads_psi.append(g)
            grads_lam.append(c1 * lambda_eval(spec, eps * xi, profile.p,
                                              convention).gradient)
    psis = np.array(psis)
    lams = np.array(lams)
    errors = np.abs(psis - lams)
    report = ExpansionReport(
        eps_ladder=eps_ladder, psi_values=psis, lambda_values=lams,
        errors=errors, slope=fit_loglog_slope(eps_ladder, errors), c1=c1)
    if with_gradient:
        gp = np.array(grads_psi)
        gl = np.array(grads_lam)
        gerr = np.linalg.norm(gp - gl, axis=1)
        report.grad_psi = gp
        report.grad_lambda = gl
        report.grad_errors = gerr
        # at a critical point both gradients vanish and the ladder is pure
        # finite-difference noise; a fitted slope would be meaningless
        floor = 1e-7 * max(1.0, float(np.abs(psis).max()))
        if float(gerr.max()) > floor:
            report.grad_slope = fit_loglog_slope(eps_ladder, gerr)
    return report


def coercivity_estimate(profile, spec, params, grid, n_lanczos=16,
                        solve_tol=1e-7, solve_maxiter=1500, seed=7,
                        margin=None):
    """Smallest |eigenvalue| of the projected Hessian P H P restricted to
    the orthogonal complement of the tangent frame, via inverse Lanczos."""
    model, z, frame = _setup(profile, spec, params, grid, margin)

    def L_apply(v):
        return frame.project(model.hessian(z, frame.project(v)))

    return lanczos_smallest_abs(L_apply, model.inner, z, n_iter=n_lanczos,
                                solve_tol=solve_tol,
                                solve_maxiter=solve_maxiter, seed=seed,
                                project=frame.project)


def hessian_quadratic_form(profile, spec, params, grid, direction=None,
                           margin=None):
    """<H(z) v | v>_E with v = z by default (the negative-direction check)."""
    model, z, _ = _setup(profile, spec, params, grid, margin)
    v = z if direction is None else direction
    return model.inner(model.hessian(z, v), v)
