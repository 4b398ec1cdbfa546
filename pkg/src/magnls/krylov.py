"""Krylov iterations in a user-supplied inner product.

The reduction solves linear systems with the projected Hessian, which is
self-adjoint in the Sobolev inner product but indefinite, so the workhorse
is MINRES written directly against that inner product (three-term
recurrence on conjugate residual directions).  The smallest-|eigenvalue|
estimate runs Lanczos on the inverse operator, each application being one
MINRES solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import EigenSolveFailure


@dataclass
class SolveStats:
    iterations: int
    residual: float
    converged: bool


def minres(apply_op, rhs, inner, tol, maxiter=500, x0=None):
    """Minimal-residual solve of op(x) = rhs, op self-adjoint in `inner`
    (indefinite allowed); classic Lanczos + Givens formulation.

    tol is absolute on the residual norm sqrt(inner(r, r)).  Returns
    (x, SolveStats); convergence failure is reported in the stats, not
    raised, so callers can decide (inexact outer iterations tolerate it).
    """
    if x0 is None:
        x = np.zeros_like(rhs)
        r1 = rhs.copy()
    else:
        x = x0.copy()
        r1 = rhs - apply_op(x)
    beta1 = np.sqrt(max(inner(r1, r1), 0.0))
    if beta1 <= tol:
        return x, SolveStats(0, beta1, True)

    y = r1.copy()
    r2 = r1.copy()
    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros_like(rhs)
    w2 = np.zeros_like(rhs)
    itn = 0
    # phibar is non-increasing; once it stops dropping the Lanczos basis
    # has degenerated (singular directions of projected operators) and
    # further iterations only inflate x along the kernel
    last_drop_itn = 0
    last_drop_val = beta1
    while itn < maxiter:
        itn += 1
        v = y / beta
        y = apply_op(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = inner(v, y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        oldb = beta
        beta = np.sqrt(max(inner(y, y), 0.0))

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.sqrt(gbar * gbar + beta * beta), 1e-300)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        if phibar <= tol or beta < 1e-14 * beta1:
            break
        if phibar < 0.97 * last_drop_val:
            last_drop_itn = itn
            last_drop_val = phibar
        elif itn - last_drop_itn >= 20:
            break
    rfin = rhs - apply_op(x)
    res = np.sqrt(max(inner(rfin, rfin), 0.0))
    return x, SolveStats(itn, res, bool(res <= 1.2 * tol))


def lanczos_smallest_abs(apply_op, inner, example, n_iter=16,
                         solve_tol=1e-7, solve_maxiter=1200, seed=7,
                         project=None):
    """Smallest |eigenvalue| of a self-adjoint operator via Lanczos on its
    inverse (inverse applications by MINRES).

    `example` supplies the array shape/dtype; `project` (optional) maps
    vectors into the invariant subspace the operator lives on.  Raises
    EigenSolveFailure if the inner solves or the Ritz extraction fail.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(example.shape) \
        + 1j * rng.standard_normal(example.shape)
    if project is not None:
        v = project(v)
    nv = np.sqrt(max(inner(v, v), 0.0))
    if nv == 0.0:
        raise EigenSolveFailure("degenerate start vector")
    v = v / nv

    vs = [v]
    alphas = []
    betas = []
    v_prev = None
    beta_prev = 0.0
    for j in range(n_iter):
        rhs = vs[-1]
        q, stats = minres(apply_op, rhs, inner,
                          tol=solve_tol, maxiter=solve_maxiter)
        # Lanczos vectors are unit, so the residual is relative; the Ritz
        # extraction tolerates solves far looser than solve_tol, just not
        # garbage ones
        if stats.residual > 1e-3:
            raise EigenSolveFailure(
                f"inverse application stalled (residual {stats.residual:.3e})")
        if project is not None:
            q = project(q)
        alpha = inner(q, vs[-1])
        q = q - alpha * vs[-1]
        if v_prev is not None:
            q = q - beta_prev * v_prev
        # full reorthogonalization; the basis is short
        for w in vs:
            q = q - inner(q, w) * w
        alphas.append(alpha)
        beta = np.sqrt(max(inner(q, q), 0.0))
        if beta < 1e-14 * max(abs(alpha), 1.0):
            break
        betas.append(beta)
        v_prev = vs[-1]
        beta_prev = beta
        vs.append(q / beta)
    if not alphas:
        raise EigenSolveFailure("Lanczos produced no Ritz values")
    k = len(alphas)
    theta = eigh_tridiagonal(np.array(alphas),
                             np.array(betas[: k - 1]),
                             eigvals_only=True)
    theta_max = float(np.max(np.abs(theta)))
    if theta_max == 0.0 or not np.isfinite(theta_max):
        raise EigenSolveFailure("inverse spectrum estimate degenerate")
    return 1.0 / theta_max
