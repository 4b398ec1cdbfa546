"""Radial ground state of the scalar limit problem.

Solves  U'' + (n-1)/r U' - U + U^p = 0,  U'(0) = 0,  U > 0 decaying,
by bisection on the shooting height U(0): heights that are too large give
a sign crossing, heights that are too small turn around and blow up, and
the ground state sits on the separatrix.  The r=0 singular point is
handled with the regular series start U(r) = U(0) + U''(0) r^2/2,
U''(0) = (U(0) - U(0)^p)/n.

Double-precision shooting shadows the separatrix only down to roughly
1e-7 * U(0); sampled data stops there and an exponential tail with matched
value and log-slope represents the profile beyond the last radius.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NonConvergence, SupercriticalExponent

SERIES_RADIUS = 1e-4   # switch point between the series start and the ODE
SAMPLE_STEP = 0.002    # uniform sample spacing of the stored profile
TAIL_CUT = 1e-5        # samples stop where U drops below TAIL_CUT * U(0);
#                        beyond that the bisection-width growing mode
#                        contaminates the shot (separatrix shadowing limit)


@dataclass
class Moments:
    """Radial integrals of the profile over all of R^n.

    nonlinear_mass is the integral of U^(p+1); it is the constant that
    scales the reduced-energy landscape.
    """

    mass: float             # integral of U^2
    nonlinear_mass: float   # integral of U^(p+1)
    second_moment: float    # integral of |y|^2 U^2
    fourth_moment: float    # integral of |y|^4 U^2


@dataclass
class RadialProfile:
    """Sampled radial ground state with interpolation and tail."""

    n: int
    p: float
    radii: np.ndarray      # increasing, radii[0] = 0
    values: np.ndarray     # strictly positive, strictly decreasing
    derivs: np.ndarray     # dU/dr at the radii (derivs[0] = 0)
    decay_rate: float      # fitted exponential rate of the tail
    shoot_height: float    # U(0)

    @cached_property
    def _interp(self):
        return PchipInterpolator(self.radii, self.values, extrapolate=False)

    @cached_property
    def _interp_slope_over_r(self):
        # q(r) = U'(r)/r, finite at 0 with value U''(0)
        q = np.empty_like(self.values)
        q[1:] = self.derivs[1:] / self.radii[1:]
        a = self.shoot_height
        q[0] = (a - a**self.p) / self.n
        return PchipInterpolator(self.radii, q, extrapolate=False)

    @property
    def tail_kappa(self):
        # log-slope at the last sample; matching it makes the tail C^1
        return -self.derivs[-1] / self.values[-1]

    def value(self, r):
        return profile_value(self, r)

    def slope_over_r(self, r):
        """U'(r)/r, vectorized; the radial factor of the ansatz gradient."""
        r = np.asarray(r, dtype=float)
        R = self.radii[-1]
        inside = np.clip(r, 0.0, R)
        out = np.asarray(self._interp_slope_over_r(inside))
        tail = r > R
        if np.any(tail):
            rt = np.where(tail, r, R)
            with np.errstate(divide="ignore"):
                tail_val = -self.tail_kappa * profile_value(self, rt) / rt
            out = np.where(tail, tail_val, out)
        return out if out.shape else float(out)

    def moments(self):
        return profile_moments(self)


def _validate_exponent(n, p):
    if n < 1 or int(n) != n:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    if p <= 1:
        raise SupercriticalExponent(f"exponent must exceed 1, got {p}")
    if n >= 3 and p >= (n + 2) / (n - 2):
        raise SupercriticalExponent(
            f"p={p} is not subcritical for n={n} (needs p < {(n+2)/(n-2)})")


def _shoot(n, p, a, r_max, rtol):
    """Integrate one trajectory; returns the solve_ivp solution object.

    Terminal events: sign crossing (root of U) and blow-up recrossing of
    the level U = a + 1 from below.
    """
    r0 = SERIES_RADIUS
    u2 = (a - a**p) / n
    y0 = [a + 0.5 * u2 * r0 * r0, u2 * r0]

    def rhs(r, y):
        u, w = y
        return (w, u - np.sign(u) * np.abs(u) ** p - (n - 1) / r * w)

    def cross(r, y):
        return y[0]
    cross.terminal = True
    cross.direction = -1.0

    def blow(r, y):
        return y[0] - (a + 1.0)
    blow.terminal = True
    blow.direction = 1.0

    return solve_ivp(rhs, [r0, r_max], y0, method="DOP853",
                     rtol=rtol, atol=rtol * a * 1e-2,
                     events=[cross, blow], dense_output=True)


def _crossed(sol):
    return sol.t_events[0].size > 0


def solve_ground_state(n, p, tol=1e-10, r_max=16.0):
    """Shooting + bisection solve of the radial ground state.

    tol is the bisection width on U(0); the integrator runs at
    rtol = max(tol/100, 1e-13).  Raises SupercriticalExponent for p out of
    range and NonConvergence if no crossing bracket exists in
    [2^-20, 2^20].
    """
    _validate_exponent(n, p)
    if tol <= 0:
        raise DomainError("tol must be positive")

    a_lo = 1.0
    guard = 0
    while _crossed(_shoot(n, p, a_lo, r_max, 1e-9)):
        a_lo /= 2.0
        guard += 1
        if guard > 20:
            raise NonConvergence("no blow-up trajectory found above 2^-20")
    a_hi = 2.0 * a_lo
    guard = 0
    while not _crossed(_shoot(n, p, a_hi, r_max, 1e-9)):
        a_lo = a_hi
        a_hi *= 2.0
        guard += 1
        if guard > 20:
            raise NonConvergence("no sign-crossing trajectory found below 2^20")

    # coarse bisection at modest integrator accuracy, then refine; the
    # final width sits well below tol so the growing mode seeded by the
    # bracket error stays small over the sampled range
    rtol_fine = max(tol * 1e-3, 1e-13)
    eps_a = np.finfo(float).eps * a_hi
    for width, rtol in ((max(tol, 1e-6), 1e-9),
                        (max(tol * 1e-2, 64 * eps_a), rtol_fine)):
        while a_hi - a_lo > width:
            mid = 0.5 * (a_lo + a_hi)
            if _crossed(_shoot(n, p, mid, r_max, rtol)):
                a_hi = mid
            else:
                a_lo = mid
    a = 0.5 * (a_lo + a_hi)

    sol = _shoot(n, p, a, r_max, rtol_fine)
    r_end = sol.t[-1]
    rs = np.arange(0.0, r_end, SAMPLE_STEP)
    rs[0] = SERIES_RADIUS
    uw = sol.sol(rs)
    us, ws = uw[0], uw[1]
    rs[0] = 0.0
    us[0], ws[0] = a, 0.0

    # keep the faithful, strictly decreasing part above the tail cut;
    # an upturn or a collapsing log-slope flags growing-mode contamination
    below = np.nonzero(us < TAIL_CUT * a)[0]
    stop = below[0] if below.size else len(us)
    upturn = np.nonzero(ws[1:stop] >= 0.0)[0]
    if upturn.size:
        stop = min(stop, upturn[0] + 1)
    in_tail = np.nonzero(us[:stop] < 0.05 * a)[0]
    if in_tail.size:
        k0 = in_tail[0]
        flat = np.nonzero((-ws[k0:stop] / us[k0:stop]) < 0.5)[0]
        if flat.size:
            stop = min(stop, flat[0] + k0)
    if stop < 17:
        raise NonConvergence("ground-state trajectory collapsed immediately")
    stop -= (stop - 1) % 4  # 4k+1 samples: pure Simpson at full and half step
    rs, us, ws = rs[:stop], us[:stop], ws[:stop]

    # fitted exponential decay rate over the faithful tail window
    window = (us < 1e-3 * a) & (us > 10 * TAIL_CUT * a)
    if np.count_nonzero(window) >= 8:
        coef = np.polyfit(rs[window], np.log(us[window]), 1)
        rate = -coef[0]
    else:
        rate = 1.0
    return RadialProfile(n=int(n), p=float(p), radii=rs, values=us,
                         derivs=ws, decay_rate=float(rate), shoot_height=a)


def profile_value(profile, r):
    """U at radius r >= 0 (scalar or array); exponential tail beyond the
    last sample, matched in value and log-slope."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radius must be nonnegative")
    R = profile.radii[-1]
    inside = np.clip(r, 0.0, R)
    out = np.asarray(profile._interp(inside))
    tail = r > R
    if np.any(tail):
        kappa = profile.tail_kappa
        tail_val = profile.values[-1] * np.exp(-kappa * (r - R))
        out = np.where(tail, tail_val, out)
    return out if out.shape else float(out)


def scaling_factors(V_val, K_val, p):
    """(alpha, beta) rescaling the unit ground state to frozen coefficients:
    alpha = ((1+V)/K)^(1/(p-1)), beta = (1+V)^(1/2)."""
    if 1.0 + V_val <= 0.0:
        raise DomainError(f"1+V must be positive, got {1.0 + V_val}")
    if K_val <= 0.0:
        raise DomainError(f"K must be positive, got {K_val}")
    alpha = ((1.0 + V_val) / K_val) ** (1.0 / (p - 1.0))
    beta = (1.0 + V_val) ** 0.5
    return alpha, beta


_SURFACE = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


def _surface_area(n):
    if n in _SURFACE:
        return _SURFACE[n]
    from scipy.special import gamma
    return 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)


def _tail_poly_exp(R, s, k):
    """Integral over (R, inf) of r^k e^(-s(r-R)) dr, k a small integer."""
    total = 0.0
    fact = 1.0
    for j in range(k + 1):
        total += fact * R ** (k - j) / s ** (j + 1)
        fact *= (k - j)
    return total


def profile_moments(profile, halving_tol=1e-8):
    """Radial quadrature (weight r^(n-1), surface factor) of U^2, U^(p+1),
    |y|^2 U^2, |y|^4 U^2, Simpson on the samples plus the analytic tail.

    The full-grid and half-grid Simpson values must agree to halving_tol
    relative, otherwise NonConvergence is raised.
    """
    n, p = profile.n, profile.p
    rs, us = profile.radii, profile.values
    surf = _surface_area(n)
    wgt = rs ** (n - 1)
    integrands = {
        "mass": us**2 * wgt,
        "nonlinear_mass": us ** (p + 1) * wgt,
        "second_moment": rs**2 * us**2 * wgt,
        "fourth_moment": rs**4 * us**2 * wgt,
    }
    R = rs[-1]
    uR = us[-1]
    kappa = profile.tail_kappa
    tails = {
        "mass": uR**2 * _tail_poly_exp(R, 2 * kappa, n - 1),
        "nonlinear_mass": uR ** (p + 1) * _tail_poly_exp(R, (p + 1) * kappa, n - 1),
        "second_moment": uR**2 * _tail_poly_exp(R, 2 * kappa, n + 1),
        "fourth_moment": uR**2 * _tail_poly_exp(R, 2 * kappa, n + 3),
    }
    out = {}
    for name, f in integrands.items():
        full = simpson(f, x=rs)
        half = simpson(f[::2], x=rs[::2])
        value = surf * (full + tails[name])
        # Richardson estimate: the full-step quadrature error is about
        # |full - half| / 15 for the 4th-order rule
        if abs(full - half) / 15.0 > halving_tol * max(abs(value / surf),
                                                       1e-300):
            raise NonConvergence(
                f"moment quadrature for {name} not converged: "
                f"step-halving difference {abs(full-half):.3e}")
        out[name] = float(value)
    return Moments(**out)


def scaled_moments(m, alpha, beta, n, p):
    """Moments of alpha*U(beta .) from the base moments, by the change of
    variables y -> beta*y."""
    return Moments(
        mass=alpha**2 * beta ** (-n) * m.mass,
        nonlinear_mass=alpha ** (p + 1) * beta ** (-n) * m.nonlinear_mass,
        second_moment=alpha**2 * beta ** (-n - 2) * m.second_moment,
        fourth_moment=alpha**2 * beta ** (-n - 4) * m.fourth_moment,
    )


def ode_residual_sup(profile, skip=4):
    """Sup-norm residual of the ODE on the sample radii, via 4th-order
    centered differences (verification independent of the integrator)."""
    rs, us = profile.radii, profile.values
    h = rs[1] - rs[0]
    i = np.arange(skip + 2, len(rs) - 2)
    d1 = (us[i - 2] - 8 * us[i - 1] + 8 * us[i + 1] - us[i + 2]) / (12 * h)
    d2 = (-us[i - 2] + 16 * us[i - 1] - 30 * us[i]
          + 16 * us[i + 1] - us[i + 2]) / (12 * h * h)
    res = d2 + (profile.n - 1) / rs[i] * d1 - us[i] + us[i] ** profile.p
    return float(np.max(np.abs(res)))


def profile_to_csv(profile, path):
    """Columns: r, U."""
    arr = np.column_stack([profile.radii, profile.values])
    np.savetxt(path, arr, delimiter=",", header="r,U", comments="",
               fmt="%.17g")


def profile_metadata(profile):
    m = profile.moments()
    return {
        "n": profile.n,
        "p": profile.p,
        "U0": profile.shoot_height,
        "decay_rate": profile.decay_rate,
        "moments": {
            "mass": m.mass,
            "nonlinear_mass": m.nonlinear_mass,
            "second_moment": m.second_moment,
            "fourth_moment": m.fourth_moment,
        },
    }


def profile_to_json(profile, path):
    with open(path, "w") as fh:
        json.dump(profile_metadata(profile), fh, indent=2, sort_keys=True)
        fh.write("\n")
