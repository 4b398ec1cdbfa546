"""The correction fixed point, reduced value, and its invariants."""

import numpy as np
import pytest

from magnls.ansatz import AnsatzParams, build_ansatz, tangent_frame
from magnls.discretization import MagneticModel, inner_e, norm_e
from magnls.errors import ContractionFailure
from magnls.fields import make_field_spec, gaussian_bump
from magnls.grids import ComplexField, build_grid
from magnls.groundstate import profile_moments
from magnls.landscape import c0_from_moments, lambda_eval
from magnls.reduction import (coercivity_estimate, expansion_report,
                              fit_loglog_slope, hessian_quadratic_form,
                              reduced_functional, residual_norm,
                              solve_correction)

CONST_SPEC = dict(V=0.3, K=1.2, A=[0.3, -0.2])


@pytest.fixture(scope="module")
def const_setting(profile_2d):
    spec = make_field_spec(2, **CONST_SPEC)
    grid = build_grid(2, 12.0, 129)
    params = AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=0.0)
    red = solve_correction(profile_2d, spec, params, grid, fp_tol=1e-9)
    return spec, grid, params, red


class TestConstantCoefficients:
    def test_w_at_floor(self, const_setting, profile_2d):
        spec, grid, params, red = const_setting
        # the ansatz is an exact continuum solution; w only absorbs the
        # h^2 truncation, which the frozen-exactness test pins to order 2
        res = residual_norm(profile_2d, spec, params, grid)
        assert red.w_norm_e < 4.0 * res

    def test_w_orthogonal_to_frame(self, const_setting, profile_2d):
        spec, grid, params, red = const_setting
        z = build_ansatz(profile_2d, spec, params, grid)
        frame = tangent_frame(z, profile_2d, spec, params, grid)
        wn = norm_e(red.w)
        for b in frame.basis:
            bf = ComplexField(grid, b)
            assert abs(inner_e(red.w, bf)) <= 1e-8 * wn * norm_e(bf)

    def test_projected_residual_below_tol(self, const_setting):
        _, _, _, red = const_setting
        assert red.fixed_point_residual <= 1e-9

    def test_sigma_independence(self, const_setting, profile_2d):
        spec, grid, params, red = const_setting
        other = solve_correction(
            profile_2d, spec,
            AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=np.pi / 2),
            grid, fp_tol=1e-9)
        assert abs(other.psi - red.psi) <= 1e-10

    def test_uniqueness_surrogate(self, const_setting, profile_2d, rng):
        spec, grid, params, red = const_setting
        z = build_ansatz(profile_2d, spec, params, grid)
        frame = tangent_frame(z, profile_2d, spec, params, grid)
        noise = frame.project(
            (rng.standard_normal(grid.shape)
             + 1j * rng.standard_normal(grid.shape)) * 1e-3
            * np.exp(-sum(c**2 for c in grid.coords) / 20))
        again = solve_correction(profile_2d, spec, params, grid,
                                 fp_tol=1e-9,
                                 w0=red.w.values + noise)
        diff = norm_e(again.w - red.w)
        assert diff <= 10 * 1e-9

    def test_sech_reduced_value(self, sech_profile):
        # n=1, V=0, K=1: Psi = C1 Lambda = 4/3
        spec = make_field_spec(1)
        grid = build_grid(1, 16.0, 2049)
        psi = reduced_functional(sech_profile, spec, 0.1, np.zeros(1), grid,
                                 fp_tol=1e-10)
        assert abs(psi - 4.0 / 3.0) < 1e-4

    def test_psi_matches_c1_lambda_up_to_floor(self, const_setting,
                                               profile_2d):
        spec, grid, params, red = const_setting
        m = profile_moments(profile_2d)
        c1 = 0.25 * c0_from_moments(m, "derived")
        lam = lambda_eval(spec, np.zeros(2), 3.0, "derived").value
        # constant coefficients: agreement up to the h^2 energy offset
        assert abs(red.psi - c1 * lam) < grid.h**2 * 3.0


class TestContractionGuards:
    def test_eps_too_large(self, profile_2d):
        spec = make_field_spec(
            2, V=gaussian_bump(2, 2.5, (0.58, 0.41), 0.6), K=1.0)
        grid = build_grid(2, 14.0, 65, center=(0.5, 0.0))
        with pytest.raises(ContractionFailure):
            solve_correction(profile_2d, spec,
                             AnsatzParams(eps=1.0, xi=np.array([0.5, 0.0]),
                                          sigma=0.0),
                             grid, fp_tol=1e-9, max_iter=8)

    def test_ladder_validation(self, profile_2d):
        spec = make_field_spec(2)
        grid = build_grid(2, 12.0, 65)
        with pytest.raises(ContractionFailure):
            expansion_report(profile_2d, spec, np.zeros(2), [0.1, 0.2],
                             grid)


class TestCoercivity:
    def test_negative_direction(self, profile_2d):
        spec = make_field_spec(2, **CONST_SPEC)
        grid = build_grid(2, 12.0, 129)
        params = AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=0.0)
        q = hessian_quadratic_form(profile_2d, spec, params, grid)
        assert q < 0

    def test_estimate_positive_and_stable(self, profile_2d):
        spec = make_field_spec(2, **CONST_SPEC)
        grid = build_grid(2, 12.0, 129)
        vals = [coercivity_estimate(
            profile_2d, spec, AnsatzParams(eps=e, xi=np.zeros(2), sigma=0.0),
            grid, n_lanczos=10) for e in (0.2, 0.1)]
        assert all(v > 0.05 for v in vals)
        assert abs(vals[0] - vals[1]) < 0.2 * vals[0]

    def test_phase_zero_mode_unprojected(self, profile_2d):
        # at a Newton-refined solution the phase direction is an exact
        # null direction of the unprojected Hessian
        from magnls.solver import refine_newton
        spec = make_field_spec(2, **CONST_SPEC)
        grid = build_grid(2, 12.0, 129)
        params = AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=0.0)
        z = build_ansatz(profile_2d, spec, params, grid)
        branch = refine_newton(z, spec, 0.1, grid, newton_tol=1e-10, p=3.0)
        model = MagneticModel(grid, spec, 0.1, 3.0)
        u = branch.u.values
        iu = 1j * u
        rayleigh = abs(model.inner(model.hessian(u, iu), iu)) \
            / model.inner(iu, iu)
        assert rayleigh <= 1e-6


class TestCriticalPointCorrespondence:
    def test_full_residual_small_at_reduced_critical_point(self, profile_2d):
        # find an interior critical point of Psi by a short damped Newton
        # on its centered-difference gradient, then check that the full
        # unprojected residual at z + w is comparably small
        spec = make_field_spec(
            2, V=gaussian_bump(2, 0.8, (0.58, 0.41), 0.6), K=1.0)
        eps = 0.1
        xi = np.array([0.58, 0.41]) / eps
        grid = build_grid(2, 11.0, 129, center=tuple(xi))
        fp_tol = 1e-10
        h_xi = 1e-3

        def psi(point):
            return reduced_functional(profile_2d, spec, eps, point, grid,
                                      fp_tol=fp_tol)

        def grad_psi(point):
            g = np.zeros(2)
            for j in range(2):
                e = np.zeros(2)
                e[j] = h_xi
                g[j] = (psi(point + e) - psi(point - e)) / (2 * h_xi)
            return g

        point = xi.copy()
        for _ in range(4):
            g = grad_psi(point)
            if np.linalg.norm(g) < 2e-7:
                break
            hess = np.zeros((2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = h_xi
                hess[j] = (grad_psi(point + e) - grad_psi(point - e)) \
                    / (2 * h_xi)
            hess = 0.5 * (hess + hess.T)
            point = point + np.linalg.solve(hess, -g)
        gnorm = np.linalg.norm(grad_psi(point))
        assert gnorm < 2e-6  # finite-difference floor of the Psi gradient

        params = AnsatzParams(eps=eps, xi=point, sigma=0.0)
        red = solve_correction(profile_2d, spec, params, grid, fp_tol=fp_tol)
        z = build_ansatz(profile_2d, spec, params, grid)
        model = MagneticModel(grid, spec, eps, 3.0)
        full_res = model.norm(model.gradient(z.values + red.w.values))
        # the frame component of the gradient vanishes with grad Psi;
        # what remains is the fp tolerance plus the FD floor scaled by
        # the frame norms (order sqrt of the Gram diagonal)
        assert full_res <= 10 * (fp_tol + gnorm * 8.0)
