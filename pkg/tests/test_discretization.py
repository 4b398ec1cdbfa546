"""Grid, discrete energy, its exact derivatives, and the inner product."""

import numpy as np
import pytest

from magnls.discretization import (MagneticModel, energy, energy_gradient,
                                   hessian_apply, inner_e, magnetic_gradient,
                                   norm_e)
from magnls.errors import DomainError, GridMismatch, TooLarge
from magnls.fields import make_field_spec, gaussian_bump
from magnls.grids import (ComplexField, build_grid, field_from_function,
                          load_field, modulus_slices_csv, save_field)


class TestGrid:
    def test_spacing(self):
        grid = build_grid(2, 12.0, 129)
        assert grid.h == 24.0 / 128.0

    def test_too_small(self):
        with pytest.raises(DomainError):
            build_grid(2, 12.0, 8)

    def test_too_large(self):
        with pytest.raises(TooLarge):
            build_grid(3, 10.0, 600)

    def test_centered(self):
        grid = build_grid(2, 5.0, 33, center=(2.0, -1.0))
        assert grid.axis(0)[0] == -3.0
        assert grid.axis(1)[-1] == 4.0

    def test_boundary_zeroed(self):
        grid = build_grid(2, 5.0, 33)
        f = ComplexField(grid, np.ones(grid.shape, dtype=complex))
        assert np.all(f.values[0, :] == 0)
        assert np.all(f.values[:, -1] == 0)
        assert np.all(f.values[1:-1, 1:-1] == 1)


def _smooth(grid, rng, width=4.0):
    env = np.exp(-sum(c**2 for c in grid.coords) / width)
    vals = (rng.standard_normal(grid.shape)
            + 1j * rng.standard_normal(grid.shape)) * env
    return ComplexField(grid, vals)


@pytest.fixture(scope="module")
def setup():
    grid = build_grid(2, 8.0, 49)
    spec = make_field_spec(2, V=gaussian_bump(2, 0.6, (0.2, -0.3), 1.1),
                           K="1+0.3*exp(-(x1^2+x2^2))",
                           A=["0.3-0.1*x2", "0.2*x1"])
    model = MagneticModel(grid, spec, 0.4, 3.0)
    return grid, spec, model


class TestMagneticGradient:
    def test_real_field_zero_A(self, rng):
        grid = build_grid(2, 6.0, 33)
        spec = make_field_spec(2)
        u = field_from_function(grid,
                                lambda x, y: np.exp(-(x**2 + y**2) / 2))
        comps = magnetic_gradient(u, spec, 0.3)
        for comp in comps:
            assert np.abs(comp.values.real).max() < 1e-14
            assert np.abs(comp.values.imag).max() > 0

    def test_gauge_identity_constant_A(self):
        # u = e^{i a.x} phi with A = a/eps at scale... A(eps x) must equal
        # a at the nodes, so take constant A = a and phase a.x
        grid = build_grid(2, 6.0, 65)
        a = np.array([0.4, -0.3])
        spec = make_field_spec(2, A=list(a))
        phi = field_from_function(grid,
                                  lambda x, y: np.exp(-(x**2 + y**2) / 2))
        u = field_from_function(
            grid, lambda x, y: np.exp(1j * (a[0] * x + a[1] * y))
            * np.exp(-(x**2 + y**2) / 2))
        comps_u = magnetic_gradient(u, spec, 0.7)
        comps_phi = magnetic_gradient(phi, make_field_spec(2), 0.7)
        # |(D/i - a) u| = |D phi| up to the O(h^2) of the centered stencil
        mod_u = np.sqrt(sum(np.abs(c.values) ** 2 for c in comps_u))
        mod_phi = np.sqrt(sum(np.abs(c.values) ** 2 for c in comps_phi))
        assert np.abs(mod_u - mod_phi).max() < 0.5 * grid.h**2

    def test_zero_field(self):
        grid = build_grid(2, 6.0, 33)
        spec = make_field_spec(2, A=[0.5, 0.1])
        comps = magnetic_gradient(grid.zero_field(), spec, 0.3)
        for comp in comps:
            assert np.all(comp.values == 0)


class TestEnergy:
    def test_zero_field(self, setup):
        grid, spec, model = setup
        assert model.energy(np.zeros(grid.shape, dtype=complex)) == 0.0

    def test_sech_value(self, sech_profile):
        # f = 1/2 (int U'^2 + U^2) - 1/4 int U^4 = 4/3 by the Nehari identity
        grid = build_grid(1, 16.0, 2049)
        spec = make_field_spec(1)
        u = field_from_function(grid, lambda x: np.sqrt(2) / np.cosh(x))
        rep = energy(u, spec, 0.3, 3.0)
        assert abs(rep.total - 4.0 / 3.0) < 2e-4

    def test_phase_invariance_exact(self, setup, rng):
        grid, spec, model = setup
        u = _smooth(grid, rng).values
        e1 = model.energy(u)
        e2 = model.energy(np.exp(1j * np.pi / 3) * u)
        assert abs(e1 - e2) <= 1e-12 * max(1.0, abs(e1))

    def test_report_recombines(self, setup, rng):
        grid, spec, model = setup
        rep = model.energy_report(_smooth(grid, rng).values)
        assert rep.total == rep.kinetic + rep.potential - rep.nonlinear

    def test_p_restriction(self, setup):
        grid, spec, _ = setup
        with pytest.raises(DomainError):
            MagneticModel(grid, spec, 0.4, 1.5)


class TestGradient:
    def test_directional_derivative(self, setup, rng):
        grid, spec, model = setup
        worst = 0.0
        for _ in range(25):
            u = _smooth(grid, rng).values
            v = _smooth(grid, rng).values
            g = model.gradient(u)
            t = 1e-5
            fd = (model.energy(u + t * v) - model.energy(u - t * v)) / (2 * t)
            an = model.inner(g, v)
            worst = max(worst, abs(fd - an) / max(abs(fd), 1e-14))
        assert worst < 1e-6

    def test_zero_field(self, setup):
        grid, spec, model = setup
        g = model.gradient(np.zeros(grid.shape, dtype=complex))
        assert np.all(g == 0)

    def test_frozen_exactness(self, profile_2d):
        # constant coefficients: the ansatz solves the continuum equation,
        # so the discrete residual is pure truncation, of order >= 1.9
        from magnls.ansatz import AnsatzParams
        from magnls.reduction import fit_loglog_slope, residual_norm
        spec = make_field_spec(2, V=0.3, K=1.2, A=[0.3, -0.2])
        params = AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=0.4)
        vals, hs = [], []
        for m in (65, 129, 257):
            grid = build_grid(2, 12.0, m)
            vals.append(residual_norm(profile_2d, spec, params, grid))
            hs.append(grid.h)
        order = fit_loglog_slope(hs, vals)
        assert order >= 1.9


class TestHessian:
    def test_symmetry(self, setup, rng):
        grid, spec, model = setup
        u = _smooth(grid, rng).values
        v = _smooth(grid, rng).values
        w = _smooth(grid, rng).values
        s1 = model.inner(model.hessian(u, v), w)
        s2 = model.inner(model.hessian(u, w), v)
        assert abs(s1 - s2) <= 1e-10 * max(abs(s1), 1.0)

    def test_second_difference(self, setup, rng):
        grid, spec, model = setup
        u = _smooth(grid, rng).values
        v = _smooth(grid, rng).values
        t = 1e-4
        d2 = (model.energy(u + t * v) - 2 * model.energy(u)
              + model.energy(u - t * v)) / t**2
        hv = model.inner(model.hessian(u, v), v)
        assert abs(d2 - hv) / max(abs(d2), 1e-14) < 1e-5

    def test_zero_direction(self, setup, rng):
        grid, spec, model = setup
        u = _smooth(grid, rng).values
        hv = model.hessian(u, np.zeros_like(u))
        assert np.all(hv == 0)

    def test_phase_direction_near_critical(self, profile_2d):
        # at the frozen-coefficient ansatz, H(iz) = i grad f(z) up to
        # rounding, so its norm sits at the h^2 truncation floor
        from magnls.ansatz import AnsatzParams, build_ansatz
        spec = make_field_spec(2, V=0.3, K=1.2, A=[0.3, -0.2])
        grid = build_grid(2, 12.0, 129)
        params = AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=0.0)
        z = build_ansatz(profile_2d, spec, params, grid)
        model = MagneticModel(grid, spec, 0.1, 3.0)
        g_norm = model.norm(model.gradient(z.values))
        hiz = model.hessian(z.values, 1j * z.values)
        assert abs(model.norm(hiz) - g_norm) < 1e-10 * max(1.0, g_norm)

    def test_p2_boundary_case(self, setup, rng):
        # |u|^{p-3} factor at p=2 is masked where u = 0; finite output
        grid, spec, _ = setup
        model = MagneticModel(grid, spec, 0.4, 2.0)
        u = _smooth(grid, rng).values
        u[10:12, :] = 0.0
        hv = model.hessian(u, _smooth(grid, rng).values)
        assert np.all(np.isfinite(hv))


class TestInnerProduct:
    def test_positivity(self, setup, rng):
        grid, _, _ = setup
        u = _smooth(grid, rng)
        assert inner_e(u, u) > 0

    def test_iu_orthogonal(self, setup, rng):
        grid, _, _ = setup
        u = _smooth(grid, rng)
        iu = ComplexField(grid, 1j * u.values)
        assert abs(inner_e(u, iu)) <= 1e-12 * inner_e(u, u)

    def test_bilinearity(self, setup, rng):
        grid, _, _ = setup
        u, v, w = (_smooth(grid, rng) for _ in range(3))
        lhs = inner_e(ComplexField(grid, 2.0 * u.values - 0.7 * v.values), w)
        rhs = 2.0 * inner_e(u, w) - 0.7 * inner_e(v, w)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)

    def test_grid_mismatch(self, rng):
        g1 = build_grid(2, 6.0, 33)
        g2 = build_grid(2, 6.0, 49)
        with pytest.raises(GridMismatch):
            inner_e(_smooth(g1, rng), _smooth(g2, rng))


class TestBoundsAndCovariance:
    def test_diamagnetic_bound(self, rng):
        # pointwise |a-b|^2 >= |a|^2/2 - |b|^2 integrates to the bound
        # int |(D/i - A(xi))u|^2 + |u|^2 >= 1/2 int|Du|^2
        #   + int (1 - |A(xi)|^2)|u|^2
        grid = build_grid(2, 6.0, 49)
        a = np.array([0.35, -0.55])
        spec_a = make_field_spec(2, A=list(a))
        spec_0 = make_field_spec(2)
        hn = grid.h ** 2
        for _ in range(10):
            u = _smooth(grid, rng)
            mg = magnetic_gradient(u, spec_a, 0.3)
            lhs = hn * (sum(np.sum(np.abs(c.values) ** 2) for c in mg)
                        + np.sum(np.abs(u.values) ** 2))
            dg = magnetic_gradient(u, spec_0, 0.3)
            rhs = hn * (0.5 * sum(np.sum(np.abs(c.values) ** 2) for c in dg)
                        + (1 - a @ a) * np.sum(np.abs(u.values) ** 2))
            assert lhs >= rhs - 1e-12 * abs(lhs)

    def test_constant_shift_gauge_covariance(self, rng):
        grid = build_grid(2, 8.0, 49)
        c = np.array([0.25, -0.4])
        spec1 = make_field_spec(2, V="0.2*x1", K=1.0, A=[0.1, -0.2])
        spec2 = make_field_spec(2, V="0.2*x1", K=1.0,
                                A=[0.1 + c[0], -0.2 + c[1]])
        u = _smooth(grid, rng)
        ramp = np.exp(1j * (c[0] * grid.coords[0] + c[1] * grid.coords[1]))
        e1 = energy(u, spec1, 0.4, 3.0).total
        e2 = energy(ComplexField(grid, ramp * u.values), spec2, 0.4,
                    3.0).total
        # exact for the link discretization, far below the C h^2 allowance
        assert abs(e1 - e2) <= 1e-11 * max(1.0, abs(e1))


class TestThreeDimensional:
    def test_gradient_consistency_3d(self, rng):
        grid = build_grid(3, 4.0, 17)
        spec = make_field_spec(3, V="0.2*exp(-(x1^2+x2^2+x3^2))",
                               K=1.0, A=["0.1*x2", "0.0-0.1*x1", "0.05"])
        model = MagneticModel(grid, spec, 0.3, 3.0)
        env = np.exp(-sum(c**2 for c in grid.coords) / 2.0)
        u = ComplexField(grid, (rng.standard_normal(grid.shape)
                                + 1j * rng.standard_normal(grid.shape))
                         * env).values
        v = ComplexField(grid, (rng.standard_normal(grid.shape)
                                + 1j * rng.standard_normal(grid.shape))
                         * env).values
        t = 1e-5
        fd = (model.energy(u + t * v) - model.energy(u - t * v)) / (2 * t)
        an = model.inner(model.gradient(u), v)
        assert abs(fd - an) / max(abs(fd), 1e-14) < 1e-6
        hv = model.hessian(u, v)
        s1 = model.inner(hv, v)
        d2 = (model.energy(u + t * v) - 2 * model.energy(u)
              + model.energy(u - t * v)) / t**2
        assert abs(d2 - s1) / max(abs(d2), 1e-14) < 1e-4


class TestFieldLevelWrappers:
    def test_match_model_operators(self, setup, rng):
        grid, spec, model = setup
        u = _smooth(grid, rng)
        v = _smooth(grid, rng)
        g = energy_gradient(u, spec, 0.4, 3.0)
        assert np.array_equal(g.values, model.gradient(u.values))
        hv = hessian_apply(u, v, spec, 0.4, 3.0)
        assert np.array_equal(hv.values, model.hessian(u.values, v.values))
        assert abs(norm_e(g)**2 - inner_e(g, g)) <= 1e-12 * inner_e(g, g)

    def test_hessian_grid_mismatch(self, setup, rng):
        grid, spec, _ = setup
        other = build_grid(2, 8.0, 33)
        with pytest.raises(GridMismatch):
            hessian_apply(_smooth(grid, rng), _smooth(other, rng), spec,
                          0.4, 3.0)


class TestSnapshots:
    def test_binary_roundtrip(self, tmp_path, rng):
        grid = build_grid(2, 5.0, 33, center=(0.5, -0.25))
        u = _smooth(grid, rng)
        path = tmp_path / "field.bin"
        save_field(path, u)
        v = load_field(path)
        assert v.grid == grid
        assert np.array_equal(v.values, u.values)

    def test_slices_csv(self, tmp_path, rng):
        grid = build_grid(2, 5.0, 33)
        u = field_from_function(grid,
                                lambda x, y: np.exp(-(x**2 + y**2)))
        path = tmp_path / "slices.csv"
        modulus_slices_csv(path, u)
        text = path.read_text().splitlines()
        assert text[0] == "axis,coordinate,abs_u"
        assert len(text) == 1 + 2 * grid.m
