"""Ansatz family, tangent frame and complement projection."""

import numpy as np
import pytest

from magnls.ansatz import (AnsatzParams, build_ansatz, project_complement,
                           tangent_frame)
from magnls.discretization import inner_e, norm_e
from magnls.errors import OutOfBox
from magnls.fields import make_field_spec
from magnls.grids import ComplexField, build_grid
from magnls.groundstate import profile_moments, scaling_factors


@pytest.fixture(scope="module")
def setting(profile_2d):
    grid = build_grid(2, 12.0, 97)
    spec = make_field_spec(2, V=0.3, K=1.2, A=[0.3, -0.2])
    params = AnsatzParams(eps=0.1, xi=np.array([0.5, -0.4]), sigma=0.0)
    z = build_ansatz(profile_2d, spec, params, grid)
    frame = tangent_frame(z, profile_2d, spec, params, grid)
    return grid, spec, params, z, frame


class TestBuildAnsatz:
    def test_no_field_real_positive_peak(self, profile_2d):
        grid = build_grid(2, 12.0, 97)
        spec = make_field_spec(2)
        params = AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=0.0)
        z = build_ansatz(profile_2d, spec, params, grid)
        assert np.abs(z.values.imag).max() == 0.0
        assert z.values.real.min() >= 0.0
        k = np.unravel_index(np.argmax(np.abs(z.values)), grid.shape)
        assert np.allclose([grid.axis(j)[k[j]] for j in range(2)], 0.0)
        assert abs(np.abs(z.values).max()
                   - profile_2d.shoot_height) < 1e-8

    def test_sigma_pi_negates(self, profile_2d):
        grid = build_grid(2, 12.0, 65)
        spec = make_field_spec(2)
        z0 = build_ansatz(profile_2d, spec,
                          AnsatzParams(0.1, np.zeros(2), 0.0), grid)
        zpi = build_ansatz(profile_2d, spec,
                           AnsatzParams(0.1, np.zeros(2), np.pi), grid)
        assert np.abs(zpi.values + z0.values).max() < 1e-12

    def test_constant_A_phase_ramp(self, setting):
        grid, spec, params, z, _ = setting
        # arg z(x) - arg z(y) = A . (x - y) along grid axes, mod 2pi
        a = np.array([0.3, -0.2])
        vals = z.values
        mid = grid.m // 2
        for j, shift in ((0, (1, 0)), (1, (0, 1))):
            ratio = vals[mid + shift[0], mid + shift[1]] \
                * np.conj(vals[mid, mid])
            dphi = np.angle(ratio)
            assert abs(dphi - a[j] * grid.h) < 1e-12

    def test_out_of_box(self, profile_2d):
        grid = build_grid(2, 12.0, 65)
        spec = make_field_spec(2)
        with pytest.raises(OutOfBox):
            build_ansatz(profile_2d, spec,
                         AnsatzParams(0.1, np.array([5.0, 0.0]), 0.0), grid)

    def test_radial_modulus(self, setting, profile_2d):
        grid, spec, params, z, _ = setting
        k = int(round((params.xi[0] + 1.7 - grid.axis(0)[0]) / grid.h))
        kj = int(round((params.xi[1] - grid.axis(1)[0]) / grid.h))
        r = np.hypot(grid.axis(0)[k] - params.xi[0],
                     grid.axis(1)[kj] - params.xi[1])
        alpha, beta = scaling_factors(0.3, 1.2, 3.0)
        expected = alpha * profile_2d.value(beta * r)
        assert abs(np.abs(z.values[k, kj]) - expected) < 1e-9

    def test_norm_matches_moments(self, sech_profile):
        # |z|_E^2 = alpha^2 beta^{2-n} int U'^2 + alpha^2 beta^{-n} int U^2
        # for A = 0 (1D, fine grid, so the difference quotient converges)
        grid = build_grid(1, 16.0, 16385)
        V0, K0 = 0.4, 1.5
        spec = make_field_spec(1, V=V0, K=K0)
        params = AnsatzParams(eps=0.1, xi=np.zeros(1), sigma=0.0)
        z = build_ansatz(sech_profile, spec, params, grid)
        alpha, beta = scaling_factors(V0, K0, 3.0)
        m = profile_moments(sech_profile)
        grad2 = m.nonlinear_mass - m.mass  # Nehari: int U'^2
        expected = alpha**2 * beta ** (2 - 1) * grad2 \
            + alpha**2 * beta ** (-1) * m.mass
        assert abs(inner_e(z, z) - expected) < 1e-6 * expected


class TestTangentFrame:
    def test_member_count(self, setting):
        _, _, _, _, frame = setting
        assert len(frame.basis) == 3

    def test_iz_orthogonal_to_z(self, setting):
        grid, _, _, z, frame = setting
        iz = ComplexField(grid, frame.basis[0])
        val = inner_e(iz, z)
        assert abs(val) <= 1e-12 * inner_e(z, z)

    def test_translations_orthogonal_to_z_without_A(self, profile_2d):
        grid = build_grid(2, 12.0, 97)
        spec = make_field_spec(2, V=0.3, K=1.2)
        params = AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=0.0)
        z = build_ansatz(profile_2d, spec, params, grid)
        frame = tangent_frame(z, profile_2d, spec, params, grid)
        zn = norm_e(z)
        for b in frame.basis[1:]:
            bn = np.sqrt(inner_e(ComplexField(grid, b),
                                 ComplexField(grid, b)))
            val = inner_e(ComplexField(grid, b), z)
            assert abs(val) / (zn * bn) < 0.5 * grid.h**2

    def test_gram_block_structure_without_A(self, profile_2d):
        # phase vs translation blocks decouple for A = 0, sigma = 0
        grid = build_grid(2, 12.0, 97)
        spec = make_field_spec(2, V=0.3, K=1.2)
        params = AnsatzParams(eps=0.1, xi=np.zeros(2), sigma=0.0)
        z = build_ansatz(profile_2d, spec, params, grid)
        frame = tangent_frame(z, profile_2d, spec, params, grid)
        g = frame.gram
        scale = np.sqrt(g[0, 0] * np.diag(g)[1:])
        assert np.all(np.abs(g[0, 1:]) / scale < 1e-10)

    def test_gram_spd(self, setting):
        _, _, _, _, frame = setting
        eigs = np.linalg.eigvalsh(frame.gram)
        assert np.all(eigs > 0)
        assert frame.cond < 1e10


class TestProjector:
    def test_annihilates_basis(self, setting):
        grid, _, _, _, frame = setting
        for b in frame.basis:
            pb = frame.project(b.copy())
            assert np.sqrt(inner_e(ComplexField(grid, pb),
                                   ComplexField(grid, pb))) \
                <= 1e-10 * np.sqrt(inner_e(ComplexField(grid, b),
                                           ComplexField(grid, b)))

    def test_orthogonal_unchanged(self, setting, rng):
        grid, _, _, _, frame = setting
        v = frame.project((rng.standard_normal(grid.shape)
                           + 1j * rng.standard_normal(grid.shape)))
        pv = frame.project(v)
        assert np.abs(pv - v).max() <= 1e-12 * np.abs(v).max()

    def test_idempotent(self, setting, rng):
        grid, _, _, _, frame = setting
        v = rng.standard_normal(grid.shape) \
            + 1j * rng.standard_normal(grid.shape)
        p1 = frame.project(v)
        p2 = frame.project(p1)
        assert np.abs(p2 - p1).max() <= 1e-10 * max(np.abs(p1).max(), 1e-30)

    def test_result_orthogonal_to_frame(self, setting, rng):
        grid, _, _, _, frame = setting
        v = ComplexField(grid, rng.standard_normal(grid.shape)
                         + 1j * rng.standard_normal(grid.shape))
        pv = project_complement(v, frame)
        for b in frame.basis:
            bf = ComplexField(grid, b)
            assert abs(inner_e(pv, bf)) <= 1e-10 * norm_e(bf) \
                * max(norm_e(pv), 1e-30)
