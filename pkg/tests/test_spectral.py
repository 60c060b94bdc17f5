"""Spectral core: transforms, functionals, coordinates, serialization.

Reference values are computed two ways: closed forms for trig fields are
checked against direct quadrature oracles inside the tests, and a handful
of frozen constants pin the conventions (calibration of norms, dispersion
values) so regressions cannot drift silently.
"""

import math

import numpy as np
import pytest

from ostlab.spectral import (
    FourierField,
    GridSpec,
    coordinates,
    cubic_g,
    dispersion,
    dx,
    dx_inv,
    energy_eigenvalues,
    field_from_coordinates,
    from_physical,
    hamiltonian,
    inner,
    l2_norm,
    load_field,
    make_grid,
    project,
    quadratic_energy,
    regrid,
    save_field,
    sobolev_norm,
    to_physical,
    zero_field,
)

TWO_PI = 2.0 * math.pi


def cos_field(grid, k=1, amp=1.0):
    """amp*cos(xi_k x): coefficient amp/2 at mode k."""
    c = np.zeros(grid.modes, dtype=np.complex128)
    c[k - 1] = amp / 2.0
    return FourierField(grid, c)


def sin_field(grid, k=1, amp=1.0):
    """amp*sin(xi_k x): coefficient -i*amp/2 at mode k."""
    c = np.zeros(grid.modes, dtype=np.complex128)
    c[k - 1] = -0.5j * amp
    return FourierField(grid, c)


def random_field(grid, rng, scale=1.0):
    c = scale * (rng.standard_normal(grid.modes) + 1j * rng.standard_normal(grid.modes))
    return FourierField(grid, c)


def quadrature(values, length):
    """Trapezoid-free periodic quadrature: exact for band-limited integrands."""
    return length * float(np.mean(values))


class TestGridSpec:
    def test_default_points(self):
        g = make_grid(8)
        assert g.points == 32
        assert g.length == TWO_PI

    def test_xi_unit_spacing_on_2pi(self):
        g = make_grid(4)
        assert np.allclose(g.xi, [1.0, 2.0, 3.0, 4.0])

    def test_xi_scales_with_length(self):
        g = make_grid(4, length=math.pi)
        assert np.allclose(g.xi, [2.0, 4.0, 6.0, 8.0])

    def test_rejects_bad_length(self):
        for bad in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(ValueError):
                GridSpec(length=bad, modes=4, points=16)

    def test_rejects_bad_modes(self):
        with pytest.raises(ValueError):
            GridSpec(length=TWO_PI, modes=0, points=16)

    def test_rejects_insufficient_points(self):
        with pytest.raises(ValueError):
            GridSpec(length=TWO_PI, modes=4, points=15)

    def test_x_nodes(self):
        g = GridSpec(length=2.0, modes=1, points=4)
        assert np.allclose(g.x, [0.0, 0.5, 1.0, 1.5])


class TestFieldInvariants:
    def test_coeff_shape_enforced(self):
        g = make_grid(4)
        with pytest.raises(ValueError):
            FourierField(g, np.zeros(3, dtype=np.complex128))

    def test_coeff_must_be_finite(self):
        g = make_grid(2)
        with pytest.raises(ValueError):
            FourierField(g, np.array([1.0, np.nan], dtype=np.complex128))

    def test_coeff_readonly_and_copied(self):
        g = make_grid(2)
        src = np.array([1.0 + 0j, 2.0], dtype=np.complex128)
        f = FourierField(g, src)
        src[0] = 99.0
        assert f.coeff[0] == 1.0
        with pytest.raises(ValueError):
            f.coeff[0] = 0.0

    def test_zero_field(self):
        f = zero_field(make_grid(3))
        assert l2_norm(f) == 0.0


class TestTransforms:
    def test_cos_samples_match_formula(self):
        g = make_grid(8)
        f = cos_field(g, k=3)
        assert np.allclose(to_physical(f), np.cos(3.0 * g.x), atol=1e-12)

    def test_round_trip_spectral(self):
        rng = np.random.default_rng(7)
        g = make_grid(16)
        for _ in range(10):
            f = random_field(g, rng)
            back = from_physical(to_physical(f), g)
            assert np.allclose(back.coeff, f.coeff, atol=1e-12)

    def test_from_physical_discards_mean(self):
        g = make_grid(4)
        f = from_physical(np.full(g.points, 2.5), g)
        assert l2_norm(f) == 0.0

    def test_from_physical_discards_high_modes(self):
        g = make_grid(4)
        samples = np.cos(7.0 * g.x)  # above the retained band, below Nyquist
        f = from_physical(samples, g)
        assert np.allclose(f.coeff, 0.0, atol=1e-14)

    def test_from_physical_rejects_nonfinite(self):
        g = make_grid(2)
        s = np.zeros(g.points)
        s[3] = np.inf
        with pytest.raises(ValueError):
            from_physical(s, g)

    def test_from_physical_rejects_wrong_size(self):
        g = make_grid(2)
        with pytest.raises(ValueError):
            from_physical(np.zeros(g.points + 1), g)


class TestCalculus:
    def test_dx_of_sin_is_cos(self):
        g = make_grid(6)
        d = dx(sin_field(g, k=2))
        assert np.allclose(to_physical(d), 2.0 * np.cos(2.0 * g.x), atol=1e-12)

    def test_dx_inv_of_cos_is_sin(self):
        g = make_grid(6)
        a = dx_inv(cos_field(g, k=1))
        assert np.allclose(to_physical(a), np.sin(g.x), atol=1e-12)

    def test_dx_inv_inverts_dx(self):
        g = make_grid(8)
        f = random_field(g, np.random.default_rng(3))
        assert np.allclose(dx_inv(dx(f)).coeff, f.coeff, atol=1e-14)

    def test_project_truncates(self):
        g = make_grid(6)
        f = FourierField(g, np.arange(1, 7, dtype=np.complex128))
        p = project(f, 2)
        assert np.allclose(p.coeff, [1, 2, 0, 0, 0, 0])

    def test_project_identity_when_wide(self):
        g = make_grid(4)
        f = random_field(g, np.random.default_rng(0))
        assert project(f, 4) is f
        assert project(f, 9) is f

    def test_project_idempotent_and_self_adjoint(self):
        g = make_grid(8)
        rng = np.random.default_rng(11)
        f, h = random_field(g, rng), random_field(g, rng)
        pf = project(f, 3)
        assert np.allclose(project(pf, 3).coeff, pf.coeff)
        assert inner(pf, h) == pytest.approx(inner(f, project(h, 3)), abs=1e-12)

    def test_project_rejects_nonpositive(self):
        g = make_grid(4)
        with pytest.raises(ValueError):
            project(zero_field(g), 0)

    def test_regrid_round_trip(self):
        g_small, g_big = make_grid(4), make_grid(9)
        f = random_field(g_small, np.random.default_rng(5))
        lifted = regrid(f, g_big)
        assert np.allclose(lifted.coeff[:4], f.coeff)
        assert np.all(lifted.coeff[4:] == 0.0)
        back = regrid(lifted, g_small)
        assert np.allclose(back.coeff, f.coeff)

    def test_regrid_rejects_length_mismatch(self):
        f = zero_field(make_grid(4))
        with pytest.raises(ValueError):
            regrid(f, make_grid(4, length=math.pi))


class TestDispersion:
    def test_frozen_value_k2(self):
        # xi^3 - 1/xi at xi = 2: 8 - 0.5
        assert dispersion(2, make_grid(8)) == pytest.approx(7.5, abs=1e-15)

    def test_odd_symmetry(self):
        g = make_grid(8)
        k = np.array([1, 2, 5, -3])
        assert np.allclose(dispersion(-k, g), -dispersion(k, g))

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            dispersion(0, make_grid(4))
        with pytest.raises(ValueError):
            dispersion(np.array([1, 0, 2]), make_grid(4))

    def test_scalar_returns_float(self):
        assert isinstance(dispersion(3, make_grid(4)), float)

    def test_scales_with_length(self):
        g = make_grid(4, length=math.pi)  # xi_k = 2k
        assert dispersion(1, g) == pytest.approx(8.0 - 0.5)


class TestNormsAndFunctionals:
    def test_l2_cos_closed_form_and_quadrature(self):
        g = make_grid(8)
        f = cos_field(g)
        # int cos^2 = pi on [0, 2pi)
        assert l2_norm(f) == pytest.approx(math.sqrt(math.pi), abs=1e-12)
        u = to_physical(f)
        assert l2_norm(f) ** 2 == pytest.approx(quadrature(u * u, g.length), abs=1e-12)

    def test_l2_parseval_random(self):
        rng = np.random.default_rng(17)
        g = make_grid(12)
        for _ in range(10):
            f = random_field(g, rng)
            u = to_physical(f)
            assert l2_norm(f) ** 2 == pytest.approx(
                quadrature(u * u, g.length), rel=1e-10
            )

    def test_sobolev_zero_matches_l2(self):
        f = random_field(make_grid(6), np.random.default_rng(2))
        assert sobolev_norm(f, 0.0) == pytest.approx(l2_norm(f), rel=1e-14)

    def test_sobolev_monotone_in_s(self):
        f = random_field(make_grid(6), np.random.default_rng(4))
        assert sobolev_norm(f, 1.0) > sobolev_norm(f, 0.5) > sobolev_norm(f, 0.0)

    def test_sobolev_cos_closed_form(self):
        g = make_grid(8)
        f = cos_field(g, k=2)
        # ||cos(2x)||_{H^s}^2 = pi * (1+4)^s
        assert sobolev_norm(f, 1.5) == pytest.approx(
            math.sqrt(math.pi * 5.0**1.5), rel=1e-14
        )

    def test_inner_matches_quadrature(self):
        g = make_grid(10)
        rng = np.random.default_rng(23)
        f, h = random_field(g, rng), random_field(g, rng)
        uf, uh = to_physical(f), to_physical(h)
        assert inner(f, h) == pytest.approx(quadrature(uf * uh, g.length), rel=1e-10)

    def test_inner_orthogonality(self):
        g = make_grid(4)
        assert inner(cos_field(g, 1), sin_field(g, 1)) == pytest.approx(0.0, abs=1e-15)
        assert inner(cos_field(g, 1), cos_field(g, 2)) == pytest.approx(0.0, abs=1e-15)

    def test_energy_eigenvalues_frozen(self):
        s = energy_eigenvalues(make_grid(2))
        assert np.allclose(s, [2.0, 4.25])

    def test_quadratic_energy_is_derivative_norms(self):
        g = make_grid(10)
        f = random_field(g, np.random.default_rng(31))
        expected = 0.5 * (l2_norm(dx(f)) ** 2 + l2_norm(dx_inv(f)) ** 2)
        assert quadratic_energy(f) == pytest.approx(expected, rel=1e-12)

    def test_cubic_g_sin_vanishes(self):
        g = make_grid(8)
        assert cubic_g(sin_field(g, 1)) == pytest.approx(0.0, abs=1e-14)

    def test_cubic_g_quadrature_oracle(self):
        # dense-grid quadrature oracle on a two-mode field
        g = make_grid(4)
        f = FourierField(g, np.array([0.5, -0.25j, 0.0, 0.0]))
        dense = make_grid(4, points=4096)
        u = to_physical(regrid(f, dense))
        oracle = quadrature(u**3, g.length) / 3.0
        assert cubic_g(f) == pytest.approx(oracle, rel=1e-12)

    def test_cubic_resonance_closed_form(self):
        # u = 2cos(x) + 2cos(2x): int u^3 = 3*2pi/... direct expansion:
        # only the cos(x)^2 cos(2x) triple resonates: 3 * (2^2*2) * pi/2 = 12pi
        g = make_grid(4)
        f = FourierField(g, np.array([1.0, 1.0, 0.0, 0.0], dtype=np.complex128))
        assert cubic_g(f) * 3.0 == pytest.approx(12.0 * math.pi, rel=1e-12)

    def test_hamiltonian_cos_frozen(self):
        # H(cos x) = (1/2)(1+1)*pi + 0 = pi
        g = make_grid(8)
        assert hamiltonian(cos_field(g)) == pytest.approx(math.pi, rel=1e-14)

    def test_hamiltonian_sum(self):
        f = random_field(make_grid(7), np.random.default_rng(41))
        assert hamiltonian(f) == pytest.approx(
            quadratic_energy(f) + cubic_g(f), rel=1e-14
        )


class TestCoordinates:
    def test_sin_amplitude(self):
        # e_1 = sqrt(2/A) sin(x): u = sin(x) has a_1 = sqrt(A/2) = sqrt(pi)
        g = make_grid(4)
        a = coordinates(sin_field(g, 1))
        assert a[0] == pytest.approx(math.sqrt(math.pi), rel=1e-14)
        assert np.allclose(a[1:], 0.0)

    def test_cos_amplitude(self):
        g = make_grid(4)
        a = coordinates(cos_field(g, 2))
        assert a[3] == pytest.approx(math.sqrt(math.pi), rel=1e-14)
        assert np.count_nonzero(a) == 1

    def test_round_trip(self):
        g = make_grid(9)
        f = random_field(g, np.random.default_rng(8))
        back = field_from_coordinates(g, coordinates(f))
        assert np.allclose(back.coeff, f.coeff, atol=1e-15)

    def test_l2_is_euclidean(self):
        g = make_grid(5)
        f = random_field(g, np.random.default_rng(13))
        a = coordinates(f)
        assert l2_norm(f) ** 2 == pytest.approx(float(np.dot(a, a)), rel=1e-13)

    def test_basis_is_orthonormal(self):
        g = make_grid(3)
        n = 2 * g.modes
        for i in range(n):
            for j in range(i, n):
                ei = field_from_coordinates(g, np.eye(n)[i])
                ej = field_from_coordinates(g, np.eye(n)[j])
                assert inner(ei, ej) == pytest.approx(
                    1.0 if i == j else 0.0, abs=1e-13
                )

    def test_rejects_bad_input(self):
        g = make_grid(2)
        with pytest.raises(ValueError):
            field_from_coordinates(g, np.zeros(3))
        with pytest.raises(ValueError):
            field_from_coordinates(g, np.array([1.0, np.nan, 0.0, 0.0]))


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        g = GridSpec(length=TWO_PI, modes=6, points=30)
        f = random_field(g, np.random.default_rng(19), scale=1e-7)
        p = tmp_path / "f.csv"
        save_field(f, p)
        back = load_field(p)
        assert back.grid == f.grid
        assert np.array_equal(back.coeff, f.coeff)

    def test_rejects_foreign_file(self, tmp_path):
        p = tmp_path / "junk.csv"
        p.write_text("hello\nworld\n")
        with pytest.raises(ValueError):
            load_field(p)

    def test_rejects_truncated_rows(self, tmp_path):
        g = make_grid(3)
        p = tmp_path / "f.csv"
        save_field(zero_field(g), p)
        lines = p.read_text().splitlines()
        p.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValueError):
            load_field(p)
