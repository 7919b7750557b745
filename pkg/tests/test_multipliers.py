"""Fourier multiplier operators: symbols, kernels, and the dyadic partition."""

import numpy as np
import pytest

from fracscat.errors import NyquistError, SingularSymbolError
from fracscat.grid import GridSpec, as_physical_field, l2_norm, to_physical
from fracscat.multipliers import (
    MultiplierSpec,
    apply_multiplier,
    bessel_potential,
    fractional_laplacian,
    free_propagate,
    lp_block,
    lp_block_count,
    smooth_step,
    symbol_on_grid,
)


def gaussian(grid: GridSpec, sigma: float = 1.0):
    return as_physical_field(grid, np.exp(-grid.x_norm**2 / (2.0 * sigma**2)))


def random_field(grid: GridSpec, seed: int):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return as_physical_field(grid, vals)


class TestSymbols:
    def test_kinetic_symbol(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        sym = symbol_on_grid(MultiplierSpec.frac_laplacian(1.3), g)
        np.testing.assert_allclose(sym, np.abs(g.xi_axis) ** 1.3, atol=1e-14)

    def test_bessel_symbol(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        sym = symbol_on_grid(MultiplierSpec.bessel(-2.0), g)
        np.testing.assert_allclose(sym, 1.0 / (1.0 + g.xi_axis**2), atol=1e-14)

    def test_free_phase_is_unimodular(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        sym = symbol_on_grid(MultiplierSpec.free_phase(1.5, 3.7), g)
        np.testing.assert_allclose(np.abs(sym), 1.0, atol=1e-14)

    def test_custom_symbol(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        u = random_field(g, seed=1)
        via_custom = apply_multiplier(MultiplierSpec.custom(lambda r: r**2), u)
        via_kinetic = fractional_laplacian(2.0, u)
        np.testing.assert_allclose(via_custom.values, via_kinetic.values, atol=1e-12)

    def test_invalid_orders_rejected(self):
        with pytest.raises(ValueError):
            MultiplierSpec.frac_laplacian(0.0)
        with pytest.raises(ValueError):
            MultiplierSpec.free_phase(-1.0, 1.0)
        with pytest.raises(ValueError):
            MultiplierSpec.lp_block(-1)

    def test_unknown_kind_rejected(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        with pytest.raises(ValueError):
            symbol_on_grid(MultiplierSpec(kind="mystery"), g)


class TestKineticOperator:
    def test_order_two_matches_second_derivative(self):
        # exp(-x^2/2) has -u'' = (1 - x^2) exp(-x^2/2)
        g = GridSpec(dim=1, L=16.0, N=512)
        u = gaussian(g)
        got = fractional_laplacian(2.0, u)
        expected = (1.0 - g.x_axis**2) * np.exp(-g.x_axis**2 / 2.0)
        assert np.max(np.abs(got.values - expected)) < 1e-10

    def test_finite_difference_oracle_converges(self):
        # the centered second difference agrees with the spectral operator
        # to O(h^2); doubling N shrinks the gap by about 4
        def fd_gap(N):
            g = GridSpec(dim=1, L=16.0, N=N)
            u = gaussian(g)
            spec = fractional_laplacian(2.0, u).values.real
            v = u.values.real
            fd = -(np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / g.h**2
            return np.max(np.abs(spec - fd))

        gap_coarse, gap_fine = fd_gap(1024), fd_gap(2048)
        assert gap_fine < 1e-4
        assert gap_coarse / gap_fine == pytest.approx(4.0, rel=0.1)

    def test_plane_wave_eigenvalue(self):
        # a lattice harmonic is an exact eigenvector with eigenvalue |xi_0|^s
        g = GridSpec(dim=1, L=8.0, N=128)
        xi0 = 5 * g.dxi
        u = as_physical_field(g, np.exp(1j * xi0 * g.x_axis))
        for s in (0.5, 1.0, 1.7, 3.0):
            got = fractional_laplacian(s, u)
            np.testing.assert_allclose(got.values, xi0**s * u.values, atol=1e-10)

    def test_2d_radial_symbol(self):
        g = GridSpec(dim=2, L=8.0, N=64)
        sym = symbol_on_grid(MultiplierSpec.frac_laplacian(1.0), g)
        np.testing.assert_allclose(sym, g.xi_norm, atol=1e-14)


class TestBessel:
    def test_smoothing_roughening_inverse_pair(self):
        g = GridSpec(dim=1, L=8.0, N=256)
        u = random_field(g, seed=2)
        back = bessel_potential(-1.3, bessel_potential(1.3, u))
        np.testing.assert_allclose(back.values, u.values, atol=1e-12)

    def test_order_zero_is_identity(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        u = random_field(g, seed=3)
        np.testing.assert_allclose(bessel_potential(0.0, u).values, u.values, atol=1e-14)

    def test_inverse_kernel_is_exponential(self):
        # (1 - d^2/dx^2)^(-1) applied to a unit point mass has kernel
        # exp(-|x|)/2; the lattice truncation error decays with xi_max,
        # so probe away from the kink at the origin
        g = GridSpec(dim=1, L=16.0, N=8192)
        delta = np.zeros(g.N)
        delta[0] = 1.0 / g.h  # x_axis[0] = -L; shifted so the kernel wraps
        delta = np.roll(delta, g.N // 2)  # center the mass at x = 0
        out = bessel_potential(-2.0, as_physical_field(g, delta)).values.real
        expected = 0.5 * np.exp(-np.abs(g.x_axis))
        mask = (np.abs(g.x_axis) >= 0.25) & (np.abs(g.x_axis) <= 8.0)
        assert np.max(np.abs(out[mask] - expected[mask])) < 1e-5


class TestFreePropagator:
    def test_unitarity(self):
        g = GridSpec(dim=1, L=8.0, N=256)
        u = random_field(g, seed=4)
        moved = free_propagate(1.5, 2.5, u)
        assert l2_norm(moved) == pytest.approx(l2_norm(u), rel=1e-13)

    def test_group_law(self):
        g = GridSpec(dim=1, L=8.0, N=256)
        u = random_field(g, seed=5)
        two_steps = free_propagate(1.5, 0.7, free_propagate(1.5, 1.8, u))
        one_step = free_propagate(1.5, 2.5, u)
        np.testing.assert_allclose(two_steps.values, one_step.values, atol=1e-12)

    def test_time_zero_is_identity(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        u = random_field(g, seed=6)
        np.testing.assert_allclose(free_propagate(2.0, 0.0, u).values, u.values, atol=1e-14)


class TestResolventSymbol:
    def test_real_energy_on_shell_rejected(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        with pytest.raises(SingularSymbolError):
            symbol_on_grid(MultiplierSpec.resolvent(2.0, 1.0), g)

    def test_complex_energy_accepted(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        sym = symbol_on_grid(MultiplierSpec.resolvent(2.0, 1.0 + 0.01j), g)
        np.testing.assert_allclose(sym, 1.0 / (g.xi_axis**2 - (1.0 + 0.01j)), atol=1e-14)

    def test_negative_energy_accepted(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        sym = symbol_on_grid(MultiplierSpec.resolvent(2.0, -1.0), g)
        assert np.all(np.isfinite(sym))

    def test_energy_beyond_lattice_accepted(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        lam = (2.0 * g.xi_max) ** 2
        sym = symbol_on_grid(MultiplierSpec.resolvent(2.0, lam), g)
        assert np.all(sym < 0.0)


class TestDyadicBlocks:
    def test_partition_of_unity_on_lattice(self):
        for dim, N in ((1, 256), (2, 64)):
            g = GridSpec(dim=dim, L=8.0, N=N)
            total = np.zeros(g.shape)
            for j in range(lp_block_count(g) + 1):
                total = total + symbol_on_grid(MultiplierSpec.lp_block(j), g)
            np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_reconstruction(self):
        g = GridSpec(dim=1, L=8.0, N=256)
        u = random_field(g, seed=7)
        acc = np.zeros(g.shape, dtype=complex)
        for j in range(lp_block_count(g) + 1):
            acc = acc + lp_block(j, u).values
        np.testing.assert_allclose(acc, u.values, atol=1e-10)

    def test_block_support_and_plateau(self):
        g = GridSpec(dim=1, L=32.0, N=1024)
        r = g.xi_norm
        for j in (2, 3, 4):
            sym = symbol_on_grid(MultiplierSpec.lp_block(j), g)
            assert np.all(sym[(r < (6.0 / 7.0) * 2.0**j) | (r > 2.0 ** (j + 1))] == 0.0)
            plateau = (r >= 2.0**j) & (r <= (12.0 / 7.0) * 2.0**j)
            np.testing.assert_allclose(sym[plateau], 1.0, atol=1e-14)

    def test_low_block_plateau(self):
        g = GridSpec(dim=1, L=32.0, N=1024)
        r = g.xi_norm
        sym = symbol_on_grid(MultiplierSpec.lp_block(0), g)
        np.testing.assert_allclose(sym[r <= 12.0 / 7.0], 1.0, atol=1e-14)
        assert np.all(sym[r > 2.0] == 0.0)

    def test_plane_wave_lands_in_one_block(self):
        g = GridSpec(dim=1, L=32.0, N=1024)
        j = 3
        xi0 = g.dxi * round(1.2 * 2.0**j / g.dxi)  # inside the block-j plateau
        u = as_physical_field(g, np.exp(1j * xi0 * g.x_axis))
        kept = lp_block(j, u)
        np.testing.assert_allclose(kept.values, u.values, atol=1e-12)
        for other in (j - 2, j + 2):
            assert l2_norm(lp_block(other, u)) < 1e-12

    def test_block_count_guard(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        with pytest.raises(NyquistError):
            lp_block(lp_block_count(g) + 1, random_field(g, seed=8))

    def test_fourier_input_stays_fourier(self):
        from fracscat.grid import to_fourier

        g = GridSpec(dim=1, L=8.0, N=64)
        v = to_fourier(random_field(g, seed=9))
        out = lp_block(1, v)
        assert out.space_tag == "fourier"
        np.testing.assert_allclose(
            to_physical(out).values, lp_block(1, to_physical(v)).values, atol=1e-12
        )


class TestSmoothStep:
    def test_exact_tails(self):
        t = np.array([-1.0, 0.0, 1.0, 2.0])
        np.testing.assert_array_equal(smooth_step(t), [0.0, 0.0, 1.0, 1.0])

    def test_midpoint_symmetry(self):
        assert smooth_step(np.array([0.5]))[0] == pytest.approx(0.5, abs=1e-15)
        t = np.linspace(0.01, 0.99, 99)
        np.testing.assert_allclose(smooth_step(t) + smooth_step(1.0 - t), 1.0, atol=1e-14)

    def test_monotone(self):
        t = np.linspace(-0.5, 1.5, 401)
        v = smooth_step(t)
        assert np.all(np.diff(v) >= -1e-15)
