"""Packets, propagators, and the time-dependent scattering experiments."""

import numpy as np
import pytest

from fracscat.dynamics import (
    DEFAULT_SCATTERING_BANDS,
    band_packet,
    born_term,
    cook_profile,
    drift_probe_packet,
    free_evolve,
    full_evolve,
    gaussian_packet,
    localization_check,
    localization_decay,
    nonexistence_drift,
    scattering_band,
    wave_operator_estimate,
)
from fracscat.errors import GuardError, StabilityError, TorusWrapError
from fracscat.grid import GridSpec, as_physical_field, l2_norm, to_physical
from fracscat.potentials import EpsRule, PotentialSpec, evaluate_potential


def zero_potential(grid: GridSpec):
    return as_physical_field(grid, np.zeros(grid.shape))


class TestPacketBuilders:
    def test_gaussian_packet_normalization_and_band(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 2.0, xi_center=1.5, sigma_x=4.0)
        assert l2_norm(pkt.field) == pytest.approx(1.0, rel=1e-12)
        assert pkt.band_mass_defect() < 1e-10
        assert pkt.r_min == pytest.approx(1.5 - 4.75 / 4.0)
        assert pkt.r_max == pytest.approx(1.5 + 4.75 / 4.0)

    def test_gaussian_packet_guards(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        with pytest.raises(ValueError):
            gaussian_packet(g, 2.0, xi_center=0.5, sigma_x=4.0)  # band hits zero
        with pytest.raises(GuardError):
            gaussian_packet(g, 2.0, xi_center=g.xi_max, sigma_x=4.0)
        with pytest.raises(ValueError):
            gaussian_packet(GridSpec(dim=2, L=64.0, N=64), 2.0, 1.5, 4.0)

    def test_band_packet_has_exactly_compact_support(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, 0.6, 2.0)
        assert pkt.band_mass_defect() == 0.0
        assert l2_norm(pkt.field) == pytest.approx(1.0, rel=1e-12)

    def test_band_packet_guards(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        with pytest.raises(ValueError):
            band_packet(g, 2.0, 2.0, 0.6)
        with pytest.raises(ValueError):
            band_packet(g, 2.0, 0.0, 2.0)
        with pytest.raises(GuardError):
            band_packet(g, 2.0, 0.6, 2.0 * g.xi_max)
        with pytest.raises(ValueError):
            band_packet(g, 2.0, 0.6, 2.0, ramp=5.0)  # wider than the band

    def test_group_speed_band(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, 0.6, 2.0)
        assert pkt.v_min == pytest.approx(2.0 * 0.6)
        assert pkt.v_max == pytest.approx(2.0 * 2.0)
        # below order one the group speed decreases with frequency
        slow = band_packet(g, 0.5, 1.0, 4.0)
        assert slow.v_min == pytest.approx(0.5 * 4.0**-0.5)
        assert slow.v_max == pytest.approx(0.5 * 1.0**-0.5)

    def test_scattering_band_table(self):
        for s, band in DEFAULT_SCATTERING_BANDS.items():
            assert scattering_band(s) == band
        with pytest.raises(ValueError):
            scattering_band(1.7)

    def test_drift_probe_speed_window(self):
        g = GridSpec(dim=1, L=8192.0, N=8192)
        for s in (0.5, 2.0):
            pkt = drift_probe_packet(g, s)
            assert 5.0 / 6.0 < pkt.v_min < pkt.v_max < 6.0 / 7.0
        with pytest.raises(ValueError):
            drift_probe_packet(g, 1.0)


class TestFreeEvolution:
    def test_quadratic_dispersion_closed_form(self):
        # for the order-2 symbol a gaussian spectral profile evolves into
        # another gaussian with complex width; compare against the exact
        # integral of exp(i xi x - i t xi^2) against the profile
        g = GridSpec(dim=1, L=64.0, N=2048)
        xi0, sig, t = 1.5, 4.0, 3.0
        pkt = gaussian_packet(g, 2.0, xi0, sig)
        got = to_physical(free_evolve(pkt.field, 2.0, t))
        a = sig**2 / 2.0 + 1j * t
        b = 1j * g.x_axis + xi0 * sig**2
        analytic = np.sqrt(np.pi / a) * np.exp(b**2 / (4.0 * a) - xi0**2 * sig**2 / 2.0)
        ana = as_physical_field(g, analytic)
        ana = ana.with_values(ana.values / l2_norm(ana))
        assert np.max(np.abs(got.values - ana.values)) < 1e-8

    def test_linear_dispersion_is_translation(self):
        # the order-1 symbol moves a positive-frequency packet rigidly at
        # unit speed; a shift by a whole number of cells is exact up to the
        # packet's negative-frequency leakage
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 1.0, 1.5, 4.0)
        t = 16 * g.h
        moved = to_physical(free_evolve(pkt.field, 1.0, t))
        ref = np.roll(to_physical(pkt.field).values, 16)
        assert np.max(np.abs(moved.values - ref)) < 5e-10

    def test_norm_preserved(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 1.3, 1.5, 4.0)
        assert l2_norm(free_evolve(pkt.field, 1.3, 7.7)) == pytest.approx(1.0, rel=1e-12)


class TestFullEvolution:
    def test_zero_potential_matches_free_flow(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 2.0, 1.5, 4.0)
        split = full_evolve(pkt.field, zero_potential(g), 2.0, 2.0, dt=0.05)
        exact = to_physical(free_evolve(pkt.field, 2.0, 2.0))
        assert np.max(np.abs(split.values - exact.values)) < 1e-12

    def test_strang_splitting_is_second_order(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 2.0, 1.5, 4.0)
        V = evaluate_potential(PotentialSpec("gaussian_well", depth=1.0, width=2.0), g)

        def errors(dt):
            coarse = full_evolve(pkt.field, V, 2.0, 1.0, dt)
            fine = full_evolve(pkt.field, V, 2.0, 1.0, dt / 2.0)
            return l2_norm(coarse.with_values(coarse.values - fine.values))

        e1, e2 = errors(0.05), errors(0.025)
        order = np.log2(e1 / e2)
        assert 1.8 < order < 2.2

    def test_splitting_is_unitary(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 2.0, 1.5, 4.0)
        V = evaluate_potential(PotentialSpec("gaussian_well", depth=1.0, width=2.0), g)
        out = full_evolve(pkt.field, V, 2.0, 2.0, dt=0.05)
        assert l2_norm(out) == pytest.approx(1.0, rel=1e-12)

    def test_reverse_time_undoes_forward(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 2.0, 1.5, 4.0)
        V = evaluate_potential(PotentialSpec("gaussian_well", depth=1.0, width=2.0), g)
        fwd = full_evolve(pkt.field, V, 2.0, 1.0, dt=0.05)
        back = full_evolve(fwd, V, 2.0, -1.0, dt=0.05)
        ref = to_physical(pkt.field)
        assert np.max(np.abs(back.values - ref.values)) < 1e-12

    def test_time_zero_returns_input(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 2.0, 1.5, 4.0)
        out = full_evolve(pkt.field, zero_potential(g), 2.0, 0.0, dt=0.05)
        np.testing.assert_array_equal(out.values, pkt.field.values)

    def test_step_guards(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        pkt = gaussian_packet(g, 2.0, 1.5, 4.0)
        V = evaluate_potential(PotentialSpec("gaussian_well", depth=10.0, width=2.0), g)
        with pytest.raises(ValueError):
            full_evolve(pkt.field, V, 2.0, 1.0, dt=0.3)  # does not divide t
        with pytest.raises(ValueError):
            full_evolve(pkt.field, V, 2.0, 1.0, dt=-0.1)
        with pytest.raises(StabilityError):
            full_evolve(pkt.field, V, 2.0, 1.0, dt=0.1)  # depth 10 * 0.1 >= 0.5
        with pytest.raises(GuardError):
            other = zero_potential(GridSpec(dim=1, L=32.0, N=1024))
            full_evolve(pkt.field, other, 2.0, 1.0, dt=0.05)


class TestCookProfile:
    def test_quadratic_tail_is_integrable(self):
        # g(t) ~ t^(-2) for an inverse-square tail; fitted on the late
        # window where the packet is fully inside the far field
        g = GridSpec(dim=1, L=4096.0, N=16384)
        pkt = gaussian_packet(g, 2.0, xi_center=1.5, sigma_x=16.0)
        V = evaluate_potential(PotentialSpec("power_tail", kappa=1.0, gamma=2.0), g)
        prof = cook_profile(pkt, V, t_min=32.0, t_max=512.0)
        assert prof.verdict == "integrable"
        assert prof.tail_exponent == pytest.approx(-2.0, abs=0.2)

    def test_harmonic_tail_is_not_integrable(self):
        g = GridSpec(dim=1, L=1024.0, N=4096)
        pkt = gaussian_packet(g, 2.0, xi_center=1.0, sigma_x=16.0)
        V = evaluate_potential(PotentialSpec("power_tail", kappa=1.0, gamma=1.0), g)
        prof = cook_profile(pkt, V, t_min=1.0, t_max=64.0)
        assert prof.verdict == "non_integrable"
        assert prof.tail_exponent == pytest.approx(-1.0, abs=0.2)

    def test_compact_potential_decays_fast(self):
        g = GridSpec(dim=1, L=1024.0, N=4096)
        pkt = gaussian_packet(g, 2.0, xi_center=1.0, sigma_x=16.0)
        V = evaluate_potential(PotentialSpec("compact_bump", height=1.0, radius=2.0), g)
        prof = cook_profile(pkt, V, t_min=1.0, t_max=64.0)
        assert prof.verdict == "integrable"
        assert prof.tail_exponent < -1.5

    def test_zero_potential_profile_vanishes(self):
        g = GridSpec(dim=1, L=1024.0, N=4096)
        pkt = gaussian_packet(g, 2.0, xi_center=1.0, sigma_x=16.0)
        prof = cook_profile(pkt, zero_potential(g), t_min=1.0, t_max=8.0, n_points=5)
        assert prof.verdict == "integrable"
        assert prof.tail_exponent == float("-inf")
        assert prof.integral == pytest.approx(0.0, abs=1e-13)

    def test_torus_guard(self):
        g = GridSpec(dim=1, L=256.0, N=1024)
        pkt = gaussian_packet(g, 2.0, xi_center=1.5, sigma_x=8.0)
        V = zero_potential(g)
        with pytest.raises(TorusWrapError):
            cook_profile(pkt, V, t_min=1.0, t_max=1e4)


class TestWaveOperator:
    def test_zero_potential_is_immediately_cauchy(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, *scattering_band(2.0))
        rec = wave_operator_estimate(pkt, zero_potential(g), [2.0, 4.0, 8.0], dt=0.0125)
        assert rec.converged
        assert np.all(rec.drifts < 1e-12)
        assert rec.isometry_residual < 1e-12
        ref = to_physical(pkt.field)
        assert np.max(np.abs(rec.omega_final.values - ref.values)) < 1e-11

    def test_compact_bump_drift_shrinks(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, *scattering_band(2.0))
        V = evaluate_potential(PotentialSpec("compact_bump", height=0.1, radius=1.0), g)
        rec = wave_operator_estimate(pkt, V, [2.0, 4.0, 8.0, 16.0], dt=0.0125, tol=2e-3)
        assert rec.converged
        assert np.all(np.diff(rec.drifts) < 0.0)
        assert rec.isometry_residual < 1e-12
        assert rec.intertwining_residual < 1e-3

    def test_long_range_tail_diverges(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, *scattering_band(2.0))
        V = evaluate_potential(PotentialSpec("power_tail", kappa=1.0, gamma=0.5), g)
        rec = wave_operator_estimate(pkt, V, [2.0, 4.0, 8.0, 16.0], dt=0.0125)
        assert rec.verdict == "diverging"
        assert not rec.converged

    def test_torus_guard(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, *scattering_band(2.0))
        with pytest.raises(TorusWrapError):
            wave_operator_estimate(pkt, zero_potential(g), [2.0, 4.0, 1e4], dt=0.0125)


class TestBornTerm:
    def test_linear_in_the_potential(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, *scattering_band(2.0))
        V = evaluate_potential(PotentialSpec("compact_bump", height=0.1, radius=1.0), g)
        V2 = V.with_values(2.0 * V.values)
        one = born_term(pkt, V, T=2.0, n_quad=257)
        two = born_term(pkt, V2, T=2.0, n_quad=257)
        assert np.max(np.abs(two.values - 2.0 * one.values)) < 1e-12

    def test_zero_potential_gives_zero(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, *scattering_band(2.0))
        out = born_term(pkt, zero_potential(g), T=2.0, n_quad=257)
        assert l2_norm(out) == 0.0

    def test_even_quadrature_rejected(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, *scattering_band(2.0))
        with pytest.raises(ValueError):
            born_term(pkt, zero_potential(g), T=2.0, n_quad=256)


class TestNonexistenceDrift:
    def test_report_structure(self):
        g = GridSpec(dim=1, L=8192.0, N=8192)
        pkt = drift_probe_packet(g, 0.5)
        rule = EpsRule("constant", 0.0)
        V = evaluate_potential(PotentialSpec("annulus_tail", kappa=1.0, eps_rule=rule), g)
        rep = nonexistence_drift(pkt, V, rule, 10, 12)
        np.testing.assert_array_equal(rep.blocks, [10, 11, 12])
        assert np.all(rep.D > 0.0)
        np.testing.assert_allclose(rep.cumulative, np.cumsum(rep.D), rtol=1e-14)
        np.testing.assert_allclose(rep.ratios, rep.D / rep.proxy, rtol=1e-14)
        np.testing.assert_allclose(rep.increment_ratios, rep.D[1:] / rep.D[:-1], rtol=1e-14)
        # eps = 0 makes every proxy entry 1
        np.testing.assert_allclose(rep.proxy, 1.0, atol=1e-15)

    def test_requires_probe_speed_band(self):
        g = GridSpec(dim=1, L=8192.0, N=8192)
        pkt = gaussian_packet(g, 2.0, 1.0, 16.0)  # speeds ~2, far outside
        rule = EpsRule("constant", 0.0)
        V = evaluate_potential(PotentialSpec("annulus_tail", kappa=1.0, eps_rule=rule), g)
        with pytest.raises(GuardError):
            nonexistence_drift(pkt, V, rule, 10, 12)


class TestLocalization:
    def test_outside_cone_mass_decays(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, 0.6, 2.0)
        fracs, slope = localization_decay(pkt, [4.0, 8.0, 16.0, 32.0])
        assert np.all(np.diff(fracs) < 0.0)
        assert fracs[-1] < 1e-5
        assert slope < -2.5

    def test_nonpositive_time_rejected(self):
        g = GridSpec(dim=1, L=512.0, N=8192)
        pkt = band_packet(g, 2.0, 0.6, 2.0)
        with pytest.raises(ValueError):
            localization_check(pkt, 0.0)
