"""Potential families, local L^p averages, and the short-range classifier."""

import numpy as np
import pytest

from fracscat.errors import GuardError
from fracscat.grid import GridSpec
from fracscat.potentials import (
    EpsRule,
    PotentialSpec,
    TailThresholds,
    annulus_M,
    annulus_M_profile,
    choose_p,
    evaluate_potential,
    offdiag_block_norm,
    shortrange_series,
    tail_fit,
)
from fracscat.potentials import series_proxy_verdict
from fracscat.spaces import DyadicLayout

DESK = GridSpec(dim=1, L=256.0, N=4096)


class TestProfiles:
    def test_power_tail_closed_form(self):
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=1.5)
        assert spec.profile(np.array([1.5]))[0] == pytest.approx(2.5**-1.5, rel=1e-14)
        spec2 = PotentialSpec("power_tail", kappa=3.0, gamma=2.0)
        assert spec2.profile(np.array([0.0]))[0] == pytest.approx(3.0)

    def test_gaussian_well_depth_and_width(self):
        spec = PotentialSpec("gaussian_well", depth=2.0, width=3.0)
        prof = spec.profile(np.array([0.0, 3.0]))
        assert prof[0] == pytest.approx(-2.0)
        assert prof[1] == pytest.approx(-2.0 * np.exp(-0.5), rel=1e-14)

    def test_compact_bump_height_and_support(self):
        spec = PotentialSpec("compact_bump", height=0.1, radius=2.0)
        prof = spec.profile(np.array([0.0, 1.5, 2.0, 5.0]))
        assert prof[0] == pytest.approx(0.1, rel=1e-14)  # e * exp(-1) cancels
        assert 0.0 < prof[1] < prof[0]
        assert prof[2] == 0.0 and prof[3] == 0.0

    def test_annulus_tail_uses_per_annulus_exponent(self):
        spec = PotentialSpec("annulus_tail", kappa=1.0, eps_rule=EpsRule("constant", 0.5))
        # every annulus gets eps = 1/2, so the profile is (1+r)^(-3/2)
        r = np.array([0.5, 3.0, 17.0])
        np.testing.assert_allclose(spec.profile(r), (1.0 + r) ** -1.5, rtol=1e-14)

    def test_annulus_tail_radius_to_index(self):
        # the annulus index in the profile matches the dyadic layout: j = 1
        # for r <= 1, then ceil(log2 r) + 1
        spec = PotentialSpec("annulus_tail", kappa=1.0, eps_rule=EpsRule("power", 1.0))
        r = np.array([0.5, 1.0, 1.5, 2.0, 2.5, 4.0, 5.0])
        expect_j = np.array([1, 1, 2, 2, 3, 3, 4], dtype=float)
        got = spec.profile(r)
        np.testing.assert_allclose(got, (1.0 + r) ** (-1.0 - 1.0 / expect_j), rtol=1e-14)

    def test_eps_rules(self):
        j = np.array([1.0, 4.0, 9.0])
        np.testing.assert_allclose(EpsRule("constant", 0.3)(j), 0.3)
        np.testing.assert_allclose(EpsRule("power", 0.5)(j), [1.0, 0.5, 1.0 / 3.0])
        with pytest.raises(ValueError):
            EpsRule("mystery", 1.0)(j)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PotentialSpec("mystery")
        with pytest.raises(ValueError):
            PotentialSpec("annulus_tail")  # missing eps_rule
        with pytest.raises(ValueError):
            PotentialSpec("sampled")  # missing samples

    def test_sampled_round_trip(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        vals = np.sin(g.x_axis)
        V = evaluate_potential(PotentialSpec("sampled", samples=vals), g)
        np.testing.assert_allclose(V.values.real, vals, atol=1e-15)
        with pytest.raises(ValueError):
            PotentialSpec("sampled", samples=vals).profile(np.array([1.0]))

    def test_evaluate_on_grid_is_radial(self):
        g = GridSpec(dim=2, L=8.0, N=32)
        V = evaluate_potential(PotentialSpec("gaussian_well", depth=1.0, width=2.0), g)
        np.testing.assert_allclose(
            V.values.real, -np.exp(-g.x_norm**2 / 8.0), atol=1e-15
        )


class TestChooseP:
    def test_regimes(self):
        assert choose_p(1.0, 3) == pytest.approx(3.0)  # subcritical: dim / s
        assert choose_p(2.0, 1) == pytest.approx(2.0)  # supercritical: 2
        assert choose_p(0.5, 1) == pytest.approx(2.1)  # critical: 2 + delta
        assert choose_p(0.5, 1, delta_p=0.3) == pytest.approx(2.3)
        assert choose_p(1.0, 2) == pytest.approx(2.1)  # s = dim/2 again

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            choose_p(0.0, 1)


class TestAnnulusAverages:
    def test_shortcut_matches_full_sweep(self):
        # for radially nonincreasing |V| the worst unit-ball average sits at
        # the annulus inner edge; the closed-form shortcut must agree with
        # the exhaustive sweep over centers
        g = GridSpec(dim=1, L=32.0, N=512)
        lay = DyadicLayout(g)
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=2.0)
        for j in (2, 3, 4):
            fast = annulus_M(spec, g, lay, j, p=2.0, use_shortcut=True)
            slow = annulus_M(spec, g, lay, j, p=2.0, use_shortcut=False)
            assert fast == pytest.approx(slow, rel=1e-10)

    def test_profile_matches_single_calls(self):
        g = GridSpec(dim=1, L=32.0, N=512)
        lay = DyadicLayout(g)
        spec = PotentialSpec("gaussian_well", depth=1.0, width=4.0)
        prof = annulus_M_profile(spec, g, lay, p=2.0, j_max=4)
        for j in (1, 2, 3, 4):
            assert prof[j - 1] == pytest.approx(
                annulus_M(spec, g, lay, j, p=2.0, use_shortcut=False), rel=1e-10
            )

    def test_dyadic_decay_rate(self):
        # for V = (1+r)^(-gamma) the averages fall off like R^(-gamma), so
        # successive M_j approach the ratio 2^(-gamma)
        g = GridSpec(dim=1, L=256.0, N=4096)
        lay = DyadicLayout(g)
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=1.0)
        prof = annulus_M_profile(spec, g, lay, p=2.0, j_max=8)
        ratios = prof[1:] / prof[:-1]
        assert ratios[-1] == pytest.approx(0.5, rel=0.1)

    def test_ball_truncation_guard(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        lay = DyadicLayout(g)
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=2.0)
        with pytest.raises(GuardError):
            annulus_M(spec, g, lay, 4, p=2.0)  # R_4 = 8, ball exits the box

    def test_index_guard(self):
        g = GridSpec(dim=1, L=8.0, N=64)
        lay = DyadicLayout(g)
        with pytest.raises(ValueError):
            annulus_M(PotentialSpec("power_tail"), g, lay, 0, p=2.0)


class TestTailFit:
    def test_recovers_exact_power_law(self):
        radii = 2.0 ** np.arange(8)
        terms = radii**-0.7
        slope, r2, npts = tail_fit(radii, terms)
        assert slope == pytest.approx(-0.7, abs=1e-12)
        assert r2 == pytest.approx(1.0)
        assert npts == 4

    def test_all_zero_tail(self):
        slope, r2, _ = tail_fit([1.0, 2.0, 4.0, 8.0], [1.0, 0.5, 0.0, 0.0])
        assert slope == float("-inf") and r2 == 1.0

    def test_degenerate_tail(self):
        slope, r2, _ = tail_fit([1.0, 2.0, 4.0, 8.0], [1.0, 1.0, 0.0, 0.3])
        assert np.isnan(slope) and r2 == 0.0


class TestClassifier:
    @pytest.mark.parametrize("gamma", [2.0, 1.5, 1.2])
    def test_decaying_power_tails_are_short_range(self, gamma):
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=gamma)
        report = shortrange_series(spec, DESK, s=2.0)
        assert report.verdict == "short_range"

    @pytest.mark.parametrize("gamma", [1.0, 0.8])
    def test_slow_power_tails_are_not(self, gamma):
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=gamma)
        report = shortrange_series(spec, DESK, s=2.0)
        assert report.verdict == "not_short_range"

    def test_annulus_rule_slow_decay_is_short_range(self):
        spec = PotentialSpec("annulus_tail", eps_rule=EpsRule("power", 0.5))
        report = shortrange_series(spec, DESK, s=2.0)
        assert report.verdict == "short_range"

    def test_annulus_rule_harmonic_decay_is_not(self):
        spec = PotentialSpec("annulus_tail", eps_rule=EpsRule("power", 1.0))
        report = shortrange_series(spec, DESK, s=2.0)
        assert report.verdict == "not_short_range"

    def test_compactly_supported_potential_is_short_range(self):
        spec = PotentialSpec("compact_bump", height=1.0, radius=2.0)
        report = shortrange_series(spec, DESK, s=2.0)
        assert report.verdict == "short_range"
        assert report.tail_exponent == float("-inf")

    def test_report_fields_are_consistent(self):
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=2.0)
        report = shortrange_series(spec, DESK, s=2.0)
        np.testing.assert_allclose(report.terms, report.radii * report.M, rtol=1e-14)
        np.testing.assert_allclose(report.partial_sums, np.cumsum(report.terms), rtol=1e-14)
        assert report.p == choose_p(2.0, 1)
        assert report.thresholds == TailThresholds()

    def test_proxy_series_agrees_with_rules(self):
        assert series_proxy_verdict(EpsRule("power", 0.5), j_max=20) == "short_range"
        assert series_proxy_verdict(EpsRule("power", 1.0), j_max=20) == "not_short_range"
        assert series_proxy_verdict(EpsRule("constant", 0.5), j_max=20) == "short_range"


class TestOffdiagBlocks:
    def test_requires_separated_annuli(self):
        g = GridSpec(dim=1, L=64.0, N=1024)
        lay = DyadicLayout(g)
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=2.0)
        with pytest.raises(ValueError):
            offdiag_block_norm(spec, g, lay, 3, 4, s=1.0)
        with pytest.raises(ValueError):
            offdiag_block_norm(spec, g, lay, 1, 99, s=1.0)

    def test_decays_with_separation(self):
        # the smoothing kernel falls off exponentially, so the coupling
        # between annuli drops as they separate
        g = GridSpec(dim=1, L=64.0, N=1024)
        lay = DyadicLayout(g)
        spec = PotentialSpec("power_tail", kappa=1.0, gamma=2.0)
        near = offdiag_block_norm(spec, g, lay, 2, 4, s=1.0)
        far = offdiag_block_norm(spec, g, lay, 2, 5, s=1.0)
        assert 0.0 < far < near
        assert far < 0.2 * near
