"""Link-model tests: mixing angle, closed forms, SPDC statistics, oracles."""

import math

import numpy as np
import pytest

from ionlink import links
from ionlink.exceptions import DegenerateInput, DomainError

EFF = links.ChannelEfficiencies(eta=0.9, eta0_prime=0.9, eta_fc=0.9, eta_m=0.8)


def make_en(alpha1_sq, beta1_sq, eff=EFF, n_bins=10, dark=0.0, cutoff=2):
    ion = links.IonEmission.constant(alpha1_sq, 1e-5, n_bins)
    spdc = links.SpdcTimeBin(beta1_sq, 1e-6, 1e-7)
    return links.en_heralded_state(ion, spdc, eff, dark, cutoff=cutoff)


class TestUncorrelatedPairs:
    def test_zero_drive(self):
        assert links.uncorrelated_pair_amplitude(0.0) == 0.0

    def test_reference_value(self):
        # exact minus-branch solution at |b1|^2 = 0.01
        two_b2 = 2.0 * links.uncorrelated_pair_amplitude(0.01)
        assert abs(two_b2 - 1.0205144336438037e-04) < 1e-18
        assert abs(two_b2 / 1e-4 - 1.0) < 0.03  # ~2% above the |b1|^4 asymptote

    def test_residual_of_defining_equation(self):
        for x in np.geomspace(1e-6, 0.24, 60):
            b2 = links.uncorrelated_pair_amplitude(float(x))
            lhs = x + 2 * b2
            rhs = 2 * b2 / (x + 2 * b2)
            assert abs(lhs - rhs) < 1e-12

    def test_asymptote_small_drive(self):
        for x in np.geomspace(1e-6, 1e-2, 30):
            b2 = links.uncorrelated_pair_amplitude(float(x))
            assert abs(2 * b2 / (x * x) - 1.0) < 0.05

    def test_domain_error(self):
        with pytest.raises(DomainError):
            links.uncorrelated_pair_amplitude(0.26)


class TestMixingAngle:
    def test_equal_branches_give_pi_over_4(self):
        # engineer tan^2 = 1 by direct substitution into the formula
        eff = links.ChannelEfficiencies(eta=1.0, eta0_prime=1.0, eta_fc=1.0, eta_m=1.0)
        n = 10
        a1sq = 0.04
        ion = links.IonEmission.constant(a1sq, 1e-5, n)
        # choose beta so that N b1 a0^2 = a1^2 b0^2 exactly
        # iterate since b0 depends on b1 through the two-pair relation
        b1 = a1sq / n
        for _ in range(50):
            b0sq = 1.0 - b1 - links.uncorrelated_pair_amplitude(b1)
            b1 = a1sq * b0sq / (n * (1.0 - a1sq))
        spdc = links.SpdcTimeBin(b1, 1e-6, 1e-7)
        theta = links.mixing_angle(ion, spdc, eff)
        assert abs(math.tan(theta) ** 2 - 1.0) < 1e-10

    def test_formula_by_direct_substitution(self):
        ion = links.IonEmission.constant(0.02, 1e-5, 10)
        spdc = links.SpdcTimeBin(0.003, 1e-6, 1e-7)
        theta = links.mixing_angle(ion, spdc, EFF)
        expected = (EFF.eta_prime * EFF.eta_m * 1.0 * 0.003 * 0.98) / (
            EFF.eta * 0.1 * 0.02 * spdc.beta0_sq
        )
        assert abs(math.tan(theta) ** 2 - expected) < 1e-12

    def test_doubling_eta_prime_doubles_tan2(self):
        ion = links.IonEmission.constant(0.01, 1e-5, 10)
        spdc = links.SpdcTimeBin(0.002, 1e-6, 1e-7)
        lo = links.ChannelEfficiencies(eta=0.9, eta0_prime=0.45, eta_fc=0.9, eta_m=0.8)
        hi = links.ChannelEfficiencies(eta=0.9, eta0_prime=0.9, eta_fc=0.9, eta_m=0.8)
        t_lo = math.tan(links.mixing_angle(ion, spdc, lo)) ** 2
        t_hi = math.tan(links.mixing_angle(ion, spdc, hi)) ** 2
        assert abs(t_hi - 2.0 * t_lo) < 1e-14

    def test_click_time_independence_under_flux_matching(self):
        env = np.array([0.02, 0.08, 0.15, 0.25, 0.25, 0.15, 0.08, 0.02])
        ion = links.IonEmission(3e-3, 1e-5, env)
        thetas = [
            links.mixing_angle(
                ion,
                links.SpdcTimeBin(1e-3, 1e-6, 1e-7, envelope_weight=len(env) * w),
                EFF,
                bin_index=i,
            )
            for i, w in enumerate(env)
        ]
        assert max(thetas) - min(thetas) < 1e-12

    def test_degenerate_alpha_raises(self):
        ion = links.IonEmission.constant(0.0, 1e-5, 10)
        spdc = links.SpdcTimeBin(1e-3, 1e-6, 1e-7)
        with pytest.raises(DegenerateInput):
            links.mixing_angle(ion, spdc, EFF)


class TestClosedForms:
    def test_weights_at_eta_m_one(self):
        a0, a1 = links.en_closed_form_weights(math.pi / 6, 1.0)
        assert a0 == 0.0
        assert abs(a1 - 1.0) < 1e-15

    def test_weights_reference_point(self):
        # eta_m = 0.8, tan^2 = 1
        a0, a1 = links.en_closed_form_weights(math.pi / 4, 0.8)
        assert abs(a0 - 0.2 / 1.8) < 1e-15
        assert abs(a1 - 1.6 / 1.8) < 1e-15

    def test_zeroth_order_trace_identity(self):
        rng = np.random.default_rng(21)
        for _ in range(300):
            theta = rng.uniform(1e-4, math.pi / 2 - 1e-4)
            eta_m = rng.uniform(1e-4, 1.0)
            a0, a1 = links.en_closed_form_weights(theta, eta_m)
            assert abs(a0 + a1 - 1.0) < 1e-12

    def test_p_en_lone_ion(self):
        ion = links.IonEmission.constant(0.01, 1e-5, 10)
        spdc = links.SpdcTimeBin(0.0, 1e-6, 1e-7)
        assert abs(links.en_success_probability(ion, spdc, EFF) - EFF.eta * 0.01) < 1e-15

    def test_p_en_reference_arithmetic(self):
        # eta 0.9, |a1|^2 0.01, eta_m 0.8 with tan^2 fixed at the A4 value 0.676123...
        tan2 = 0.8 / math.sqrt(1.4)
        expected = 0.9 * 0.01 * (1.0 + tan2 / 0.8)
        assert abs(expected - 0.016606388292556656) < 1e-15
        theta = math.atan(math.sqrt(tan2))
        got = 0.9 * 0.01 * (1.0 + math.tan(theta) ** 2 / 0.8)
        assert abs(got - expected) < 1e-15

    def test_p_en_monotone_in_eta_and_alpha(self):
        spdc = links.SpdcTimeBin(1e-3, 1e-6, 1e-7)
        base = links.en_success_probability(links.IonEmission.constant(1e-3, 1e-5, 10), spdc, EFF)
        more_alpha = links.en_success_probability(
            links.IonEmission.constant(2e-3, 1e-5, 10), spdc, EFF)
        eff_hi = links.ChannelEfficiencies(eta=0.95, eta0_prime=0.9, eta_fc=0.9, eta_m=0.8)
        more_eta = links.en_success_probability(
            links.IonEmission.constant(1e-3, 1e-5, 10), spdc, eff_hi)
        assert more_alpha > base
        assert more_eta > base


class TestEnOracle:
    def test_eta_m_one_kills_A0(self):
        eff = links.ChannelEfficiencies(eta=0.9, eta0_prime=0.9, eta_fc=0.9, eta_m=1.0)
        link = make_en(1e-4, 1e-4, eff)
        assert link.A0 == 0.0
        assert abs(link.A1 - 1.0) < 1e-3

    def test_weights_normalized(self):
        link = make_en(1e-3, 1e-3)
        assert abs(link.weights_sum() - 1.0) < 1e-10
        assert abs(link.rho.trace_value - 1.0) < 1e-10

    def test_closed_form_agreement_scaling(self):
        # halving the emission amplitudes (quartering the probabilities)
        # shrinks |oracle - closed form| by ~4x for A0/A1, faster for P_EN
        eps = 1e-3
        link_hi = make_en(eps, eps)
        link_lo = make_en(eps / 4, eps / 4)
        theta_hi, theta_lo = link_hi.theta, link_lo.theta
        for link, theta in ((link_hi, theta_hi), (link_lo, theta_lo)):
            a0c, a1c = links.en_closed_form_weights(theta, EFF.eta_m)
            link.closed = (a0c, a1c)
        d_hi = abs(link_hi.A0 - link_hi.closed[0])
        d_lo = abs(link_lo.A0 - link_lo.closed[0])
        assert d_hi / d_lo >= 3.5
        d_hi = abs(link_hi.A1 - link_hi.closed[1])
        d_lo = abs(link_lo.A1 - link_lo.closed[1])
        assert d_hi / d_lo >= 3.5

    def test_p_en_oracle_matches_formula_to_second_order(self):
        eps = 1e-3
        ion = links.IonEmission.constant(eps, 1e-5, 10)
        spdc = links.SpdcTimeBin(eps, 1e-6, 1e-7)
        link = make_en(eps, eps)
        closed = links.en_success_probability(ion, spdc, EFF)
        rel = abs(link.herald_probability - closed) / closed
        assert rel < 0.01
        link_lo = make_en(eps / 4, eps / 4)
        ion_lo = links.IonEmission.constant(eps / 4, 1e-5, 10)
        spdc_lo = links.SpdcTimeBin(eps / 4, 1e-6, 1e-7)
        closed_lo = links.en_success_probability(ion_lo, spdc_lo, EFF)
        d_hi = abs(link.herald_probability - closed)
        d_lo = abs(link_lo.herald_probability - closed_lo)
        assert d_hi / d_lo >= 3.5

    def test_perturbative_weights_shrink_with_emissions(self):
        # A1' and A2 are first order in the emission probabilities
        hi = make_en(2e-3, 2e-3)
        lo = make_en(1e-3, 1e-3)
        assert hi.A1_prime / lo.A1_prime == pytest.approx(2.0, rel=0.05)
        assert hi.A2 / lo.A2 == pytest.approx(2.0, rel=0.05)

    def test_dark_branch_adds_vacuum_weight(self):
        clean = make_en(1e-4, 1e-4)
        dark = make_en(1e-4, 1e-4, dark=1e-7)
        assert dark.A1 < clean.A1
        assert dark.rho.trace_value == pytest.approx(1.0, abs=1e-10)


class TestBbOracle:
    def test_zero_fiber_kills_probability(self):
        eff = links.ChannelEfficiencies(eta_m=0.8, eta_bb=0.0)
        spdc = links.SpdcTimeBin(1e-3, 1e-6, 1e-7)
        link = links.bb_heralded_state(spdc, spdc, eff, 0.0)
        assert link.herald_probability == 0.0

    def test_symmetric_under_arm_exchange(self):
        eff = links.ChannelEfficiencies(eta_m=0.8, eta_bb=0.07)
        spdc = links.SpdcTimeBin(2e-3, 1e-6, 1e-7)
        link = links.bb_heralded_state(spdc, spdc, eff, 0.0)
        swapped = link.rho.reorder(("mem_r", "mem_l"))
        assert np.max(np.abs(link.rho.matrix - swapped.matrix)) < 1e-12

    def test_leading_probability_scaling(self):
        eff = links.ChannelEfficiencies(eta_m=0.8, eta_bb=0.05)
        hi = links.bb_heralded_state(
            links.SpdcTimeBin(1e-3, 1e-6, 1e-7), links.SpdcTimeBin(1e-3, 1e-6, 1e-7), eff)
        lo = links.bb_heralded_state(
            links.SpdcTimeBin(5e-4, 1e-6, 1e-7), links.SpdcTimeBin(5e-4, 1e-6, 1e-7), eff)
        ratio = hi.herald_probability / lo.herald_probability
        assert abs(ratio - 2.0) < 0.01
        # constant fixed by the oracle: P ~ 2 eta_bb g1^2 at leading order
        assert abs(hi.herald_probability / (2 * 0.05 * 1e-3) - 1.0) < 0.02

    def test_theta_is_pi_over_4(self):
        eff = links.ChannelEfficiencies(eta_m=0.8, eta_bb=0.05)
        spdc = links.SpdcTimeBin(1e-3, 1e-6, 1e-7)
        link = links.bb_heralded_state(spdc, spdc, eff, 0.0)
        assert link.theta == pytest.approx(math.pi / 4)


class TestDataTypes:
    def test_envelope_must_normalize(self):
        with pytest.raises(ValueError):
            links.IonEmission(0.01, 1e-5, np.array([0.5, 0.6]))

    def test_bin_covers_correlation_time(self):
        with pytest.raises(ValueError):
            links.SpdcTimeBin(1e-3, 2e-7, 1e-7)

    def test_beta2_is_derived(self):
        spdc = links.SpdcTimeBin(0.01, 1e-6, 1e-7)
        assert spdc.beta2_sq == links.uncorrelated_pair_amplitude(0.01)
        assert spdc.beta0_sq == pytest.approx(1.0 - 0.01 - spdc.beta2_sq)

    def test_eta_prime_product(self):
        eff = links.ChannelEfficiencies(eta0_prime=0.5, eta_fc=0.5)
        assert eff.eta_prime == 0.25
        with pytest.raises(ValueError):
            links.ChannelEfficiencies(eta=1.2)
