"""Timing-model tests: fiber budget, waits, E[max], durations, direct baseline."""

import math

import numpy as np
import pytest

from ionlink import swaps, timing
from ionlink.exceptions import ConfigError

SC = timing.ScenarioConfig  # shorthand


class TestFiber:
    def test_zero_length(self):
        assert timing.fiber_transmission(0.0, 0.2) == 1.0

    def test_fifty_km_at_standard_attenuation(self):
        assert timing.fiber_transmission(50.0, 0.2) == pytest.approx(0.1, abs=1e-15)

    def test_attenuation_length_gives_1_over_e(self):
        l_att = 10.0 / (0.2 * math.log(10.0))
        assert l_att == pytest.approx(21.714724095162588)
        assert timing.fiber_transmission(l_att, 0.2) == pytest.approx(1.0 / math.e, rel=1e-12)


class TestWaits:
    def test_en_certain_success(self):
        assert timing.en_expected_wait(1.0, 1e-5, 0.0) == pytest.approx(1e-5)

    def test_en_geometric(self):
        # P = 0.01, T_a = 10 us: a hundred attempts on average
        assert timing.en_expected_wait(0.01, 1e-5, 0.0) == pytest.approx(1e-3)
        assert timing.en_expected_wait(0.005, 1e-5, 0.0) == pytest.approx(2e-3)

    def test_multiplexed_round_probability(self):
        # independent evaluation via plain exponentiation
        assert timing.multiplexed_round_probability(1e-3, 1000) == pytest.approx(
            1.0 - (1.0 - 1e-3) ** 1000, rel=1e-12)
        assert timing.multiplexed_round_probability(1e-3, 1000) == pytest.approx(
            0.6323045752290363, rel=1e-12)
        assert timing.multiplexed_round_probability(1.0, 5) == 1.0

    def test_bb_wait_single_mode(self):
        assert timing.bb_expected_wait(1.0, 1, 2.0) == pytest.approx(2.0)

    def test_bb_wait_saturates_with_modes(self):
        assert timing.bb_expected_wait(1e-3, 10**7, 1.25e-3) == pytest.approx(1.25e-3)

    def test_round_time_reference(self):
        # 400 km with a repeater: each backbone link spans 200 km,
        # the heralding station sits 100 km from the nodes: 2*100/2e5 = 1 ms
        sc = SC(total_distance_km=400.0, topology=swaps.SwapTopology.with_repeater())
        assert sc.bb_link_span_km == pytest.approx(200.0)
        assert sc.bb_round_time_s == pytest.approx(1e-3)


class TestExpectedMax:
    def test_two_identical_processes_closed_form(self):
        # E[max] of two iid geometrics: tau (2/p - 1/(2p - p^2))
        for p in (1e-4, 1e-2, 0.5):
            tau = 1.0
            closed = tau * (2.0 / p - 1.0 / (2.0 * p - p * p))
            got = timing.expected_max_completion([(p, tau), (p, tau)])
            assert abs(got - closed) / closed < 1e-9

    @pytest.mark.parametrize("p", [1e-4, 1e-2, 0.5])
    def test_monte_carlo_agreement(self, p):
        rng = np.random.default_rng(1234)
        procs = [(p, 1.0), (p, 1.0)]
        exact = timing.expected_max_completion(procs)
        draws = np.stack([rng.geometric(p, size=10**6) for _ in procs], axis=1)
        mc = float(draws.max(axis=1).mean())
        assert abs(exact - mc) / mc < 0.01

    def test_monte_carlo_mixed_clocks(self):
        rng = np.random.default_rng(99)
        procs = [(1e-3, 1e-5), (0.25, 1.3e-3), (0.25, 1.3e-3), (1e-3, 1e-5)]
        exact = timing.expected_max_completion(procs)
        draws = np.stack([tau * rng.geometric(p, size=10**6) for p, tau in procs], axis=1)
        mc = float(draws.max(axis=1).mean())
        assert abs(exact - mc) / mc < 0.01

    def test_single_process_reduces_to_geometric_mean(self):
        assert timing.expected_max_completion([(0.2, 3.0)]) == pytest.approx(15.0)

    def test_dominated_by_slowest(self):
        fast = (0.9, 1.0)
        slow = (1e-3, 1.0)
        got = timing.expected_max_completion([fast, slow])
        assert got == pytest.approx(1000.0, rel=0.01)

    def test_zero_probability_is_infinite(self):
        assert timing.expected_max_completion([(0.0, 1.0), (0.5, 1.0)]) == math.inf


class TestScenario:
    def test_fig3_defaults(self):
        sc = SC()
        assert sc.n_bins == 10
        assert sc.efficiencies.eta_m == 0.8
        assert sc.efficiencies.eta_prime == pytest.approx(0.81)
        assert sc.dark_click_prob_resolution == pytest.approx(1e-12)
        assert sc.dark_click_prob_pulse == pytest.approx(1e-8)

    def test_eta_bb_uses_half_link_path(self):
        sc = SC(total_distance_km=500.0)
        # with a repeater each photon travels 125 km
        assert sc.eta_bb() == pytest.approx(0.9 * 10 ** (-0.2 * 125 / 10), rel=1e-12)

    def test_bin_count_must_divide(self):
        with pytest.raises(ConfigError):
            SC(ion_pulse_duration_s=1.05e-5)

    def test_acceptance_interval_floor(self):
        with pytest.raises(ConfigError):
            SC(correlation_time_s=5e-7)


class TestDurations:
    def test_total_duration_formula(self):
        assert timing.total_duration(1.0, 1.0) == 2.0
        assert timing.total_duration(1.0, 0.5) == 4.0
        assert timing.total_duration(1.0, 0.3048) == pytest.approx(2.0 / 0.3048)

    def test_certain_success_at_zero_distance_costs_one_pulse(self):
        sc = SC(total_distance_km=1e-9)
        parts = timing.single_link_duration(sc, 1.0, 1.0, 1.0, 1.0, 1.0)
        assert parts["t_single_link"] == pytest.approx(sc.ion_pulse_duration_s, rel=1e-6)

    def test_doubling_swap_probability_halves_duration(self):
        sc = SC(total_distance_km=300.0)
        lo = timing.single_link_duration(sc, 0.01, 1e-4, 0.5, 0.5, 0.2)
        hi = timing.single_link_duration(sc, 0.01, 1e-4, 0.5, 0.5, 0.4)
        assert lo["t_single_link"] == pytest.approx(2.0 * hi["t_single_link"], rel=1e-12)

    def test_duration_decreasing_in_every_probability(self):
        sc = SC(total_distance_km=300.0)
        base = timing.single_link_duration(sc, 0.01, 1e-4, 0.5, 0.5, 0.2)["t_single_link"]
        for kw in ("p_en", "p_bb_per_mode", "p_s1_left", "p_s1_right", "p_s2"):
            args = {"p_en": 0.01, "p_bb_per_mode": 1e-4, "p_s1_left": 0.5,
                    "p_s1_right": 0.5, "p_s2": 0.2}
            args[kw] = args[kw] * 1.25
            faster = timing.single_link_duration(sc, **args)["t_single_link"]
            assert faster < base

    def test_duration_nondecreasing_in_distance_fixed_emissions(self):
        prev = None
        for l_km in (100.0, 250.0, 500.0, 800.0):
            sc = SC(total_distance_km=l_km, fidelity_target=0.9)
            r = timing.evaluate_hybrid(sc, 4e-3, 3e-4, 8e-3)
            if prev is not None:
                assert r.total_s >= prev
            prev = r.total_s

    def test_hybrid_result_invariant(self):
        sc = SC(total_distance_km=400.0, fidelity_target=0.9)
        r = timing.evaluate_hybrid(sc, 4e-3, 3e-4, 8e-3)
        assert r.total_s == pytest.approx(2.0 * r.single_link_s / r.p_purify, rel=1e-12)
        assert 0.0 < r.fidelity < 1.0


class TestDirectBaseline:
    def test_near_ideal_short_link(self):
        sc = SC(total_distance_km=1e-6, dark_rate_hz=0.0, fidelity_target=0.9,
                efficiencies=timing.ChannelEfficiencies(eta=1.0, eta0_prime=1.0,
                                                        eta_fc=1.0, eta_m=1.0))
        r = timing.evaluate_direct(sc, 1e-3)
        assert r.fidelity == pytest.approx(1.0, abs=5e-3)
        # leading success probability ~ 2 |a1|^2: duration ~ T_a / (2 |a1|^2)
        assert r.total_s == pytest.approx(sc.ion_pulse_duration_s / (2e-3), rel=0.05)

    def test_fidelity_penalty_linear_in_emission(self):
        sc = SC(total_distance_km=1e-6, dark_rate_hz=0.0,
                efficiencies=timing.ChannelEfficiencies(eta=1.0, eta0_prime=1.0,
                                                        eta_fc=1.0, eta_m=1.0))
        d1 = 1.0 - timing.evaluate_direct(sc, 1e-3).fidelity
        d2 = 1.0 - timing.evaluate_direct(sc, 2e-3).fidelity
        assert d2 / d1 == pytest.approx(2.0, rel=0.05)

    def test_dark_floor_breaks_fidelity_at_long_distance(self):
        sc = SC(total_distance_km=400.0, topology=swaps.SwapTopology.without_repeater())
        r = timing.evaluate_direct(sc, 1e-3)
        assert r.fidelity < 0.9

    def test_repeater_variant_equals_two_half_links(self):
        sc = SC(total_distance_km=200.0, topology=swaps.SwapTopology.without_repeater())
        rep = timing.evaluate_direct(sc, 5e-3, ion_repeater=True)
        half = timing.evaluate_direct(
            SC(total_distance_km=100.0, topology=swaps.SwapTopology.without_repeater()), 5e-3)
        # generation: E[max of two iid] of the half-link process
        p, attempt = half.p_en, sc.ion_pulse_duration_s + 100.0 / sc.c_fiber_km_per_s
        expected = timing.expected_max_completion([(p, attempt), (p, attempt)])
        assert rep.total_s == pytest.approx(expected, rel=1e-9)
        # the deterministic central swap composes two half-link states
        assert rep.fidelity <= half.fidelity
        assert rep.fidelity == pytest.approx(half.fidelity, abs=0.05)

    def test_direct_uses_full_distance_efficiency(self):
        # success probability scales with eta_F(L), not eta_F(L/2)
        sc1 = SC(total_distance_km=100.0, dark_rate_hz=0.0,
                 topology=swaps.SwapTopology.without_repeater())
        sc2 = SC(total_distance_km=150.0, dark_rate_hz=0.0,
                 topology=swaps.SwapTopology.without_repeater())
        r1 = timing.evaluate_direct(sc1, 1e-3)
        r2 = timing.evaluate_direct(sc2, 1e-3)
        assert r1.p_en / r2.p_en == pytest.approx(10.0 ** (0.2 * 50 / 10), rel=0.01)
