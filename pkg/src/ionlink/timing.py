"""Expected-duration model: attempt clocks, parallel waiting, swap retries.

Each link generation is an independent geometric process on its own clock
(edge nodes: the ion pulse plus reset; backbone: one communication round of
twice the propagation time to the heralding station).  The expected
completion time of the slowest process, E[max], is computed exactly from
the joint survival function; swap retries multiply the parallel generation
time by the inverse swap probabilities, and purification doubles the count
of fundamental links.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fock, links, swaps
from .exceptions import ConfigError
from .links import ChannelEfficiencies, IonEmission, SpdcTimeBin
from .swaps import IonIonState, SwapTopology

_EXACT_SUM_THRESHOLD = 0.01  # per-attempt hazard above which the sum is done exactly
_TAIL_DECADES = 40.0


def fiber_transmission(length_km: float, attenuation_db_per_km: float) -> float:
    """Fiber power transmission 10^(-attenuation * length / 10)."""
    if length_km < 0:
        raise ValueError("length must be nonnegative")
    return 10.0 ** (-attenuation_db_per_km * length_km / 10.0)


def _poisson_click(rate_hz: float, window_s: float) -> float:
    """Dark-click probability in a window: rate * window, Poisson-saturated."""
    return -math.expm1(-rate_hz * window_s)


def en_expected_wait(p_en: float, pulse_duration: float, reset_time: float = 0.0) -> float:
    """Expected edge-node generation time under geometric retries."""
    if p_en <= 0.0:
        return math.inf
    return (pulse_duration + reset_time) / p_en


def bb_expected_wait(p_bb_per_mode: float, n_modes: int, round_time: float) -> float:
    """Expected multiplexed backbone generation time.

    One round succeeds with q = 1 - (1 - p)^N over the N parallel modes.
    """
    q = multiplexed_round_probability(p_bb_per_mode, n_modes)
    if q <= 0.0:
        return math.inf
    return round_time / q


def multiplexed_round_probability(p_per_mode: float, n_modes: int) -> float:
    if p_per_mode < 0.0 or p_per_mode > 1.0:
        raise ValueError("per-mode probability must lie in [0, 1]")
    if p_per_mode == 0.0:
        return 0.0
    return -math.expm1(n_modes * math.log1p(-min(p_per_mode, 1.0 - 1e-16)))


def _expected_min(processes: list[tuple[float, float]]) -> float:
    """E[min] of geometric completion times (q_k, tau_k).

    The joint survival is exp(-Lambda t) times a bounded quasi-periodic
    phase factor per clock.  Clocks whose per-attempt hazard lambda*tau is
    below a threshold contribute their uniform-phase average
    (e^{lambda tau} - 1)/(lambda tau), with relative error bounded by
    lambda*tau/2; the remaining coarse clocks are summed exactly segment by
    segment against the residual exponential, out to a negligible tail.
    """
    lams = []
    for q, tau in processes:
        qc = min(max(q, 0.0), 1.0 - 1e-16)
        if qc <= 0.0:
            return math.inf
        lams.append(-math.log1p(-qc) / tau)
    lam_tau = [l * t for l, (_, t) in zip(lams, processes)]
    lam_total = sum(lams)

    smooth = 1.0
    lam_smooth = 0.0
    coarse: list[tuple[float, float]] = []  # (lambda, tau)
    for lam, lt, (_, tau) in zip(lams, lam_tau, processes):
        if lt < _EXACT_SUM_THRESHOLD:
            smooth *= math.expm1(lt) / lt
            lam_smooth += lam
        else:
            coarse.append((lam, tau))
    if not coarse:
        return smooth / lam_total

    # floor(t/tau) lags t/tau by up to one period, so stretch the horizon by
    # the summed per-attempt hazards to keep the discarded tail below e^-40
    horizon = (_TAIL_DECADES + sum(lam * tau for lam, tau in coarse)) / lam_total
    grids = [np.arange(tau, horizon, tau) for (_, tau) in coarse]
    points = np.unique(np.concatenate([np.array([0.0])] + grids))
    log_surv = np.zeros(len(points))
    for lam, tau in coarse:
        log_surv += -lam * tau * np.floor(points / tau + 1e-12)
    surv = np.exp(log_surv)
    edges = np.append(points, horizon)
    if lam_smooth > 0.0:
        seg = (np.exp(-lam_smooth * edges[:-1]) - np.exp(-lam_smooth * edges[1:])) / lam_smooth
    else:
        seg = np.diff(edges)
    total = float(np.dot(surv, seg))
    tail = surv[-1] * math.exp(-lam_smooth * horizon) / lam_total
    return smooth * (total + tail)


def expected_max_completion(processes) -> float:
    """E[max] of independent geometric completion times.

    ``processes`` is an iterable of (success probability per attempt,
    attempt period).  Uses inclusion-exclusion over subsets:
    E[max] = sum_S (-1)^{|S|+1} E[min_S].
    """
    procs = [(float(q), float(tau)) for q, tau in processes]
    if not procs:
        return 0.0
    for q, tau in procs:
        if tau <= 0.0:
            raise ValueError("attempt period must be positive")
        if q <= 0.0:
            return math.inf
    n = len(procs)
    total = 0.0
    for mask in range(1, 2**n):
        subset = [procs[k] for k in range(n) if mask >> k & 1]
        sign = -1.0 if len(subset) % 2 == 0 else 1.0
        total += sign * _expected_min(subset)
    return total


@dataclass
class ScenarioConfig:
    """All physical parameters of one protocol run."""

    total_distance_km: float = 500.0
    topology: SwapTopology = field(default_factory=SwapTopology.with_repeater)
    n_bb_modes: int = 1000
    attenuation_db_per_km: float = 0.2
    c_fiber_km_per_s: float = 2.0e5
    ion_pulse_duration_s: float = 10e-6
    time_bin_duration_s: float = 1e-6
    correlation_time_s: float = 100e-9
    detector_resolution_s: float = 1e-9
    dark_rate_hz: float = 1e-3
    efficiencies: ChannelEfficiencies = field(default_factory=ChannelEfficiencies)
    fidelity_target: float = 0.99
    reset_time_s: float = 0.0
    fock_cutoff: int = links.DEFAULT_CUTOFF

    def __post_init__(self):
        for name in ("total_distance_km", "c_fiber_km_per_s", "ion_pulse_duration_s",
                     "time_bin_duration_s", "correlation_time_s", "detector_resolution_s"):
            if getattr(self, name) <= 0:
                raise ConfigError("must be positive", field=name)
        for name in ("attenuation_db_per_km", "dark_rate_hz", "reset_time_s"):
            if getattr(self, name) < 0:
                raise ConfigError("must be nonnegative", field=name)
        if self.n_bb_modes < 1:
            raise ConfigError("must be a positive integer", field="n_bb_modes")
        if not 0.0 < self.fidelity_target <= 1.0:
            raise ConfigError("must lie in (0, 1]", field="fidelity_target")
        ratio = self.ion_pulse_duration_s / self.time_bin_duration_s
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("ion pulse must span an integer number of time bins",
                              field="time_bin_duration_s")
        if self.time_bin_duration_s < 3.0 * self.correlation_time_s - 1e-15:
            raise ConfigError("acceptance bin must cover >= 3 correlation times",
                              field="correlation_time_s")

    @property
    def n_bins(self) -> int:
        return int(round(self.ion_pulse_duration_s / self.time_bin_duration_s))

    @property
    def bb_link_span_km(self) -> float:
        """Distance covered by one backbone link."""
        return self.total_distance_km / (self.topology.n_segments / 2)

    @property
    def bb_round_time_s(self) -> float:
        """Twice the propagation time from a node to the heralding station."""
        return self.bb_link_span_km / self.c_fiber_km_per_s

    @property
    def dark_click_prob_resolution(self) -> float:
        return _poisson_click(self.dark_rate_hz, self.detector_resolution_s)

    @property
    def dark_click_prob_bin(self) -> float:
        return _poisson_click(self.dark_rate_hz, self.time_bin_duration_s)

    @property
    def dark_click_prob_pulse(self) -> float:
        return _poisson_click(self.dark_rate_hz, self.ion_pulse_duration_s)

    def eta_bb(self) -> float:
        """Per-photon backbone efficiency: intrinsic SPDC times half-link fiber."""
        eff = self.efficiencies
        path = self.bb_link_span_km / 2.0
        return eff.eta0_prime * fiber_transmission(path, self.attenuation_db_per_km)

    def efficiencies_at_distance(self) -> ChannelEfficiencies:
        return replace(self.efficiencies, eta_bb=self.eta_bb())


@dataclass
class DurationResult:
    """Optimized-point output: durations, fidelity, probabilities, breakdown."""

    protocol: str
    feasible: bool
    fidelity: float
    single_link_s: float
    total_s: float
    alpha1_sq: float
    beta1_sq: float | None = None
    gamma1_sq: float | None = None
    p_en: float | None = None
    p_bb_per_mode: float | None = None
    p_s1_left: float | None = None
    p_s1_right: float | None = None
    p_s2: float | None = None
    p_purify: float | None = None
    en_wait_s: float | None = None
    bb_wait_s: float | None = None
    parallel_wait_s: float | None = None
    swap_retry_factor: float | None = None
    announce_s: float | None = None

    @property
    def rate_hz(self) -> float:
        return 0.0 if not math.isfinite(self.total_s) or self.total_s <= 0 else 1.0 / self.total_s


def single_link_duration(scenario: ScenarioConfig, p_en: float, p_bb_per_mode: float,
                         p_s1_left: float, p_s1_right: float | None, p_s2: float) -> dict:
    """Expected duration of one fundamental ion-ion link.

    Parallel generation of both edge links and the backbone link(s), retried
    from scratch whenever a probabilistic swap fails; the herald of the
    final swap travels back to the far end between retries.
    """
    en_clock = scenario.ion_pulse_duration_s + scenario.reset_time_s
    q_bb = multiplexed_round_probability(p_bb_per_mode, scenario.n_bb_modes)
    round_time = scenario.bb_round_time_s
    procs = [(p_en, en_clock), (p_en, en_clock)]
    n_bb_links = 2 if scenario.topology.has_repeater else 1
    procs += [(q_bb, round_time)] * n_bb_links
    parallel = expected_max_completion(procs)
    retry = p_s1_left * p_s2 * (p_s1_right if p_s1_right is not None else 1.0)
    if scenario.topology.has_repeater:
        announce = (scenario.total_distance_km / 2.0) / scenario.c_fiber_km_per_s
    else:
        announce = scenario.total_distance_km / scenario.c_fiber_km_per_s
    t_sl = (parallel + announce) / retry if retry > 0 else math.inf
    return {
        "t_single_link": t_sl,
        "parallel_wait": parallel,
        "en_wait": en_expected_wait(p_en, scenario.ion_pulse_duration_s, scenario.reset_time_s),
        "bb_wait": bb_expected_wait(p_bb_per_mode, scenario.n_bb_modes, round_time),
        "retry_factor": 1.0 / retry if retry > 0 else math.inf,
        "announce": announce,
    }


def total_duration(t_single_link: float, p_purify: float) -> float:
    """Average duration including purification of two sequential links."""
    if p_purify <= 0.0:
        return math.inf
    return 2.0 * t_single_link / p_purify


def evaluate_hybrid(scenario: ScenarioConfig, alpha1_sq: float, beta1_sq: float,
                    gamma1_sq: float) -> DurationResult:
    """Full hybrid-protocol evaluation at fixed emission probabilities."""
    eff = scenario.efficiencies_at_distance()
    ion = IonEmission.constant(alpha1_sq, scenario.ion_pulse_duration_s, scenario.n_bins)
    spdc_en = SpdcTimeBin(beta1_sq, scenario.time_bin_duration_s, scenario.correlation_time_s)
    spdc_bb = SpdcTimeBin(gamma1_sq, scenario.time_bin_duration_s, scenario.correlation_time_s)
    cutoff = scenario.fock_cutoff

    en = links.en_heralded_state(ion, spdc_en, eff, scenario.dark_click_prob_resolution,
                                 cutoff=cutoff)
    bb = links.bb_heralded_state(spdc_bb, spdc_bb, eff, scenario.dark_click_prob_bin,
                                 cutoff=cutoff)
    if bb.herald_probability <= 0.0 or en.herald_probability <= 0.0:
        return DurationResult(protocol=_hybrid_name(scenario.topology), feasible=False,
                              fidelity=0.0, single_link_s=math.inf, total_s=math.inf,
                              alpha1_sq=alpha1_sq, beta1_sq=beta1_sq, gamma1_sq=gamma1_sq)

    outcome = swaps.compose_final_state(en, bb, en, eff, scenario.topology,
                                        scenario.dark_click_prob_resolution, cutoff=cutoff)
    purified, p_p = swaps.purify(outcome.state, outcome.state)
    f = swaps.fidelity(purified)

    parts = single_link_duration(scenario, en.herald_probability, bb.herald_probability,
                                 outcome.p_s1_left, outcome.p_s1_right, outcome.p_s2)
    t_total = total_duration(parts["t_single_link"], p_p)
    return DurationResult(
        protocol=_hybrid_name(scenario.topology),
        feasible=f >= scenario.fidelity_target,
        fidelity=f,
        single_link_s=parts["t_single_link"],
        total_s=t_total,
        alpha1_sq=alpha1_sq,
        beta1_sq=beta1_sq,
        gamma1_sq=gamma1_sq,
        p_en=en.herald_probability,
        p_bb_per_mode=bb.herald_probability,
        p_s1_left=outcome.p_s1_left,
        p_s1_right=outcome.p_s1_right,
        p_s2=outcome.p_s2,
        p_purify=p_p,
        en_wait_s=parts["en_wait"],
        bb_wait_s=parts["bb_wait"],
        parallel_wait_s=parts["parallel_wait"],
        swap_retry_factor=parts["retry_factor"],
        announce_s=parts["announce"],
    )


def _hybrid_name(topo: SwapTopology) -> str:
    return "hybrid-repeater" if topo.has_repeater else "hybrid"


def _direct_heralded_state(eta_arm: float, alpha1_sq: float, dark_click_prob: float,
                           cutoff: int) -> tuple[IonIonState, float]:
    """Single-click ion-ion link: both ions emit toward a balanced splitter."""
    a0 = math.sqrt(1.0 - alpha1_sq)
    a1 = math.sqrt(alpha1_sq)
    ion_a = fock.FockState.from_terms(("ion_a", "ph_a"), cutoff, {(0, 0): a0, (1, 1): a1})
    ion_b = fock.FockState.from_terms(("ion_b", "ph_b"), cutoff, {(0, 0): a0, (1, 1): a1})
    op = ion_a.tensor(ion_b).to_density()
    op = fock.apply_loss(op, "ph_a", eta_arm)
    op = fock.apply_loss(op, "ph_b", eta_arm)
    op = fock.apply_beamsplitter(op, "ph_a", "ph_b", 0.5, allow_truncation=True)
    cond, p_plus = fock.herald_click(op, ["ph_a", "ph_b"], (1, 0), dark_click_prob)
    if p_plus <= 0.0:
        return IonIonState(D=np.array([[1.0, 0.0], [0.0, 0.0]]), alpha=0.0), 0.0
    cond = cond.normalized()
    dd = np.array([[cond.population((k, l)) for l in (0, 1)] for k in (0, 1)])
    coh = cond.element((0, 1), (1, 0)).real
    total = dd.sum()
    state = IonIonState(D=dd / total, alpha=abs(coh) / total, sign=1 if coh >= 0 else -1)
    return state, 2.0 * p_plus


def evaluate_direct(scenario: ScenarioConfig, alpha1_sq: float,
                    ion_repeater: bool = False) -> DurationResult:
    """Direct single-click ion-ion generation over the full distance.

    Per-photon efficiency ``eta_fc * eta * eta_F(L)``; the detectors stay
    open for the whole ion pulse, so the dark probability accumulates over
    its duration.  With an ion repeater the link is built from two L/2
    halves generated in parallel and joined by a deterministic local swap.
    """
    eff = scenario.efficiencies
    span = scenario.total_distance_km / (2.0 if ion_repeater else 1.0)
    eta_arm = eff.eta_fc * eff.eta * fiber_transmission(span, scenario.attenuation_db_per_km)
    p_dark = scenario.dark_click_prob_pulse
    cutoff = scenario.fock_cutoff

    half, p_click = _direct_heralded_state(eta_arm, alpha1_sq, p_dark, cutoff)
    name = "direct-repeater" if ion_repeater else "direct"
    if p_click <= 0.0:
        return DurationResult(protocol=name, feasible=False, fidelity=0.0,
                              single_link_s=math.inf, total_s=math.inf, alpha1_sq=alpha1_sq)

    attempt = scenario.ion_pulse_duration_s + scenario.reset_time_s + span / scenario.c_fiber_km_per_s
    if ion_repeater:
        t_gen = expected_max_completion([(p_click, attempt), (p_click, attempt)])
        state = _deterministic_swap(half, half)
    else:
        t_gen = attempt / p_click
        state = half
    f = swaps.fidelity(state)
    return DurationResult(
        protocol=name,
        feasible=f >= scenario.fidelity_target,
        fidelity=f,
        single_link_s=t_gen,
        total_s=t_gen,
        alpha1_sq=alpha1_sq,
        p_en=p_click,
        parallel_wait_s=t_gen,
    )


_BELL_BASIS = None


def _bell_projectors():
    global _BELL_BASIS
    if _BELL_BASIS is None:
        s = 1.0 / math.sqrt(2.0)
        phip = np.array([s, 0, 0, s])
        phim = np.array([s, 0, 0, -s])
        psip = np.array([0, s, s, 0])
        psim = np.array([0, s, -s, 0])
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        z = np.array([[1, 0], [0, -1]], dtype=complex)
        i2 = np.eye(2, dtype=complex)
        # correction on the kept far qubit mapping each outcome back to Psi+
        _BELL_BASIS = [(psip, i2), (psim, z), (phip, x), (phim, x @ z)]
    return _BELL_BASIS


def _deterministic_swap(s1: IonIonState, s2: IonIonState) -> IonIonState:
    """Ideal Bell-measurement swap joining two ion-ion links.

    Measures the middle pair (far qubit of link 1, near qubit of link 2),
    applies the outcome-dependent Pauli correction on the kept qubit, and
    averages over the four outcomes.
    """
    r1 = s1.to_matrix().reshape(2, 2, 2, 2)  # [a, b, a', b']
    r2 = s2.to_matrix().reshape(2, 2, 2, 2)  # [c, d, c', d']
    out = np.zeros((2, 2, 2, 2), dtype=complex)  # [a, d, a', d']
    for ket, corr in _bell_projectors():
        k = ket.reshape(2, 2)
        m = np.einsum("bc,BC,abAB,cdCD->adAD", k.conj(), k, r1, r2)
        for a in range(2):
            for ap in range(2):
                out[a, :, ap, :] += corr @ m[a, :, ap, :] @ corr.conj().T
    dd = np.array([[out[k_, l, k_, l].real for l in (0, 1)] for k_ in (0, 1)])
    coh = out[0, 1, 1, 0].real
    total = dd.sum()
    return IonIonState(D=dd / total, alpha=abs(coh) / total, sign=1 if coh >= 0 else -1)
