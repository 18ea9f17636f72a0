"""Heralded-link models for the edge nodes (EN) and the backbone (BB).

The edge node interferes a weak ion emission with the herald arm of a
weakly driven SPDC source, time-bin by time-bin, and heralds on a single
detector click anywhere during the ion pulse.  The backbone interferes the
herald arms of two remote SPDC+memory nodes.

Discretization contract
-----------------------
The ion pulse is sliced into ``N`` time bins.  ``IonEmission.envelope``
holds the per-bin emission weights ``w_i`` (nonnegative, summing to 1), so
the bin-i single-photon amplitude is ``alpha_1 sqrt(w_i)``.  The SPDC drive
power in a bin is ``SpdcTimeBin.envelope_weight`` (``m_i``, nominal 1 for a
flat matched drive); the bin pair amplitude is ``beta_1 sqrt(m_i)`` and the
two-pair amplitude ``beta_2 m_i``.  Flux matching means ``m_i = N w_i``.

Memory-branch efficiency (storage through release to detection) is folded
into the heralded link states at generation time; loss commutes with
everything between generation and the swap detection, and this convention
matches the closed forms for the state weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .exceptions import DegenerateInput, DomainError
from .fock import DensityOp, FockState

DEFAULT_CUTOFF = 2


def uncorrelated_pair_amplitude(beta1_sq: float) -> float:
    """Two-pair emission probability |beta_2|^2 of a weakly driven SPDC.

    Solves the uncorrelated-pair condition
    ``|b1|^2 + 2|b2|^2 = 2|b2|^2 / (|b1|^2 + 2|b2|^2)`` on its minus branch,
    written in the cancellation-free form
    ``2|b2|^2 = x^2 / ((1/2 - x) + sqrt(1/4 - x))`` with ``x = |b1|^2``.
    Asymptotically ``2|b2|^2 ~ |b1|^4``.
    """
    x = float(beta1_sq)
    if x < 0.0:
        raise DomainError("beta1_sq must be nonnegative")
    if x > 0.25:
        raise DomainError("beta1_sq must not exceed 1/4 (discriminant < 0)")
    if x == 0.0:
        return 0.0
    return 0.5 * x * x / ((0.5 - x) + math.sqrt(0.25 - x))


@dataclass
class IonEmission:
    """Ion emission parameters: probability, pulse duration, bin envelope."""

    alpha1_sq: float
    pulse_duration: float
    envelope: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.alpha1_sq <= 1.0:
            raise ValueError("alpha1_sq must lie in [0, 1]")
        if self.pulse_duration <= 0:
            raise ValueError("pulse_duration must be positive")
        self.envelope = np.asarray(self.envelope, dtype=float)
        if self.envelope.ndim != 1 or len(self.envelope) == 0:
            raise ValueError("envelope must be a nonempty 1-d array")
        if self.envelope.min() < 0:
            raise ValueError("envelope weights must be nonnegative")
        if abs(self.envelope.sum() - 1.0) > 1e-12:
            raise ValueError("envelope must sum to 1 within 1e-12")

    @classmethod
    def constant(cls, alpha1_sq: float, pulse_duration: float, n_bins: int) -> "IonEmission":
        return cls(alpha1_sq, pulse_duration, np.full(n_bins, 1.0 / n_bins))

    @property
    def alpha0_sq(self) -> float:
        return 1.0 - self.alpha1_sq

    @property
    def n_bins(self) -> int:
        return len(self.envelope)


@dataclass
class SpdcTimeBin:
    """SPDC emission within one acceptance time bin.

    ``beta2_sq`` is always derived from ``beta1_sq`` through the weak-drive
    uncorrelated-pair relation; there is no independent two-pair knob.
    """

    beta1_sq: float
    bin_duration: float
    correlation_time: float
    envelope_weight: float = 1.0
    beta2_sq: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.beta1_sq <= 0.25:
            raise ValueError("beta1_sq must lie in [0, 0.25]")
        if self.bin_duration <= 0 or self.correlation_time <= 0:
            raise ValueError("durations must be positive")
        if self.bin_duration < 3.0 * self.correlation_time - 1e-15:
            raise ValueError("bin_duration must cover at least 3 correlation times")
        if self.envelope_weight < 0:
            raise ValueError("envelope_weight must be nonnegative")
        self.beta2_sq = uncorrelated_pair_amplitude(self.beta1_sq)
        if self.beta0_sq < 0:
            raise ValueError("vacuum amplitude underflow: emission too strong")

    @property
    def beta0_sq(self) -> float:
        return 1.0 - self.beta1_sq - self.beta2_sq


@dataclass
class ChannelEfficiencies:
    """All branch efficiencies from emission to detection."""

    eta: float = 0.9
    eta0_prime: float = 0.9
    eta_fc: float = 0.9
    eta_m: float = 0.8
    eta_bb: float = 1.0

    def __post_init__(self):
        for name in ("eta", "eta0_prime", "eta_fc", "eta_m", "eta_bb"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def eta_prime(self) -> float:
        """SPDC herald-branch efficiency: intrinsic times frequency conversion."""
        return self.eta0_prime * self.eta_fc


@dataclass
class HeraldedLink:
    """Post-herald link state in the four-weight parametrization.

    ``A0`` weighs (ground, no photon), ``A1`` the coherent target state with
    mixing angle ``theta``, ``A1_prime`` (excited, no photon) and ``A2``
    (excited, stored photon) plus residual stored-photon terms.  ``rho``
    carries the full conditional operator when the link was produced by the
    oracle; ``herald_probability`` counts both detectors.
    """

    A0: float
    A1_prime: float
    A1: float
    A2: float
    theta: float
    sign: int = 1
    rho: DensityOp | None = None
    herald_probability: float | None = None

    def weights_sum(self) -> float:
        return self.A0 + self.A1_prime + self.A1 + self.A2


def mixing_angle(ion: IonEmission, spdc: SpdcTimeBin, eff: ChannelEfficiencies,
                 bin_index: int | None = None) -> float:
    """Mixing angle of the heralded ion-memory superposition.

    ``tan^2(theta) = eta' eta_m m_i |alpha_0 beta_1|^2
                     / (eta w_i |alpha_1 beta_0|^2)``
    with ``w_i`` the ion envelope weight of the click bin and ``m_i`` the
    SPDC drive weight.  Without ``bin_index`` the flat matched envelope is
    assumed (``w_i = 1/N``), under which theta is click-time independent.
    """
    if ion.alpha1_sq <= 0.0:
        raise DegenerateInput("alpha1_sq = 0 makes tan^2(theta) diverge")
    if spdc.beta1_sq < 0.0:
        raise DegenerateInput("beta1_sq must be nonnegative")
    w = ion.envelope[bin_index] if bin_index is not None else 1.0 / ion.n_bins
    if w <= 0.0:
        raise DegenerateInput("ion envelope weight vanishes in the click bin")
    tan2 = (
        eff.eta_prime * eff.eta_m * spdc.envelope_weight * spdc.beta1_sq * ion.alpha0_sq
    ) / (eff.eta * w * ion.alpha1_sq * spdc.beta0_sq)
    return math.atan(math.sqrt(tan2))


def en_closed_form_weights(theta: float, eta_m: float) -> tuple[float, float]:
    """Leading-order (A0, A1) of the heralded EN state."""
    t2 = math.tan(theta) ** 2
    a0 = (1.0 - eta_m) * t2 / (eta_m + t2)
    a1 = eta_m * (1.0 + t2) / (eta_m + t2)
    return a0, a1


def en_success_probability(ion: IonEmission, spdc: SpdcTimeBin, eff: ChannelEfficiencies) -> float:
    """Leading-order single-click success probability of one EN attempt.

    ``P_EN ~ eta |alpha_1|^2 (1 + tan^2(theta)/eta_m)``; second-order and
    dark-count corrections live in the oracle-backed ``en_heralded_state``.
    """
    if spdc.beta1_sq == 0.0:
        return eff.eta * ion.alpha1_sq
    theta = mixing_angle(ion, spdc, eff)
    return eff.eta * ion.alpha1_sq * (1.0 + math.tan(theta) ** 2 / eff.eta_m)


def _spdc_bin_state(spdc: SpdcTimeBin, cutoff: int, labels=("b", "c")) -> FockState:
    """Single-bin SPDC state  b0|00> + b1 sqrt(m)|11> + b2 m|22>  on (b, c)."""
    m = spdc.envelope_weight
    terms = {(0, 0): math.sqrt(spdc.beta0_sq)}
    amp1 = math.sqrt(spdc.beta1_sq * m)
    amp2 = math.sqrt(spdc.beta2_sq) * m
    if cutoff >= 1 and amp1 > 0:
        terms[(1, 1)] = amp1
    if cutoff >= 2 and amp2 > 0:
        terms[(2, 2)] = amp2
    return FockState.from_terms(labels, cutoff, terms)


def _en_bin_maps(spdc: SpdcTimeBin, eff: ChannelEfficiencies, dark_click_prob: float,
                 cutoff: int) -> dict:
    """Conditional per-bin maps of the EN circuit.

    For each ion-photon sector sigma of the bin mode ``a`` (|0><0|, |1><1|,
    |1><0|) the circuit applies branch losses, folds the memory efficiency,
    interferes a and b on the balanced splitter and projects the detector
    outcome.  Returns the memory-mode operators for a "+" click and the
    scalar no-click weights.
    """
    spdc_state = _spdc_bin_state(spdc, cutoff)
    rho_spdc = spdc_state.to_density()
    d = cutoff + 1

    def sector(ket_n: int, bra_n: int) -> DensityOp:
        mat = np.zeros((d, d), dtype=complex)
        mat[ket_n, bra_n] = 1.0
        return DensityOp(("a",), cutoff, mat)

    out = {}
    for key, (kn, bn) in {"00": (0, 0), "11": (1, 1), "10": (1, 0)}.items():
        op = sector(kn, bn).tensor(rho_spdc)
        op = fock.apply_loss(op, "a", eff.eta)
        op = fock.apply_loss(op, "b", eff.eta_prime)
        op = fock.apply_loss(op, "c", eff.eta_m)
        op = fock.apply_beamsplitter(op, "a", "b", 0.5, allow_truncation=True)
        click, _ = fock.herald_click(op, ["a", "b"], (1, 0), dark_click_prob)
        out[f"C{key}"] = click.matrix
        if key != "10":  # the coherence sector traces to zero under no-click
            noclick, _ = fock.herald_click(op, ["a", "b"], (0, 0), 0.0)
            out[f"n{key}"] = fock.partial_trace(noclick, ["c"]).matrix[0, 0].real
    return out


def en_heralded_state(ion: IonEmission, spdc: SpdcTimeBin, eff: ChannelEfficiencies,
                      dark_click_prob: float = 0.0, cutoff: int = DEFAULT_CUTOFF) -> HeraldedLink:
    """Heralded ion-memory state of one edge node, from the Fock oracle.

    Assembles the exact multi-bin conditional state for a single "+" click:
    the click bin is simulated in full (including two-pair terms and the
    dark-count branch) while the other bins contribute their no-click
    weights, with the ion photon coherently spread over all bins.  Ion-side
    cross-bin coherences vanish after the loss channels are traced, so the
    assembly is a sum over the click bin and the location of the ion photon.

    Returns a link whose ``rho`` is the normalized conditional state on
    (ion, mem) and whose ``herald_probability`` counts all bins and both
    detectors.
    """
    n = ion.n_bins
    d = cutoff + 1
    a0 = math.sqrt(ion.alpha0_sq)
    a1 = math.sqrt(ion.alpha1_sq)
    w = ion.envelope

    flat = bool(np.allclose(w, w[0]))
    maps = _en_bin_maps(spdc, eff, dark_click_prob, cutoff)
    per_bin = [maps] * n if flat else [
        _en_bin_maps(
            SpdcTimeBin(spdc.beta1_sq, spdc.bin_duration, spdc.correlation_time,
                        envelope_weight=spdc.envelope_weight * n * w[i]),
            eff, dark_click_prob, cutoff)
        for i in range(n)
    ]

    n0 = np.array([per_bin[i]["n00"] for i in range(n)])
    n1 = np.array([per_bin[i]["n11"] for i in range(n)])

    def prod_n0_except(skip: set[int]) -> float:
        out = 1.0
        for j in range(n):
            if j not in skip:
                out *= n0[j]
        return out

    rho = np.zeros((2 * d, 2 * d), dtype=complex)

    def add_block(ion_ket: int, ion_bra: int, mem_op: np.ndarray, weight: float):
        rho[ion_ket * d:(ion_ket + 1) * d, ion_bra * d:(ion_bra + 1) * d] += weight * mem_op

    for i in range(n):  # click bin
        others = prod_n0_except({i})
        m = per_bin[i]
        # ion never emitted
        add_block(0, 0, m["C00"], ion.alpha0_sq * others)
        # ion photon in the click bin
        add_block(1, 1, m["C11"], ion.alpha1_sq * w[i] * others)
        # ion photon absorbed without a click in another bin
        for k in range(n):
            if k == i:
                continue
            add_block(1, 1, m["C00"],
                      ion.alpha1_sq * w[k] * n1[k] * prod_n0_except({i, k}))
        # surviving coherence: ion-click vs SPDC-click inside the same bin
        coh = a0 * a1 * math.sqrt(w[i]) * others
        add_block(1, 0, m["C10"], coh)
        add_block(0, 1, m["C10"].conj().T, coh)

    p_plus = float(np.trace(rho).real)
    if p_plus <= 0.0:
        return HeraldedLink(A0=1.0, A1_prime=0.0, A1=0.0, A2=0.0,
                            theta=mixing_angle(ion, spdc, eff), sign=1,
                            rho=None, herald_probability=0.0)
    p_en = 2.0 * p_plus  # both detectors; the loop already summed all bins
    rho /= p_plus

    link_rho = DensityOp(("ion", "mem"), cutoff, _embed_qubit_mode(rho, d, cutoff))
    theta = mixing_angle(ion, spdc, eff)
    return _extract_link(link_rho, theta, p_en, kind="en")


def _embed_qubit_mode(rho_2d: np.ndarray, d: int, cutoff: int) -> np.ndarray:
    """Embed a (2*d x 2*d) ion(2) x mem(d) operator into the (d*d) Fock grid."""
    full = np.zeros((d * d, d * d), dtype=complex)
    for ik in range(2):
        for ib in range(2):
            full[ik * d:ik * d + d, ib * d:ib * d + d] = rho_2d[ik * d:(ik + 1) * d,
                                                                ib * d:(ib + 1) * d]
    return full


def _extract_link(rho: DensityOp, theta: float, p_herald: float, kind: str) -> HeraldedLink:
    c, s = math.cos(theta), math.sin(theta)
    coh = rho.element((1, 0), (0, 1))
    sign = 1 if coh.real >= 0 else -1
    a1 = abs(coh.real) / (c * s) if c * s > 0 else 0.0
    a0 = rho.population((0, 0))
    if kind == "en":
        a1p = rho.population((1, 0)) - a1 * c * c
    else:
        a1p = rho.population((1, 0)) + rho.population((0, 1)) - a1
    a2 = 1.0 - a0 - a1 - a1p
    a1p = 0.0 if -1e-12 < a1p < 0.0 else a1p
    a2 = 0.0 if -1e-12 < a2 < 0.0 else a2
    return HeraldedLink(A0=a0, A1_prime=a1p, A1=a1, A2=a2, theta=theta, sign=sign,
                        rho=rho, herald_probability=p_herald)


def bb_heralded_state(spdc_left: SpdcTimeBin, spdc_right: SpdcTimeBin,
                      eff: ChannelEfficiencies, dark_click_prob: float = 0.0,
                      cutoff: int = DEFAULT_CUTOFF) -> HeraldedLink:
    """Heralded memory-memory state of one backbone mode pair.

    Two SPDC sources send their herald photons through fiber (efficiency
    ``eta_bb`` each) onto a balanced splitter; a single click heralds.  The
    memory branches fold ``eta_m``.  The mixing angle is pi/4 by symmetry of
    the two arms.
    """
    left = _spdc_bin_state(spdc_left, cutoff, labels=("bl", "ml"))
    right = _spdc_bin_state(spdc_right, cutoff, labels=("br", "mr"))
    op = left.tensor(right).to_density()
    op = fock.apply_loss(op, "bl", eff.eta_bb)
    op = fock.apply_loss(op, "br", eff.eta_bb)
    op = fock.apply_loss(op, "ml", eff.eta_m)
    op = fock.apply_loss(op, "mr", eff.eta_m)
    op = fock.apply_beamsplitter(op, "bl", "br", 0.5, allow_truncation=True)
    click, p_plus = fock.herald_click(op, ["bl", "br"], (1, 0), dark_click_prob)
    p_bb = 2.0 * p_plus
    if p_plus <= 0.0:
        return HeraldedLink(A0=1.0, A1_prime=0.0, A1=0.0, A2=0.0, theta=math.pi / 4,
                            sign=1, rho=None, herald_probability=0.0)
    rho = DensityOp(("mem_l", "mem_r"), cutoff, click.reorder(("ml", "mr")).matrix / p_plus)
    return _extract_link(rho, math.pi / 4, p_bb, kind="bb")


def bb_success_probability(spdc_left: SpdcTimeBin, spdc_right: SpdcTimeBin,
                           eff: ChannelEfficiencies, dark_click_prob: float = 0.0,
                           cutoff: int = DEFAULT_CUTOFF) -> float:
    """Per-mode single-click success probability of the backbone, from the oracle."""
    link = bb_heralded_state(spdc_left, spdc_right, eff, dark_click_prob, cutoff)
    return link.herald_probability
