"""Entanglement-swap and purification algebra.

Swaps release the stored photons of two neighboring links onto a balanced
splitter and herald on a single click; the memory-branch efficiency is
already folded into the link states, so the swap circuits themselves are
lossless apart from dark counts.  Closed forms for the leading-order swap
probabilities and the final off-diagonal weight come from the perturbative
expansion and are cross-checked against the oracle composition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fock
from .exceptions import TopologyMismatch, ZeroProbability
from .fock import DensityOp
from .links import DEFAULT_CUTOFF, ChannelEfficiencies, HeraldedLink


@dataclass(frozen=True)
class SwapTopology:
    """Chain layout: X = 1 without the central repeater, 3 with it."""

    X: int
    n_segments: int

    def __post_init__(self):
        if (self.X, self.n_segments) not in ((1, 2), (3, 4)):
            raise TopologyMismatch("allowed topologies: X=1/n=2 or X=3/n=4")

    @classmethod
    def with_repeater(cls) -> "SwapTopology":
        return cls(X=3, n_segments=4)

    @classmethod
    def without_repeater(cls) -> "SwapTopology":
        return cls(X=1, n_segments=2)

    @property
    def has_repeater(self) -> bool:
        return self.X == 3


@dataclass
class IonIonState:
    """Final two-ion state: diagonal weights D[k,l], off-diagonal alpha, sign.

    The off-diagonal connects |0,1> and |1,0> with the detector-parity sign;
    positivity requires alpha <= sqrt(D[0,1] D[1,0]).
    """

    D: np.ndarray
    alpha: float
    sign: int = 1

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=float)
        if self.D.shape != (2, 2):
            raise ValueError("D must be a 2x2 weight array")
        if self.D.min() < -1e-12:
            raise ValueError("diagonal weights must be nonnegative")
        if self.alpha < 0:
            raise ValueError("alpha is stored unsigned; use sign for the parity")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    def validate(self) -> None:
        if abs(self.D.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {self.D.sum()}, not 1")
        bound = math.sqrt(self.D[0, 1] * self.D[1, 0])
        if self.alpha > bound + 1e-10:
            raise ValueError(f"alpha={self.alpha} violates positivity bound {bound}")

    def to_matrix(self) -> np.ndarray:
        """4x4 density matrix in the basis |00>, |01>, |10>, |11>."""
        m = np.diag([self.D[0, 0], self.D[0, 1], self.D[1, 0], self.D[1, 1]]).astype(complex)
        m[1, 2] = self.sign * self.alpha
        m[2, 1] = self.sign * self.alpha
        return m

    @classmethod
    def bell(cls, sign: int = 1) -> "IonIonState":
        return cls(D=np.array([[0.0, 0.5], [0.5, 0.0]]), alpha=0.5, sign=sign)


def swap1_probability(theta: float, eta_m: float) -> float:
    """Leading-order success probability of the EN-BB swap."""
    t2 = math.tan(theta) ** 2
    return eta_m / 2.0 + eta_m * (1.0 - eta_m) * t2 / (eta_m + t2)


def swap2_probability(theta: float, eta_m: float, topo: SwapTopology) -> float:
    """Leading-order success probability of the second (final or central) swap."""
    s2 = math.sin(theta) ** 2
    c2 = math.cos(theta) ** 2
    x = topo.X
    first = ((3 + x) * (1.0 - eta_m) * s2 + 2.0 * eta_m * c2) / (
        eta_m + 3.0 * (1.0 - eta_m) * s2
    )
    second = eta_m * s2 / (eta_m + x * (1.0 - eta_m) * s2)
    return first * second


def offdiag_leading(theta: float, eta_m: float, topo: SwapTopology) -> float:
    """Leading-order off-diagonal weight, up to overall normalization.

    The normalized off-diagonal of the final state is
    ``2 * offdiag_leading / swap2_probability`` (the factor 2 is fixed by the
    ideal reference point eta_m = 1, theta = pi/4 where alpha = 1/2).
    """
    s2 = math.sin(theta) ** 2
    c2 = math.cos(theta) ** 2
    x = topo.X
    return (
        0.5
        * c2
        * s2
        * (eta_m / (eta_m + 3.0 * (1.0 - eta_m) * s2))
        * (eta_m / (eta_m + x * (1.0 - eta_m) * s2))
    )


def alpha_leading(theta: float, eta_m: float, topo: SwapTopology) -> float:
    """Normalized leading-order off-diagonal of the final ion-ion state."""
    return 2.0 * offdiag_leading(theta, eta_m, topo) / swap2_probability(theta, eta_m, topo)


@dataclass
class SwapOutcome:
    state: IonIonState
    p_s1_left: float
    p_s1_right: float | None
    p_s2: float


def _reconstruct_en_rho(link: HeraldedLink, cutoff: int, labels=("ion", "mem")) -> DensityOp:
    """Perturbative (ion, mem) operator from the four link weights."""
    d = cutoff + 1
    mat = np.zeros((2 * d, 2 * d), dtype=complex)
    c, s = math.cos(link.theta), math.sin(link.theta)

    def idx(ion, mem):
        return ion * d + mem

    mat[idx(0, 0), idx(0, 0)] += link.A0
    mat[idx(1, 0), idx(1, 0)] += link.A1_prime
    # coherent |phi> = c|1,vac> + sign * s|0,photon>
    phi = np.zeros(2 * d, dtype=complex)
    phi[idx(1, 0)] = c
    phi[idx(0, 1)] = link.sign * s
    mat += link.A1 * np.outer(phi, phi.conj())
    mat[idx(1, 1), idx(1, 1)] += link.A2
    full = np.zeros((d * d, d * d), dtype=complex)
    for ik in range(2):
        for ib in range(2):
            full[ik * d:ik * d + d, ib * d:ib * d + d] = mat[ik * d:(ik + 1) * d,
                                                             ib * d:(ib + 1) * d]
    return DensityOp(labels, cutoff, full)


def _reconstruct_bb_rho(link: HeraldedLink, cutoff: int, labels=("mem_l", "mem_r")) -> DensityOp:
    d = cutoff + 1
    dim = d * d
    mat = np.zeros((dim, dim), dtype=complex)

    def idx(l, r):
        return l * d + r

    mat[idx(0, 0), idx(0, 0)] += link.A0
    psi = np.zeros(dim, dtype=complex)
    psi[idx(1, 0)] = math.sqrt(0.5)
    psi[idx(0, 1)] = link.sign * math.sqrt(0.5)
    mat += link.A1 * np.outer(psi, psi.conj())
    mat[idx(1, 0), idx(1, 0)] += link.A1_prime / 2.0
    mat[idx(0, 1), idx(0, 1)] += link.A1_prime / 2.0
    mat[idx(1, 1), idx(1, 1)] += link.A2
    return DensityOp(labels, cutoff, mat)


def _link_rho(link: HeraldedLink, kind: str, cutoff: int, labels) -> DensityOp:
    if link.rho is not None:
        rho = link.rho
        if rho.cutoff != cutoff:
            raise ValueError("link cutoff mismatch")
        return DensityOp(labels, cutoff, rho.matrix)
    if kind == "en":
        return _reconstruct_en_rho(link, cutoff, labels)
    return _reconstruct_bb_rho(link, cutoff, labels)


def _single_click_swap(rho: DensityOp, mode_x, mode_y, dark_click_prob: float):
    """Release two memories onto the balanced splitter, herald a '+' click.

    Truncation during the splitter is safe here: the retained single-click
    pattern only receives amplitude from pair-totals <= 1.
    Returns (normalized conditional state without the two modes, p_swap)
    where p_swap counts both detectors.
    """
    mixed = fock.apply_beamsplitter(rho, mode_x, mode_y, 0.5, allow_truncation=True)
    cond, p_plus = fock.herald_click(mixed, [mode_x, mode_y], (1, 0), dark_click_prob)
    if p_plus <= 0.0:
        raise ZeroProbability("swap herald has zero probability")
    return cond.normalized(), 2.0 * p_plus


def compose_final_state(en_left: HeraldedLink, bb, en_right: HeraldedLink,
                        eff: ChannelEfficiencies, topo: SwapTopology,
                        dark_click_prob: float = 0.0,
                        cutoff: int = DEFAULT_CUTOFF) -> SwapOutcome:
    """Compose heralded links into the final two-ion state via the oracle.

    With the central repeater (X=3): two EN-BB swaps, then the central
    memory-memory swap.  Without it (X=1): one EN-BB swap, then a final
    swap between the backbone's far memory and the remaining EN memory.
    ``bb`` is one HeraldedLink (reused on both sides when a repeater is
    present) or an explicit pair.
    """
    if isinstance(bb, HeraldedLink):
        bb_links = (bb, bb) if topo.has_repeater else (bb,)
    else:
        bb_links = tuple(bb)
        expected = 2 if topo.has_repeater else 1
        if len(bb_links) != expected:
            raise TopologyMismatch(
                f"topology X={topo.X} needs {expected} backbone link(s), got {len(bb_links)}"
            )

    rho_l = _link_rho(en_left, "en", cutoff, ("ion_l", "mem_el"))
    rho_r = _link_rho(en_right, "en", cutoff, ("ion_r", "mem_er"))

    if topo.has_repeater:
        bb_l = _link_rho(bb_links[0], "bb", cutoff, ("m1l", "m2l"))
        bb_r = _link_rho(bb_links[1], "bb", cutoff, ("m2r", "m1r"))
        left, p_s1_l = _single_click_swap(rho_l.tensor(bb_l), "mem_el", "m1l", dark_click_prob)
        right, p_s1_r = _single_click_swap(rho_r.tensor(bb_r), "mem_er", "m1r", dark_click_prob)
        joint = left.tensor(right)
        final, p_s2 = _single_click_swap(joint, "m2l", "m2r", dark_click_prob)
    else:
        bb_one = _link_rho(bb_links[0], "bb", cutoff, ("m1", "m2"))
        left, p_s1_l = _single_click_swap(rho_l.tensor(bb_one), "mem_el", "m1", dark_click_prob)
        p_s1_r = None
        joint = left.tensor(rho_r)
        final, p_s2 = _single_click_swap(joint, "m2", "mem_er", dark_click_prob)

    final = final.reorder(("ion_l", "ion_r"))
    d = cutoff + 1
    dd = np.array([[final.population((k, l)) for l in (0, 1)] for k in (0, 1)])
    coh = final.element((0, 1), (1, 0)).real
    total = dd.sum()
    dd = dd / total
    alpha = abs(coh) / total
    sign = 1 if coh >= 0 else -1
    state = IonIonState(D=dd, alpha=alpha, sign=sign)
    return SwapOutcome(state=state, p_s1_left=p_s1_l, p_s1_right=p_s1_r, p_s2=p_s2)


def purify(s1: IonIonState, s2: IonIonState) -> tuple[IonIonState, float]:
    """One purification round: local CNOTs, post-select both targets in |1>.

    ``P_P = sum_kl D1[k,l] D2[1-k,1-l]`` (= 2 D10 D01 + 2 D00 D11 for
    identical inputs); the kept pair transforms as
    ``D[k,l] -> D1[k,l] D2[1-k,1-l] / P_P`` and ``alpha -> alpha1 alpha2 / P_P``
    with the parity signs multiplying.
    """
    p_p = float(sum(s1.D[k, l] * s2.D[1 - k, 1 - l] for k in (0, 1) for l in (0, 1)))
    if p_p <= 0.0:
        raise ZeroProbability("purification post-selection has zero probability")
    d_new = np.array([[s1.D[k, l] * s2.D[1 - k, 1 - l] / p_p for l in (0, 1)] for k in (0, 1)])
    alpha_new = s1.alpha * s2.alpha / p_p
    sign_new = s1.sign * s2.sign
    return IonIonState(D=d_new, alpha=alpha_new, sign=sign_new), p_p


def fidelity(s: IonIonState) -> float:
    """Overlap with the detector-parity-matched Bell state.

    The recorded parity is consumed by a classical local phase flip, so the
    comparison state is always |Psi_+> and the off-diagonal enters with its
    magnitude: ``F = (D[0,1] + D[1,0])/2 + alpha``.
    """
    return float((s.D[0, 1] + s.D[1, 0]) / 2.0 + s.alpha)
