"""Truncated Fock-space linear optics engine.

Dense state vectors / density operators over a small set of bosonic modes
with a per-mode occupation cutoff.  This is the brute-force oracle behind
every heralded state and probability in the protocol model: beamsplitters,
loss channels, photon-number-resolving detection with dark counts, and
partial traces.

Conventions
-----------
Beamsplitter (transmissivity ``t``, relative phase ``phi``), Heisenberg map::

    a+ -> sqrt(t) a+ + sqrt(1-t) e^{i phi} b+
    b+ -> sqrt(1-t) e^{-i phi} a+ - sqrt(t) b+

At ``t = 1/2``, ``phi = 0`` this is the balanced splitter used for all
single-click heralds: the first input maps to the detector pair with signs
(+, +), the second with (+, -).

A detector "click" outcome on a photon-number-resolving channel with dark
probability ``p_d`` means the observed count equals the true photon number
plus an independent Bernoulli(``p_d``) dark event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import CutoffOverflow, InvalidPattern, UnknownMode

_SUPPORT_TOL = 1e-12


@lru_cache(maxsize=128)
def _beamsplitter_tensor(cutoff: int, transmissivity: float, phase: float) -> np.ndarray:
    """Two-mode beamsplitter transition tensor B[out_a, out_b, in_a, in_b].

    Built from the binomial expansion of the Heisenberg map; rows with an
    output occupation above the cutoff are dropped, which only ever affects
    basis states whose pair-total exceeds the cutoff.
    """
    d = cutoff + 1
    t = float(transmissivity)
    u_aa = math.sqrt(t)
    u_ba = math.sqrt(1.0 - t) * np.exp(1j * phase)
    u_ab = math.sqrt(1.0 - t) * np.exp(-1j * phase)
    u_bb = -math.sqrt(t)
    fact = [math.factorial(k) for k in range(2 * cutoff + 1)]
    out = np.zeros((d, d, d, d), dtype=complex)
    for m in range(d):
        for n in range(d):
            norm_in = math.sqrt(fact[m] * fact[n])
            for k in range(m + 1):
                for l in range(n + 1):
                    p = k + l
                    q = m + n - p
                    if p >= d or q >= d:
                        continue
                    coeff = (
                        math.comb(m, k)
                        * math.comb(n, l)
                        * u_aa**k
                        * u_ba ** (m - k)
                        * u_ab**l
                        * u_bb ** (n - l)
                    )
                    out[p, q, m, n] += coeff * math.sqrt(fact[p] * fact[q]) / norm_in
    return out


@lru_cache(maxsize=128)
def _loss_kraus(cutoff: int, efficiency: float) -> tuple[np.ndarray, ...]:
    """Kraus operators K_j (j photons lost) of the bosonic loss channel."""
    d = cutoff + 1
    eta = float(efficiency)
    ops = []
    for j in range(d):
        k = np.zeros((d, d), dtype=complex)
        for n in range(j, d):
            k[n - j, n] = math.sqrt(math.comb(n, j) * eta ** (n - j) * (1.0 - eta) ** j)
        ops.append(k)
    return tuple(ops)


@lru_cache(maxsize=128)
def _loss_superop(cutoff: int, efficiency: float) -> np.ndarray:
    """Loss channel as one (d^2, d^2) map on the stacked (ket, bra) pair."""
    d = cutoff + 1
    sup = np.zeros((d * d, d * d), dtype=complex)
    for k in _loss_kraus(cutoff, efficiency):
        sup += np.kron(k, k.conj())
    return sup


def _as_tuple(labels) -> tuple[str, ...]:
    return tuple(labels)


@dataclass
class FockState:
    """Pure state over ``mode_labels`` with per-mode occupations <= cutoff.

    ``amplitudes`` is a complex tensor of rank ``len(mode_labels)``; axis k
    indexes the occupation of mode ``mode_labels[k]``.
    """

    mode_labels: tuple[str, ...]
    cutoff: int
    amplitudes: np.ndarray
    is_normalized: bool = field(default=False)

    def __post_init__(self):
        self.mode_labels = _as_tuple(self.mode_labels)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        expected = (self.cutoff + 1,) * len(self.mode_labels)
        if self.amplitudes.shape != expected:
            raise ValueError(
                f"amplitude tensor shape {self.amplitudes.shape} != {expected}"
            )
        self.is_normalized = bool(abs(self.norm() - 1.0) < 1e-12)

    @classmethod
    def vacuum(cls, mode_labels, cutoff: int) -> "FockState":
        labels = _as_tuple(mode_labels)
        amp = np.zeros((cutoff + 1,) * len(labels), dtype=complex)
        amp[(0,) * len(labels)] = 1.0
        return cls(labels, cutoff, amp)

    @classmethod
    def from_terms(cls, mode_labels, cutoff: int, terms: dict, normalize: bool = False) -> "FockState":
        """Build a state from ``{occupation tuple: amplitude}``."""
        labels = _as_tuple(mode_labels)
        amp = np.zeros((cutoff + 1,) * len(labels), dtype=complex)
        for occ, a in terms.items():
            if len(occ) != len(labels):
                raise ValueError("occupation tuple length mismatch")
            if any(n < 0 or n > cutoff for n in occ):
                raise CutoffOverflow(f"occupation {occ} exceeds cutoff {cutoff}")
            amp[tuple(occ)] += a
        if normalize:
            nrm = np.linalg.norm(amp.ravel())
            if nrm == 0:
                raise ValueError("cannot normalize the zero state")
            amp = amp / nrm
        return cls(labels, cutoff, amp)

    @property
    def n_modes(self) -> int:
        return len(self.mode_labels)

    def axis(self, mode) -> int:
        try:
            return self.mode_labels.index(mode)
        except ValueError:
            raise UnknownMode(f"mode {mode!r} not in {self.mode_labels}") from None

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes.ravel()))

    def tensor(self, other: "FockState") -> "FockState":
        if self.cutoff != other.cutoff:
            raise ValueError("cutoff mismatch in tensor product")
        if set(self.mode_labels) & set(other.mode_labels):
            raise ValueError("tensor product requires disjoint mode labels")
        amp = np.tensordot(self.amplitudes, other.amplitudes, axes=0)
        return FockState(self.mode_labels + other.mode_labels, self.cutoff, amp)

    def to_density(self) -> "DensityOp":
        flat = self.amplitudes.reshape(-1)
        return DensityOp(self.mode_labels, self.cutoff, np.outer(flat, flat.conj()))


@dataclass
class DensityOp:
    """Operator over the joint occupation basis of ``mode_labels``.

    Usually a density matrix, but the same carrier is used for the
    non-Hermitian coherence blocks pushed through the (linear) channel maps
    during state assembly.
    """

    mode_labels: tuple[str, ...]
    cutoff: int
    matrix: np.ndarray

    def __post_init__(self):
        self.mode_labels = _as_tuple(self.mode_labels)
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = (self.cutoff + 1) ** len(self.mode_labels)
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.matrix.shape} != {(dim, dim)}")

    @property
    def n_modes(self) -> int:
        return len(self.mode_labels)

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.n_modes

    @property
    def trace_value(self) -> float:
        return float(np.trace(self.matrix).real)

    def axis(self, mode) -> int:
        try:
            return self.mode_labels.index(mode)
        except ValueError:
            raise UnknownMode(f"mode {mode!r} not in {self.mode_labels}") from None

    def tensor_form(self) -> np.ndarray:
        d = self.cutoff + 1
        n = self.n_modes
        return self.matrix.reshape((d,) * (2 * n))

    @classmethod
    def from_tensor_form(cls, mode_labels, cutoff: int, tensor: np.ndarray) -> "DensityOp":
        labels = _as_tuple(mode_labels)
        dim = (cutoff + 1) ** len(labels)
        return cls(labels, cutoff, tensor.reshape(dim, dim))

    def tensor(self, other: "DensityOp") -> "DensityOp":
        if self.cutoff != other.cutoff:
            raise ValueError("cutoff mismatch in tensor product")
        if set(self.mode_labels) & set(other.mode_labels):
            raise ValueError("tensor product requires disjoint mode labels")
        d = self.cutoff + 1
        na, nb = self.n_modes, other.n_modes
        t = np.tensordot(self.tensor_form(), other.tensor_form(), axes=0)
        # order axes as (kets of self, kets of other, bras of self, bras of other)
        perm = (
            list(range(na))
            + list(range(2 * na, 2 * na + nb))
            + list(range(na, 2 * na))
            + list(range(2 * na + nb, 2 * (na + nb)))
        )
        t = t.transpose(perm)
        return DensityOp.from_tensor_form(
            self.mode_labels + other.mode_labels, self.cutoff, t
        )

    def population(self, occupation) -> float:
        d = self.cutoff + 1
        idx = 0
        for n in occupation:
            idx = idx * d + n
        return float(self.matrix[idx, idx].real)

    def element(self, occ_ket, occ_bra) -> complex:
        d = self.cutoff + 1
        i = 0
        for n in occ_ket:
            i = i * d + n
        j = 0
        for n in occ_bra:
            j = j * d + n
        return complex(self.matrix[i, j])

    def normalized(self) -> "DensityOp":
        tr = np.trace(self.matrix)
        return DensityOp(self.mode_labels, self.cutoff, self.matrix / tr)

    def reorder(self, new_labels) -> "DensityOp":
        new_labels = _as_tuple(new_labels)
        if set(new_labels) != set(self.mode_labels):
            raise UnknownMode("reorder must use the same mode labels")
        n = self.n_modes
        perm = [self.mode_labels.index(m) for m in new_labels]
        t = self.tensor_form().transpose(perm + [n + p for p in perm])
        return DensityOp.from_tensor_form(new_labels, self.cutoff, t)

    def validate(self, atol: float = 1e-10) -> None:
        """Check hermiticity, positivity (eigenvalues >= -1e-10) and trace."""
        h = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if h > 1e-12 * max(1.0, abs(self.trace_value)):
            raise ValueError(f"not Hermitian: max deviation {h:.3e}")
        eigs = np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)
        if eigs.min() < -atol * max(1.0, abs(self.trace_value)):
            raise ValueError(f"negative eigenvalue {eigs.min():.3e}")


def _pair_support_violation(x, axis_a: int, axis_b: int) -> float:
    """Mass on basis states whose (mode_a + mode_b) total exceeds the cutoff."""
    if isinstance(x, FockState):
        probs = np.abs(x.amplitudes) ** 2
        d = x.cutoff + 1
        na = np.arange(d)
        grid = na.reshape(-1, 1) + na.reshape(1, -1)
        mask = grid > x.cutoff
        moved = np.moveaxis(probs, (axis_a, axis_b), (0, 1))
        return float(moved[mask].sum())
    d = x.cutoff + 1
    n = x.n_modes
    idx = np.indices((d,) * n).reshape(n, -1)
    flat_diag = np.real(np.einsum("ii->i", x.matrix))
    totals = idx[axis_a] + idx[axis_b]
    return float(flat_diag[totals > x.cutoff].clip(min=0.0).sum())


def apply_beamsplitter(state, mode_a, mode_b, transmissivity: float, relative_phase: float = 0.0,
                       *, allow_truncation: bool = False):
    """Two-mode beamsplitter on a FockState or DensityOp.

    Raises CutoffOverflow when the input has support on pair-totals above the
    cutoff (mixing could then populate a single mode beyond the cutoff),
    unless ``allow_truncation`` is set.  Callers may truncate deliberately
    when the retained outcome patterns only receive amplitude from
    pair-totals within the cutoff (single-click heralds).
    """
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError("transmissivity must lie in [0, 1]")
    if isinstance(state, FockState):
        ia, ib = state.axis(mode_a), state.axis(mode_b)
        if not allow_truncation:
            bad = _pair_support_violation(state, ia, ib)
            if bad > _SUPPORT_TOL * max(state.norm() ** 2, 1e-300):
                raise CutoffOverflow(
                    f"pair occupation above cutoff carries probability {bad:.3e}"
                )
        b = _beamsplitter_tensor(state.cutoff, transmissivity, relative_phase)
        moved = np.moveaxis(state.amplitudes, (ia, ib), (0, 1))
        out = np.tensordot(b, moved, axes=([2, 3], [0, 1]))
        out = np.moveaxis(out, (0, 1), (ia, ib))
        return FockState(state.mode_labels, state.cutoff, out)
    if isinstance(state, DensityOp):
        ia, ib = state.axis(mode_a), state.axis(mode_b)
        if not allow_truncation:
            bad = _pair_support_violation(state, ia, ib)
            if bad > _SUPPORT_TOL * max(abs(state.trace_value), 1e-300):
                raise CutoffOverflow(
                    f"pair occupation above cutoff carries probability {bad:.3e}"
                )
        d = state.cutoff + 1
        b = _beamsplitter_tensor(state.cutoff, transmissivity, relative_phase).reshape(d * d, d * d)
        n = state.n_modes
        t = state.tensor_form()
        # ket side
        moved = np.moveaxis(t, (ia, ib), (0, 1)).reshape(d * d, -1)
        moved = (b @ moved).reshape((d, d) + t.shape[2:])
        t = np.moveaxis(moved, (0, 1), (ia, ib))
        # bra side
        ja, jb = n + ia, n + ib
        moved = np.moveaxis(t, (ja, jb), (0, 1)).reshape(d * d, -1)
        moved = (b.conj() @ moved).reshape((d, d) + tuple(
            s for k, s in enumerate(t.shape) if k not in (ja, jb)
        ))
        t = np.moveaxis(moved, (0, 1), (ja, jb))
        return DensityOp.from_tensor_form(state.mode_labels, state.cutoff, t)
    raise TypeError("state must be a FockState or DensityOp")


def apply_loss(state, mode, efficiency: float) -> DensityOp:
    """Bosonic loss channel on one mode; always returns a DensityOp.

    Equivalent to a beamsplitter of transmissivity = efficiency into a fresh
    ancilla followed by tracing the ancilla; implemented directly with the
    Kraus decomposition.
    """
    if not 0.0 <= efficiency <= 1.0:
        raise ValueError("efficiency must lie in [0, 1]")
    rho = state.to_density() if isinstance(state, FockState) else state
    if not isinstance(rho, DensityOp):
        raise TypeError("state must be a FockState or DensityOp")
    axis = rho.axis(mode)
    n = rho.n_modes
    d = rho.cutoff + 1
    t = np.moveaxis(rho.tensor_form(), (axis, n + axis), (0, 1))
    shape = t.shape
    out = _loss_superop(rho.cutoff, efficiency) @ t.reshape(d * d, -1)
    out = np.moveaxis(out.reshape(shape), (0, 1), (axis, n + axis))
    return DensityOp.from_tensor_form(rho.mode_labels, rho.cutoff, out)


def _observed_count_weights(true_n: int, observed: int, dark_click_prob: float) -> float:
    """P(observed counts | true photon number) with one Bernoulli dark event."""
    p = dark_click_prob
    if observed == 0:
        return (1.0 - p) if true_n == 0 else 0.0
    w = 0.0
    if true_n == observed:
        w += 1.0 - p
    if true_n == observed - 1:
        w += p
    return w


def herald_click(rho: DensityOp, detector_modes, pattern, dark_click_prob: float = 0.0):
    """Project detector modes onto observed-count ``pattern`` and trace them.

    ``pattern`` maps each detector mode to its observed count: 1 for a click,
    0 for vacuum (larger counts are allowed for completeness sums).  Returns
    ``(conditional DensityOp (unnormalized), probability)``.
    """
    detector_modes = list(detector_modes)
    if len(set(detector_modes)) != len(detector_modes):
        raise InvalidPattern("duplicate detector modes")
    if not 0.0 <= dark_click_prob < 1.0:
        raise InvalidPattern("dark_click_prob must lie in [0, 1)")
    if isinstance(pattern, dict):
        counts = [pattern[m] for m in detector_modes]
    else:
        counts = list(pattern)
        if len(counts) != len(detector_modes):
            raise InvalidPattern("pattern length != number of detector modes")
    for c in counts:
        if not isinstance(c, (int, np.integer)) or c < 0 or c > rho.cutoff + 1:
            raise InvalidPattern(f"bad observed count {c!r}")

    labels = list(rho.mode_labels)
    t = rho.tensor_form()
    n = rho.n_modes
    for mode, observed in zip(detector_modes, counts):
        axis = labels.index(mode) if mode in labels else None
        if axis is None:
            raise UnknownMode(f"mode {mode!r} not present")
        n_cur = len(labels)
        d = rho.cutoff + 1
        acc = None
        for true_n in range(d):
            w = _observed_count_weights(true_n, observed, dark_click_prob)
            if w == 0.0:
                continue
            sl = np.take(np.take(t, true_n, axis=axis), true_n, axis=n_cur + axis - 1)
            acc = w * sl if acc is None else acc + w * sl
        if acc is None:
            acc = np.zeros(tuple(s for k, s in enumerate(t.shape) if k not in (axis, n_cur + axis)),
                           dtype=complex)
        t = acc
        labels.pop(axis)
    if labels:
        out = DensityOp.from_tensor_form(tuple(labels), rho.cutoff, t)
        prob = float(np.trace(out.matrix).real)
    else:
        out = DensityOp((), 0, np.array([[complex(t)]]))
        prob = float(np.real(complex(t)))
    return out, prob


def partial_trace(rho: DensityOp, modes_to_trace) -> DensityOp:
    """Trace out ``modes_to_trace``; trace preserved to 1e-12."""
    modes_to_trace = list(modes_to_trace)
    labels = list(rho.mode_labels)
    for m in modes_to_trace:
        if m not in labels:
            raise UnknownMode(f"mode {m!r} not present")
    t = rho.tensor_form()
    for m in modes_to_trace:
        n_cur = len(labels)
        axis = labels.index(m)
        t = np.trace(t, axis1=axis, axis2=n_cur + axis)
        labels.pop(axis)
    if not labels:
        val = complex(t)
        mat = np.zeros((1, 1), dtype=complex)
        mat[0, 0] = val
        return DensityOp((), 0, mat)
    return DensityOp.from_tensor_form(tuple(labels), rho.cutoff, t)
