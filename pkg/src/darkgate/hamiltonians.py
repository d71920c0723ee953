"""Hamiltonian builders for the exchange (dark-state) gate and the blockade gate.

All frequencies are angular. Hamiltonians are in the rotating frame with
resonant drives; hbar = 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .pulses import PulseEnvelope
from .quantum_core import (
    H2_BASIS,
    H3_BASIS,
    H5_BASIS,
    Basis,
    OperatorMatrix,
)

FULL_BASIS = Basis.two_atom()


@dataclass(frozen=True)
class CouplingSet:
    """Pair couplings and Förster defects (angular frequencies).

    ``delta`` sits on the tuned |r_c r_t> <-> |a_c b_t> channel (on level b_t),
    ``delta_rr`` on b'_t and ``delta_ab`` on a'_t. ``B_sh`` is a static shift
    of |r_c r_t>, used only by the blockade model.
    """

    B: float = 0.0
    B_rr: float = 0.0
    B_ab: float = 0.0
    delta: float = 0.0
    delta_rr: float = 0.0
    delta_ab: float = 0.0
    B_sh: float = 0.0

    def __post_init__(self):
        if self.B_rr and abs(self.delta_rr) <= abs(self.B_rr):
            warnings.warn("forward leakage channel is not dispersive (|delta_rr| <= |B_rr|)", stacklevel=3)
        if self.B_ab and abs(self.delta_ab) <= abs(self.B_ab):
            warnings.warn("backward leakage channel is not dispersive (|delta_ab| <= |B_ab|)", stacklevel=3)

    @property
    def beta_rr(self) -> float:
        """Second-order shift of |r_c r_t> from the forward leakage channel."""
        return -self.B_rr**2 / self.delta_rr if self.delta_rr else 0.0

    @property
    def beta_ab(self) -> float:
        """Second-order shift of |a_c b_t>; the leakage pair sits at +delta_ab."""
        return -self.B_ab**2 / self.delta_ab if self.delta_ab else 0.0

    def with_delta(self, delta: float) -> "CouplingSet":
        return CouplingSet(self.B, self.B_rr, self.B_ab, delta, self.delta_rr, self.delta_ab, self.B_sh)


@dataclass(frozen=True)
class DecayModel:
    """Uniform decay rate of every Rydberg level of both atoms."""

    gamma: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"decay rate must be non-negative, got {self.gamma}")


@dataclass(frozen=True)
class Segment:
    """One piece of a pulse schedule with piecewise-constant structure.

    Laser pulses are given in local time, starting at the segment start.
    """

    duration: float
    control: PulseEnvelope | None = None
    target: PulseEnvelope | None = None
    mw_rabi: float = 0.0
    mw_phase: float = 0.0
    mw_detuning: tuple[float, float] = (0.0, 0.0)
    name: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment {self.name!r} has non-positive duration {self.duration}")

    @property
    def smallest_feature(self) -> float:
        scales = [self.duration]
        for p in (self.control, self.target):
            if p is not None and p.sigma is not None:
                scales.append(p.sigma)
        return min(scales)


@dataclass(frozen=True)
class Schedule:
    segments: tuple[Segment, ...]
    couplings: CouplingSet = field(default_factory=CouplingSet)
    decay: DecayModel = field(default_factory=DecayModel)

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    @property
    def duration(self) -> float:
        return float(self.boundaries[-1])

    def locate(self, t: float) -> tuple[int, float]:
        edges = self.boundaries
        if t < -1e-12 * edges[-1] or t > edges[-1] * (1 + 1e-12):
            raise ValueError(f"time {t} outside schedule span [0, {edges[-1]}]")
        k = int(np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(self.segments) - 1))
        return k, t - edges[k]


def _proj(basis: Basis, a: tuple[str, str], b: tuple[str, str]) -> np.ndarray:
    m = np.zeros((len(basis), len(basis)), dtype=complex)
    m[basis.index(a), basis.index(b)] = 1.0
    return m


def build_h3(omega_t: float, B: float) -> OperatorMatrix:
    """Three-state exchange model over {|r_c 1_t>, |r_c r_t>, |a_c b_t>}."""
    if not B > 0:
        raise ValueError("B must be positive")
    h = 0.5 * omega_t * _proj(H3_BASIS, ("r", "r"), ("r", "1"))
    h += B * _proj(H3_BASIS, ("a", "b"), ("r", "r"))
    return OperatorMatrix(h + h.conj().T, hermitian=True)


def build_h5(omega_t: float, c: CouplingSet) -> OperatorMatrix:
    """Three-state model plus the forward and backward leakage pair states."""
    h3 = build_h3(omega_t, c.B).entries
    h = np.zeros((5, 5), dtype=complex)
    h[:3, :3] = h3
    off = c.B_rr * _proj(H5_BASIS, ("a'", "b'"), ("r", "r")) + c.B_ab * _proj(H5_BASIS, ("b'", "a'"), ("a", "b"))
    h += off + off.conj().T
    h[3, 3] += c.delta_rr
    h[4, 4] += c.delta_ab
    return OperatorMatrix(h, hermitian=True)


def build_h2_blockade(omega_t: float, B_sh: float) -> OperatorMatrix:
    """Blockade two-level model over {|r_c 1_t>, |r_c r_t>}."""
    h = 0.5 * omega_t * _proj(H2_BASIS, ("r", "r"), ("r", "1"))
    h = h + h.conj().T
    h[1, 1] = B_sh
    return OperatorMatrix(h, hermitian=True)


def decay_operator(decay: DecayModel, basis: Basis) -> np.ndarray:
    """Diagonal -(i/2) * Gamma * (number of Rydberg-excited atoms)."""
    return np.diag(-0.5j * decay.gamma * basis.rydberg_count())


def apply_decay(H: OperatorMatrix, decay: DecayModel, basis: Basis) -> OperatorMatrix:
    if len(basis) != H.dimension:
        raise ValueError("basis does not match operator dimension")
    if decay.gamma == 0.0:
        return H
    return OperatorMatrix(H.entries + decay_operator(decay, basis), hermitian=False)


class TwoAtomOperators:
    """Time-independent pieces of the 36-state two-atom Hamiltonian."""

    def __init__(self, basis: Basis = FULL_BASIS):
        self.basis = basis
        n = len(basis)
        eye_t = np.eye(6)
        eye_c = np.eye(6)

        def single(levels, a, b):
            m = np.zeros((6, 6))
            m[levels.index(a), levels.index(b)] = 1.0
            return m

        cl, tl = basis.control_levels, basis.target_levels
        self.control_laser = np.kron(single(cl, "r", "1"), eye_t)  # |r_c><1_c|
        self.target_laser = np.kron(eye_c, single(tl, "r", "1"))
        self.control_mw = np.kron(single(cl, "1", "0"), eye_t)
        self.target_mw = np.kron(eye_c, single(tl, "1", "0"))
        self.control_zero = np.kron(single(cl, "0", "0"), eye_t)
        self.target_zero = np.kron(eye_c, single(tl, "0", "0"))
        self.target_b = np.kron(eye_c, single(tl, "b", "b"))
        self.target_bp = np.kron(eye_c, single(tl, "b'", "b'"))
        self.target_ap = np.kron(eye_c, single(tl, "a'", "a'"))
        self.exchange = _proj(basis, ("a", "b"), ("r", "r")).real
        self.leak_rr = _proj(basis, ("a'", "b'"), ("r", "r")).real
        self.leak_ab = _proj(basis, ("b'", "a'"), ("a", "b")).real
        self.rr_shift = _proj(basis, ("r", "r"), ("r", "r")).real
        assert self.control_laser.shape == (n, n)

    def rydberg(self, c: CouplingSet) -> np.ndarray:
        off = c.B * self.exchange + c.B_rr * self.leak_rr + c.B_ab * self.leak_ab
        return (off + off.T + c.delta * self.target_b + c.delta_rr * self.target_bp
                + c.delta_ab * self.target_ap + c.B_sh * self.rr_shift).astype(complex)

    def microwave(self, seg: Segment) -> np.ndarray:
        drive = 0.5 * seg.mw_rabi * np.exp(1j * seg.mw_phase) * (self.control_mw + self.target_mw)
        return drive + drive.conj().T - seg.mw_detuning[0] * self.control_zero - seg.mw_detuning[1] * self.target_zero

    def laser_terms(self, seg: Segment) -> list[tuple[PulseEnvelope, np.ndarray]]:
        terms = []
        if seg.control is not None:
            terms.append((seg.control, np.exp(1j * seg.control.phase) * self.control_laser))
        if seg.target is not None:
            terms.append((seg.target, np.exp(1j * seg.target.phase) * self.target_laser))
        return terms


_OPERATORS: TwoAtomOperators | None = None


def two_atom_operators() -> TwoAtomOperators:
    global _OPERATORS
    if _OPERATORS is None:
        _OPERATORS = TwoAtomOperators()
    return _OPERATORS


class SegmentHamiltonian:
    """Callable local-time Hamiltonian of one schedule segment.

    Calling returns a raw ndarray, which is what the propagator consumes.
    The static part (interactions, microwave, decay) is assembled once.
    """

    def __init__(self, seg: Segment, couplings: CouplingSet, decay: DecayModel | None = None):
        ops = two_atom_operators()
        self.segment = seg
        static = ops.rydberg(couplings) + ops.microwave(seg)
        if decay is not None and decay.gamma:
            static = static + decay_operator(decay, ops.basis)
        self.static = static
        self.terms = [(p, 0.5 * m, 0.5 * m.conj().T) for p, m in ops.laser_terms(seg)]

    def __call__(self, t: float) -> np.ndarray:
        h = self.static
        for pulse, up, down in self.terms:
            om = pulse(t)
            if om != 0.0:
                h = h + om * (up + down)
        return h


def build_full(schedule, t: float, label: str = "11") -> OperatorMatrix:
    """Hermitian 36x36 Hamiltonian H_MW + H_L + H_Ry at absolute time ``t``.

    ``schedule`` may be a :class:`Schedule` or a ``GateConfig``; in the latter
    case the gate schedule for input ``label`` is used.
    """
    if not isinstance(schedule, Schedule):
        from .protocol import gate_schedule

        schedule = gate_schedule(schedule, label)
    k, local = schedule.locate(t)
    h = SegmentHamiltonian(schedule.segments[k], schedule.couplings, None)(local)
    return OperatorMatrix(h, hermitian=True)

