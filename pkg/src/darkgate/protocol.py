"""The three-step phase gate: schedules, gate-matrix extraction and average fidelity."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import GateConfig
from .hamiltonians import FULL_BASIS, Schedule, Segment, SegmentHamiltonian
from .propagator import PropagationResult, propagate
from .pulses import PulseShape, make_pulse
from .quantum_core import QUBIT_LABELS, StateVector

INPUT_LABELS = ("00", "01", "10", "11")
U_CZ = np.diag([1.0, -1.0, -1.0, -1.0]).astype(complex)
_QUBIT_INDEX = [FULL_BASIS.index(lab) for lab in QUBIT_LABELS]


@dataclass(frozen=True)
class InputDiagnostics:
    label: str
    final_norm: float
    residual_rydberg: float
    phase: float
    accepted_steps: int
    rejected_steps: int


@dataclass(frozen=True)
class GateResult:
    U: np.ndarray
    F: float
    diagnostics: tuple[InputDiagnostics, ...] = ()
    histories: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def E(self) -> float:
        return 1.0 - self.F

    @property
    def residual_rydberg(self) -> float:
        """Input-averaged Rydberg population left at the end of the sequence."""
        if not self.diagnostics:
            return 0.0
        return float(np.mean([d.residual_rydberg for d in self.diagnostics]))


def _check_label(label: str) -> tuple[int, int]:
    if label not in INPUT_LABELS:
        raise ValueError(f"input label must be one of {INPUT_LABELS}, got {label!r}")
    return int(label[0]), int(label[1])


def prepare_input(label: str, cfg: GateConfig) -> tuple[Segment, ...]:
    """Microwave pi pulse taking |0_c 0_t> to the input ``label``.

    Atoms that must flip see a resonant pulse; the others are detuned by
    ``mw_detuning_ratio * Omega_MW``.
    """
    c, t = _check_label(label)
    duration = cfg.mw_pi_time_ratio * cfg.target_duration
    rabi = math.pi / duration
    detune = cfg.mw_detuning_ratio * rabi
    return (Segment(duration, mw_rabi=rabi, mw_detuning=(0.0 if c else detune, 0.0 if t else detune),
                    name=f"prep-{label}"),)


def ideal_prep_phase(label: str) -> complex:
    """Phase a perfect resonant pi pulse imprints: |0> -> -i|1> per flipped atom."""
    c, t = _check_label(label)
    return (-1j) ** (c + t)


def target_segments(cfg: GateConfig, split_phase: float | None = None) -> tuple[Segment, ...]:
    T = cfg.target_duration
    shape = PulseShape(cfg.target_shape)
    if not cfg.split_target:
        return (Segment(T, target=make_pulse(shape, T, 2 * math.pi, cfg.sigma_ratio), name="step-ii"),)
    phi = 0.0 if split_phase is None else split_phase
    first = make_pulse(shape, 0.5 * T, math.pi, cfg.sigma_ratio)
    second = make_pulse(shape, 0.5 * T, math.pi, cfg.sigma_ratio, phase=phi)
    return (Segment(0.5 * T, target=first, name="step-ii-a"), Segment(0.5 * T, target=second, name="step-ii-b"))


def gate_schedule(cfg: GateConfig, label: str | None = None, prep: bool | None = None) -> Schedule:
    """Full pulse sequence; the microwave preparation is prepended unless ``ideal_prep``."""
    if prep is None:
        prep = not cfg.ideal_prep
    segs: list[Segment] = []
    if prep:
        segs.extend(prepare_input(label or "11", cfg))
    control = make_pulse(cfg.control_shape, cfg.control_duration, math.pi, cfg.sigma_ratio)
    gap = cfg.gap
    segs.append(Segment(cfg.control_duration, control=control, name="step-i"))
    if gap > 0:
        segs.append(Segment(gap, name="gap-1"))
    segs.extend(target_segments(cfg, _resolved_split_phase(cfg)))
    if gap > 0:
        segs.append(Segment(gap, name="gap-2"))
    segs.append(Segment(cfg.control_duration, control=control, name="step-iii"))
    return Schedule(tuple(segs), cfg.couplings(), cfg.decay())


def _resolved_split_phase(cfg: GateConfig) -> float | None:
    if not cfg.split_target:
        return None
    if cfg.split_phase is not None:
        return cfg.split_phase
    if cfg.interaction == "blockade":
        from .analysis import split_pulse_phase

        return split_pulse_phase(cfg)
    return 0.0


def run_schedule(schedule: Schedule, psi0: StateVector, tol: float,
                 samples: int = 2000) -> PropagationResult:
    """Propagate segment by segment; the integrator restarts at every edge."""
    result = None
    psi = psi0
    t_start = 0.0
    for seg in schedule.segments:
        h = SegmentHamiltonian(seg, schedule.couplings, schedule.decay)
        part = propagate(h, psi, 0.0, seg.duration, tol=tol, samples=samples)
        part = PropagationResult(part.final_state, part.times + t_start, part.norm_history,
                                 part.population_history, part.accepted_steps, part.rejected_steps)
        result = part if result is None else result.concatenate(part)
        psi = part.final_state
        t_start += seg.duration
    return result


class GateRunError(RuntimeError):
    def __init__(self, label: str, cause: Exception):
        super().__init__(f"propagation failed for input |{label}>: {cause}")
        self.label = label


def _run_input(cfg: GateConfig, label: str, samples: int) -> tuple[np.ndarray, PropagationResult]:
    prep = not cfg.ideal_prep
    schedule = gate_schedule(cfg, label, prep=prep)
    start = "00" if prep else label
    psi0 = StateVector.basis_state(FULL_BASIS, (start[0], start[1]))
    try:
        res = run_schedule(schedule, psi0, cfg.tol, samples)
    except Exception as exc:  # noqa: BLE001 - re-raised with the input label attached
        raise GateRunError(label, exc) from exc
    column = res.final_state.amplitudes[_QUBIT_INDEX]
    if prep:
        column = column * np.conj(ideal_prep_phase(label))
    return column, res


def pedersen_fidelity(U: np.ndarray, U_target: np.ndarray = U_CZ) -> float:
    """Average gate fidelity [Tr(M M^dag) + |Tr M|^2] / 20 with M = U_target^dag U.

    U is not renormalised, so population loss lowers F.
    """
    U = np.asarray(U, dtype=complex)
    U_target = np.asarray(U_target, dtype=complex)
    if U.shape != (4, 4) or U_target.shape != (4, 4):
        raise ValueError(f"pedersen_fidelity needs two 4x4 matrices, got {U.shape} and {U_target.shape}")
    M = U_target.conj().T @ U
    return float((np.trace(M @ M.conj().T).real + abs(np.trace(M)) ** 2) / 20.0)


def _assemble(columns, results, labels, keep_history) -> GateResult:
    U = np.column_stack(columns)
    diags = []
    rydberg = FULL_BASIS.rydberg_count() > 0
    for j, (label, res) in enumerate(zip(labels, results)):
        final = res.final_state.amplitudes
        diags.append(InputDiagnostics(
            label=label,
            final_norm=res.final_state.norm_squared(),
            residual_rydberg=float(np.sum(np.abs(final[rydberg]) ** 2)),
            phase=float(np.angle(U[j, j] / U_CZ[j, j])),
            accepted_steps=res.accepted_steps,
            rejected_steps=res.rejected_steps,
        ))
    histories = dict(zip(labels, results)) if keep_history else {}
    return GateResult(U, pedersen_fidelity(U), tuple(diags), histories)


def run_gate(cfg: GateConfig, jobs: int = 1, keep_history: bool = False,
             samples: int = 2000) -> GateResult:
    """Run the sequence for all four computational inputs and score it against diag(1,-1,-1,-1)."""
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_input, [cfg] * 4, INPUT_LABELS, [samples] * 4))
    else:
        outs = [_run_input(cfg, label, samples) for label in INPUT_LABELS]
    columns = [c for c, _ in outs]
    results = [r for _, r in outs]
    return _assemble(columns, results, INPUT_LABELS, keep_history)


def target_phase_gate(phi: float) -> np.ndarray:
    """I_c x (|0><0| + e^{-i phi}|1><1|) on the target register."""
    return np.diag([1.0, np.exp(-1j * phi), 1.0, np.exp(-1j * phi)])


def apply_phase_correction(result: GateResult, phi: float) -> GateResult:
    """Apply Z_t(phi) to the target after the gate and rescore."""
    U = target_phase_gate(phi) @ result.U
    return GateResult(U, pedersen_fidelity(U), result.diagnostics, result.histories)


def hadamard_segment(cfg: GateConfig) -> Segment:
    """Microwave pi/2 pulse (phase -pi/2) on the target; the control is detuned away."""
    duration = cfg.target_duration
    rabi = 0.5 * math.pi / duration
    return Segment(duration, mw_rabi=rabi, mw_phase=-0.5 * math.pi,
                   mw_detuning=(cfg.mw_detuning_ratio * rabi, 0.0), name="hadamard")


def cnot_truth_table(cfg: GateConfig) -> np.ndarray:
    """Populations |<out|psi>|^2 of the phase gate sandwiched by target pi/2 pulses.

    Row = output label, column = input label, both in 00,01,10,11 order.
    """
    cfg = cfg.replace(ideal_prep=True)
    core = gate_schedule(cfg)
    h = hadamard_segment(cfg)
    schedule = Schedule((h,) + core.segments + (h,), core.couplings, core.decay)
    table = np.zeros((4, 4))
    for j, label in enumerate(INPUT_LABELS):
        psi0 = StateVector.basis_state(FULL_BASIS, (label[0], label[1]))
        res = run_schedule(schedule, psi0, cfg.tol, samples=2)
        table[:, j] = np.abs(res.final_state.amplitudes[_QUBIT_INDEX]) ** 2
    return table
