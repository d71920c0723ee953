"""Adaptive Schrödinger propagation, d psi/dt = -i H(t) psi.

Dormand-Prince 5(4) embedded pair with FSAL. Works unchanged for the
non-Hermitian (decaying) Hamiltonians, which is why no unitary-exponential
stepping is used. Diagnostics are sampled on a fixed grid with the
pair's fourth-order continuous extension between accepted steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .quantum_core import Basis, StateVector

# Dormand-Prince tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array(_A[6] + [0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
# Continuous extension: y(t + s h) = y + h * sum_k k_i * (P[i] @ [s, s^2, s^3, s^4]).
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

DEFAULT_TOL = 1e-10
HISTORY_SAMPLES = 2000


class PropagationError(RuntimeError):
    """Step size underflow; ``time`` is where the integrator gave up."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class PropagationResult:
    final_state: StateVector
    times: np.ndarray
    norm_history: np.ndarray
    population_history: np.ndarray
    accepted_steps: int
    rejected_steps: int

    def concatenate(self, later: "PropagationResult") -> "PropagationResult":
        """Join two consecutive runs, dropping the duplicated junction sample."""
        return PropagationResult(
            later.final_state,
            np.concatenate([self.times, later.times[1:]]),
            np.concatenate([self.norm_history, later.norm_history[1:]]),
            np.concatenate([self.population_history, later.population_history[1:]]),
            self.accepted_steps + later.accepted_steps,
            self.rejected_steps + later.rejected_steps,
        )

    def rydberg_integral(self, basis: Basis) -> float:
        """Time integral of sum_k n_Ry(k) |psi_k|^2 (trapezoid on the sample grid)."""
        weighted = self.population_history @ basis.rydberg_count()
        return float(integrate.trapezoid(weighted, self.times))


def _as_array(h) -> np.ndarray:
    return h.entries if hasattr(h, "entries") else h


def propagate(
    h_of_t: Callable[[float], object],
    psi0: StateVector,
    t0: float,
    t1: float,
    tol: float = DEFAULT_TOL,
    max_step: float | None = None,
    samples: int = HISTORY_SAMPLES,
) -> PropagationResult:
    """Integrate from ``t0`` to ``t1``.

    The local error estimate of every accepted step is at most
    ``tol * ||psi||``. ``max_step`` defaults to a twentieth of the smallest
    feature of ``h_of_t.segment`` when present, else of the span.
    Call once per schedule segment so no step straddles a pulse edge.
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-13, 1e-6], got {tol}")
    span = t1 - t0
    if max_step is None:
        seg = getattr(h_of_t, "segment", None)
        max_step = (seg.smallest_feature if seg is not None else span) / 20.0
    max_step = min(max_step, span)
    h_min = 1e-6 * span

    y = np.array(psi0.amplitudes, dtype=complex)
    h0 = _as_array(h_of_t(t0))
    if h0.shape != (y.size, y.size):
        raise ValueError(f"Hamiltonian shape {h0.shape} does not match state dimension {y.size}")

    sample_t = np.linspace(t0, t1, samples) if samples >= 2 else np.array([t0, t1])
    pops = np.empty((sample_t.size, y.size))
    pops[0] = np.abs(y) ** 2
    n_done = 1

    def rhs(t, v):
        return -1j * (_as_array(h_of_t(t)) @ v)

    f = -1j * (h0 @ y)
    scale = max(np.abs(h0).sum(axis=1).max(), 1e-300)
    h = min(max_step, 0.05 / scale, span)
    t = t0
    accepted = rejected = 0
    k = [None] * 7

    while t < t1:
        last = t + 1.01 * h >= t1
        if last:
            h = t1 - t
        k[0] = f
        for i in range(1, 7):
            yi = y + h * sum(a * kj for a, kj in zip(_A[i], k[:i]) if a != 0.0)
            k[i] = rhs(t + _C[i] * h, yi)
        y_new = yi  # stage 7 argument equals the 5th-order solution (FSAL)
        err_vec = h * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
        err = float(np.linalg.norm(err_vec))
        bound = tol * max(float(np.linalg.norm(y)), 1e-300)

        if err <= bound:
            t_new = t1 if last else t + h
            f_new = k[6]
            # Dense output for sample times in (t, t_new].
            if n_done < sample_t.size and sample_t[n_done] <= t_new:
                q = np.stack(k, axis=1) @ _P
                while n_done < sample_t.size and sample_t[n_done] <= t_new:
                    s = (sample_t[n_done] - t) / h
                    yi_s = y + h * (q @ np.array([s, s**2, s**3, s**4]))
                    pops[n_done] = np.abs(yi_s) ** 2
                    n_done += 1
            t, y, f = t_new, y_new, f_new
            accepted += 1
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * (bound / err) ** 0.2))
            h = min(h * factor, max_step)
        else:
            rejected += 1
            h *= max(0.1, 0.9 * (bound / err) ** 0.25)
            if h < h_min:
                raise PropagationError(
                    f"step size underflow at t = {t:.12g} (required step {h:.3g} < {h_min:.3g})", t
                )

    pops[-1] = np.abs(y) ** 2
    return PropagationResult(
        StateVector(y, psi0.basis),
        sample_t,
        pops.sum(axis=1),
        pops,
        accepted,
        rejected,
    )


def survival_probability(result: PropagationResult, label: tuple[str, str]) -> float:
    """|<label|psi(t1)>|^2; one minus this is the missing population."""
    return result.final_state.population(label)
