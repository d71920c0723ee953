"""Analytic error estimates, blockade-gate closed forms and sweep drivers."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import integrate

from .config import GateConfig, mhz_to_angular
from .hamiltonians import CouplingSet, build_h2_blockade, build_h5
from .propagator import propagate, survival_probability
from .pulses import PulseEnvelope, make_pulse, make_shifted_gaussian
from .quantum_core import H2_BASIS, H5_BASIS, StateVector

# 13 log-spaced points, 10^3 ... 10^7.
DEFAULT_BTAU_GRID = tuple(float(x) for x in np.logspace(3, 7, 13))
DEFAULT_SHAPES = ("gaussian", "square")


@dataclass(frozen=True)
class ErrorBudget:
    """Input-averaged error probabilities of step (ii)."""

    decay_control: float = 0.0
    decay_target: float = 0.0
    decay_ryry: float = 0.0
    rotation: float = 0.0
    phase: float = 0.0
    eta: float | None = None
    lower_bound: float | None = None

    @property
    def total(self) -> float:
        return self.decay_control + self.decay_target + self.decay_ryry + self.rotation + self.phase


def analytic_error(gamma: float, B: float, omega_t0: float) -> ErrorBudget:
    """Averaged intrinsic error (pi Gamma/4)[5/Omega + Omega/(4B^2)] split by origin.

    Inputs |10>, |11> carry the control decay 2 pi Gamma/Omega, |01> the
    target decay pi Gamma/Omega, and |11> the doubly excited dark-state
    admixture pi Gamma Omega/(4B^2).
    """
    for name, v in (("gamma", gamma), ("B", B), ("omega_t0", omega_t0)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    alpha = omega_t0 / B
    return ErrorBudget(
        decay_control=math.pi * gamma / omega_t0,
        decay_target=0.25 * math.pi * gamma / omega_t0,
        decay_ryry=math.pi * gamma * omega_t0 / (16.0 * B * B),
        eta=5.0 * math.pi / (4.0 * alpha),
        lower_bound=2.0 * gamma / B,
    )


def nonadiabatic_rydberg_population(pulse: PulseEnvelope, B: float, samples: int = 4001) -> float:
    """Peak first-order estimate of the |r_c r_t> admixture while the dark state is followed.

    The dark-state mixing angle is theta = arctan(Omega/(2B)); to first order
    in d(theta)/dt the bright-state admixture puts (theta'/nu)^2 on |r_c r_t>.
    """
    t = np.linspace(0.0, pulse.duration, samples)
    dt = 1e-7 * pulse.duration
    om = pulse(t)
    d_om = (pulse(np.clip(t + dt, 0, pulse.duration)) - pulse(np.clip(t - dt, 0, pulse.duration))) / (
        np.clip(t + dt, 0, pulse.duration) - np.clip(t - dt, 0, pulse.duration))
    theta_dot = (d_om / (2.0 * B)) / (1.0 + om**2 / (4.0 * B * B))
    nu = np.sqrt(B * B + 0.25 * om**2)
    return float(np.max((theta_dot / nu) ** 2))


def optimal_rabi(B: float) -> float:
    """Omega_t0 minimising the analytic error (outside the adiabatic regime)."""
    return 2.0 * math.sqrt(5.0) * B


def blockade_error_budget(gamma: float, B_sh: float, omega_t: float, square: bool = False,
                          delta_B: float = 0.0) -> dict[str, ErrorBudget]:
    """Per-input step (ii) error ledger of the blockade gate, plus the input average."""
    decay = math.pi * gamma / omega_t
    rows = {
        "00": ErrorBudget(),
        "01": ErrorBudget(decay_target=decay),
        "10": ErrorBudget(decay_control=2 * decay),
        "11": ErrorBudget(
            decay_control=2 * decay,
            decay_ryry=math.pi * gamma * omega_t / (4 * B_sh**2),
            rotation=omega_t**2 / (2 * B_sh**2) if square else 0.0,
            phase=math.pi * abs(delta_B) * omega_t / B_sh**2,
        ),
    }
    keys = ("decay_control", "decay_target", "decay_ryry", "rotation", "phase")
    rows["average"] = ErrorBudget(**{k: sum(getattr(r, k) for r in rows.values()) / 4 for k in keys})
    return rows


# --- blockade closed forms -------------------------------------------------

def blockade_eigenvalues(omega_t: float, B_sh: float) -> tuple[float, float]:
    bar = math.hypot(B_sh, omega_t)
    return 0.5 * (B_sh - bar), 0.5 * (B_sh + bar)


def blockade_square_solution(omega_t: float, B_sh: float, t, laser_phase: float = 0.0):
    """Amplitudes (c_1, c_r) of |r_c 1_t>, |r_c r_t> for a constant drive, starting in |r_c 1_t>.

    Solves i dc/dt = H c for the two-level blockade Hamiltonian, with the
    drive coefficient 0.5*Omega*exp(i*laser_phase) on |r_c r_t><r_c 1_t|.
    """
    t = np.asarray(t, dtype=float)
    bar = math.hypot(B_sh, omega_t)
    if bar == 0.0:
        one = np.ones_like(t, dtype=complex)
        return one, 0.0 * one
    env = np.exp(-0.5j * B_sh * t)
    s, c = np.sin(0.5 * bar * t), np.cos(0.5 * bar * t)
    c1 = env * (c + 1j * (B_sh / bar) * s)
    cr = -1j * env * np.exp(1j * laser_phase) * (omega_t / bar) * s
    return c1, cr


def magic_rabi(B_sh: float, k: int = 1) -> float:
    """Square 2 pi pulse amplitude B_sh/sqrt(4k^2-1) that leaves no Rydberg population."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    return B_sh / math.sqrt(4 * k * k - 1)


def adiabatic_phase(pulse: PulseEnvelope, B_sh: float) -> float:
    """Integral of the adiabatic eigenvalue lambda_-(t) = (B_sh - sqrt(B_sh^2 + Omega^2))/2.

    The state |r_c 1_t> ends up multiplied by exp(-1j * phase).
    """
    def lam(t):
        om = pulse(t)
        # cancellation-free form of (B - sqrt(B^2 + om^2)) / 2
        return -0.5 * om * om / (B_sh + math.sqrt(B_sh * B_sh + om * om)) if om else 0.0

    val, _ = integrate.quad(lam, 0.0, pulse.duration, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def weak_drive_phase(pulse: PulseEnvelope, B_sh: float) -> float:
    """-int Omega^2/(4 B_sh) dt, the perturbative limit of :func:`adiabatic_phase`."""
    val, _ = integrate.quad(lambda t: pulse(t) ** 2, 0.0, pulse.duration, epsabs=0.0, epsrel=1e-12, limit=200)
    return -val / (4.0 * B_sh)


def split_pulse_phase(cfg: GateConfig) -> float:
    """Laser phase of the second half of a split target pulse in the blockade gate.

    Matching it to the adiabatic phase of |r_c 1_t> makes inputs |01> and
    |11> pick up the same target phase, which a single Z_t then removes.
    """
    T = 0.5 * cfg.target_duration
    half = make_pulse(cfg.target_shape, T, math.pi, cfg.sigma_ratio)
    return 2.0 * adiabatic_phase(half, cfg.couplings().B_sh)


def square_residual_average(omega_t: float, B_sh: float, t_end: float, window: float | None = None) -> float:
    """Time-averaged |c_r|^2 of the square-pulse solution over a window ending at ``t_end``."""
    bar = math.hypot(B_sh, omega_t)
    window = window or 2 * math.pi / bar
    ts = np.linspace(t_end - window, t_end, 4001)
    _, cr = blockade_square_solution(omega_t, B_sh, ts)
    return float(integrate.trapezoid(np.abs(cr) ** 2, ts) / window)


# --- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    btau: float
    pulse_shape: str
    E_simulated: float
    E_analytic: float
    E_analytic_dashed: float
    F: float
    residual_rydberg: float
    notes: str = ""


def _sweep_point(base: GateConfig, btau: float, shape: str) -> SweepRecord:
    cfg = base.replace(btau=btau, target_shape=shape)
    solid = cfg.eta / btau
    dashed = solid + cfg.alpha**2 / 16.0
    try:
        from .protocol import run_gate

        res = run_gate(cfg)
    except Exception as exc:  # noqa: BLE001 - a failed row must not abort the sweep
        return SweepRecord(btau, shape, math.nan, solid, dashed, math.nan, math.nan, f"failed: {exc}")
    return SweepRecord(btau, shape, 1.0 - res.F, solid, dashed, res.F, res.residual_rydberg)


def sweep_btau(base: GateConfig, btau_grid=DEFAULT_BTAU_GRID, shapes=DEFAULT_SHAPES,
               jobs: int = 1) -> list[SweepRecord]:
    """Gate error versus B tau for each target pulse shape.

    Rows come back grouped by shape, then in grid order, whatever the
    completion order of parallel jobs.
    """
    grid = [float(b) for b in btau_grid]
    if any(b2 < b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("btau grid must be sorted ascending")
    tasks = [(shape, b) for shape in shapes for b in grid]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_point, base, b, s) for s, b in tasks]
            return [f.result() for f in futures]
    return [_sweep_point(base, b, s) for s, b in tasks]


# --- leakage study -------------------------------------------------------------

@dataclass(frozen=True)
class LeakageCase:
    case: int
    b_rr_ratio: float
    delta_rr_mhz: float
    b_ab_ratio: float
    delta_ab_mhz: float
    B_mhz: float = 350.0
    alpha: float = 0.1
    sigma_ratio: float = 0.2
    theta: float = 2 * math.pi
    expected: float | None = None
    states: dict = field(default_factory=dict, compare=False)

    @property
    def duration(self) -> float:
        """Pulse length 2 pi/(alpha B) in microseconds."""
        return 2 * math.pi / (self.alpha * mhz_to_angular(self.B_mhz))

    def couplings(self) -> CouplingSet:
        B = mhz_to_angular(self.B_mhz)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return CouplingSet(B=B, B_rr=self.b_rr_ratio * B, B_ab=self.b_ab_ratio * B,
                               delta_rr=mhz_to_angular(self.delta_rr_mhz),
                               delta_ab=mhz_to_angular(self.delta_ab_mhz))

    def is_dispersive(self) -> tuple[bool, bool]:
        B = self.B_mhz
        return (abs(self.delta_rr_mhz) > abs(self.b_rr_ratio * B),
                abs(self.delta_ab_mhz) > abs(self.b_ab_ratio * B))


def load_leakage_data(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("darkgate.data").joinpath("leakage_cases.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return json.loads(text)


def _case_from_record(rec: dict, sim: dict) -> LeakageCase:
    state_keys = ("r_c", "r_t", "a_c", "b_t", "a_c_prime", "b_t_prime", "b_c_prime", "a_t_prime")
    return LeakageCase(
        case=int(rec.get("case", 0)),
        b_rr_ratio=float(rec["b_rr_ratio"]),
        delta_rr_mhz=float(rec["delta_rr_mhz"]),
        b_ab_ratio=float(rec["b_ab_ratio"]),
        delta_ab_mhz=float(rec["delta_ab_mhz"]),
        B_mhz=float(rec.get("B_mhz", sim.get("B_mhz", 350.0))),
        alpha=float(rec.get("alpha", sim.get("alpha", 0.1))),
        sigma_ratio=float(rec.get("sigma_ratio", sim.get("sigma_ratio", 0.2))),
        theta=float(rec.get("theta", sim.get("theta", 2 * math.pi))),
        expected=rec.get("missing_population"),
        states={k: rec[k] for k in state_keys if k in rec},
    )


def leakage_cases(path: str | Path | None = None) -> dict[int, LeakageCase]:
    data = load_leakage_data(path)
    if data.get("version") != 1:
        raise ValueError(f"unsupported leakage data version {data.get('version')!r}")
    sim = data.get("simulation", {})
    return {rec["case"]: _case_from_record(rec, sim) for rec in data["cases"]}


def leakage_case_from_params(path: str | Path) -> LeakageCase:
    """Single case from a flat JSON object with the same keys as a data-file row."""
    rec = json.loads(Path(path).read_text("utf-8"))
    return _case_from_record(rec, {})


def leakage_study(case: LeakageCase, tol: float = 1e-11) -> float:
    """Population missing from |r_c 1_t> after the shifted-Gaussian target pulse (five-state model)."""
    T = case.duration
    pulse = make_shifted_gaussian(T, case.sigma_ratio * T, case.theta)
    c = case.couplings()
    static = build_h5(0.0, c).entries
    drive = build_h5(1.0, c).entries - static

    def h(t):
        return static + pulse(t) * drive

    psi0 = StateVector.basis_state(H5_BASIS, ("r", "1"))
    res = propagate(h, psi0, 0.0, T, tol=tol, max_step=case.sigma_ratio * T / 20, samples=2)
    return 1.0 - survival_probability(res, ("r", "1"))


def blockade_propagation(omega_t: float, B_sh: float, T: float, tol: float = 1e-12,
                         samples: int = 2000):
    """Propagate |r_c 1_t> under the constant blockade Hamiltonian for a time T."""
    H = build_h2_blockade(omega_t, B_sh).entries
    psi0 = StateVector.basis_state(H2_BASIS, ("r", "1"))
    return propagate(lambda t: H, psi0, 0.0, T, tol=tol, max_step=T / 20, samples=samples)
