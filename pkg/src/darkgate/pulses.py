"""Real pulse envelopes with exact area control.

Three shapes are supported: the shifted Gaussian used for the adiabatic
target pulse, a half-period sine, and a flat (square) pulse. Envelopes are
pure functions of time; any sampling grid belongs to the caller.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class PulseShape(str, enum.Enum):
    SHIFTED_GAUSSIAN = "gaussian"
    SINE = "sine"
    SQUARE = "square"


class KappaConvergenceError(RuntimeError):
    """kappa changed by more than the allowed fraction when B was doubled."""


@dataclass(frozen=True)
class PulseEnvelope:
    """A pulse Omega(t) on [0, duration], zero outside.

    ``amplitude`` is the Gaussian prefactor A, the sine peak, or the square
    level depending on ``shape``. ``phase`` only enters through the complex
    drive coefficient ``0.5 * Omega(t) * exp(1j * phase)``.
    """

    shape: PulseShape
    duration: float
    target_area: float
    amplitude: float
    sigma: float | None = None
    phase: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.duration)
        if self.shape is PulseShape.SHIFTED_GAUSSIAN:
            half = 0.5 * self.duration
            floor = math.exp(-half * half / (2.0 * self.sigma**2))
            val = self.amplitude * (np.exp(-((t - half) ** 2) / (2.0 * self.sigma**2)) - floor)
        elif self.shape is PulseShape.SINE:
            val = self.amplitude * np.sin(np.pi * t / self.duration)
        else:
            val = np.full_like(t, self.amplitude)
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def peak(self) -> float:
        return float(self(0.5 * self.duration))

    def area(self) -> float:
        """Area by adaptive quadrature (independent of the closed forms)."""
        if self.shape is PulseShape.SQUARE:
            return self.amplitude * self.duration
        val, _ = integrate.quad(self, 0.0, self.duration, epsabs=0.0, epsrel=1e-13, limit=200)
        return val

    def with_phase(self, phase: float) -> "PulseEnvelope":
        return PulseEnvelope(self.shape, self.duration, self.target_area, self.amplitude, self.sigma, phase)

    def scaled_to(self, duration: float) -> "PulseEnvelope":
        """Same shape and area, stretched to a new duration."""
        return make_pulse(self.shape, duration, self.target_area,
                          sigma_ratio=None if self.sigma is None else self.sigma / self.duration,
                          phase=self.phase)


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not (value > 0.0) or not math.isfinite(value):
            raise ValueError(f"{name} must be positive and finite, got {value!r}")


def gaussian_amplitude(duration: float, sigma: float, theta: float) -> float:
    """Prefactor A giving the shifted Gaussian the area ``theta``.

    The integral of the bare shape is
    ``sigma*sqrt(2 pi)*erf(T/(2^(3/2) sigma)) - T*exp(-T^2/(8 sigma^2))``.
    """
    x = duration**2 / (8.0 * sigma**2)
    bare = sigma * math.sqrt(2.0 * math.pi) * special.erf(duration / (2.0 ** 1.5 * sigma)) - duration * math.exp(-x)
    return theta / bare


def make_shifted_gaussian(duration: float, sigma: float, theta: float, phase: float = 0.0) -> PulseEnvelope:
    _check_positive(duration=duration, sigma=sigma, theta=theta)
    return PulseEnvelope(PulseShape.SHIFTED_GAUSSIAN, duration, theta,
                         gaussian_amplitude(duration, sigma, theta), sigma, phase)


def make_sine(duration: float, theta: float, phase: float = 0.0) -> PulseEnvelope:
    _check_positive(duration=duration, theta=theta)
    return PulseEnvelope(PulseShape.SINE, duration, theta, theta * math.pi / (2.0 * duration), None, phase)


def make_square(duration: float, theta: float, phase: float = 0.0) -> PulseEnvelope:
    _check_positive(duration=duration, theta=theta)
    return PulseEnvelope(PulseShape.SQUARE, duration, theta, theta / duration, None, phase)


def make_pulse(shape, duration: float, theta: float, sigma_ratio: float | None = 0.2,
               phase: float = 0.0) -> PulseEnvelope:
    shape = PulseShape(shape)
    if shape is PulseShape.SHIFTED_GAUSSIAN:
        return make_shifted_gaussian(duration, (sigma_ratio or 0.2) * duration, theta, phase)
    if shape is PulseShape.SINE:
        return make_sine(duration, theta, phase)
    return make_square(duration, theta, phase)


def rydberg_time(pulse: PulseEnvelope, B: float) -> float:
    """Integral of the dark-state Rydberg population Omega^2/(4B^2+Omega^2)."""
    def p_ry(t):
        om2 = pulse(t) ** 2
        return om2 / (4.0 * B * B + om2)

    if pulse.shape is PulseShape.SQUARE:
        return p_ry(0.5 * pulse.duration) * pulse.duration
    val, _ = integrate.quad(p_ry, 0.0, pulse.duration, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def kappa_factor(pulse: PulseEnvelope, B: float, rel_change: float = 5e-3) -> float:
    """Pulse-shape factor of the dark-state phase, B^2 T / pi^2 * int P_Ry dt.

    Evaluated at ``B`` and at ``2B``; raises if the two differ by more than
    ``rel_change`` (the factor is only defined for Omega << B).
    """
    if not math.isclose(pulse.area(), 2.0 * math.pi, rel_tol=1e-8):
        raise ValueError("kappa_factor requires a pulse normalized to area 2*pi")
    _check_positive(B=B)
    if pulse.peak >= B:
        raise ValueError("kappa_factor requires peak Rabi frequency below B")

    def kappa_at(b):
        return rydberg_time(pulse, b) * b * b * pulse.duration / math.pi**2

    k1, k2 = kappa_at(B), kappa_at(2.0 * B)
    if abs(k1 - k2) > rel_change * abs(k2):
        raise KappaConvergenceError(
            f"kappa not converged in the weak-drive limit: {k1:.6g} at B, {k2:.6g} at 2B"
        )
    return k1
