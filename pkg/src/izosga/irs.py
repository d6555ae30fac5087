"""Reflection models for passive IRS elements and the feasible parameter box.

Two element laws are provided:

* ideal: each element is ``A * exp(j*phi)`` with amplitude and phase tuned
  independently, ``theta = [A; phi]``.
* varactor: each element's reflection is a fixed circuit function of a diode
  capacitance, ``theta = c_var`` (in picofarads).

Both models expose ``reflection(theta)`` and ``reflection_derivative(theta)``;
the latter returns, for every block of ``theta``, the per-element derivative
of the reflection coefficient (each coordinate of ``theta`` drives exactly one
element).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ParameterBox:
    """Axis-aligned box ``lower <= theta <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError(f"box bounds differ in length: {lower.size} vs {upper.size}")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if np.any(lower > upper):
            raise ValueError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, theta, atol: float = 0.0) -> bool:
        theta = np.asarray(theta)
        return bool(np.all(theta >= self.lower - atol) and np.all(theta <= self.upper + atol))

    def uniform(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


def project(theta, box: ParameterBox) -> np.ndarray:
    """Euclidean projection onto ``box`` (a componentwise clamp).

    Works on a single vector or on a stack of vectors along leading axes.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != box.dim:
        raise ValueError(f"theta has length {theta.shape[-1]}, box has {box.dim}")
    return np.clip(theta, box.lower, box.upper)


def reflection_ideal(amplitude, phase) -> np.ndarray:
    """Per-element reflection ``A_i * exp(j*phi_i)``."""
    amplitude = np.asarray(amplitude, dtype=float)
    phase = np.asarray(phase, dtype=float)
    if amplitude.shape != phase.shape:
        raise ValueError(f"amplitude shape {amplitude.shape} != phase shape {phase.shape}")
    return amplitude * np.exp(1j * phase)


@dataclass(frozen=True)
class VaractorCircuit:
    """Transmission-line surrogate of a varactor-loaded patch element.

    The varactor branch ``R_s + j w L_s + 1/(j w C)`` sits in parallel with the
    patch inductance ``L_p``; the element reflects against free space ``Z0``.
    """

    frequency: float = 5e9
    series_resistance: float = 1.0
    series_inductance: float = 0.7e-9
    patch_inductance: float = 2.5e-9
    free_space_impedance: float = 376.73

    def __post_init__(self):
        errors = []
        if not self.frequency > 0:
            errors.append("frequency must be > 0")
        if not self.free_space_impedance > 0:
            errors.append("free_space_impedance must be > 0")
        if self.series_resistance < 0:
            errors.append("series_resistance must be >= 0")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def angular_frequency(self) -> float:
        return TWO_PI * self.frequency


def _varactor_impedance(c_var, circuit: VaractorCircuit):
    c_var = np.asarray(c_var, dtype=float)
    if np.any(c_var <= 0):
        raise ValueError("varactor capacitance must be positive")
    w = circuit.angular_frequency
    z_branch = circuit.series_resistance + 1j * w * circuit.series_inductance + 1.0 / (1j * w * c_var)
    z_patch = 1j * w * circuit.patch_inductance
    z = z_patch * z_branch / (z_patch + z_branch)
    return z, z_branch, z_patch


def reflection_varactor(c_var, circuit: VaractorCircuit) -> np.ndarray:
    """Reflection coefficient of each element for capacitances ``c_var`` (farads)."""
    z, _, _ = _varactor_impedance(c_var, circuit)
    z0 = circuit.free_space_impedance
    return (z - z0) / (z + z0)


def reflection_varactor_derivative(c_var, circuit: VaractorCircuit) -> np.ndarray:
    """d(Gamma)/dC in 1/farad, by the chain rule through the circuit."""
    z, z_branch, z_patch = _varactor_impedance(c_var, circuit)
    c_var = np.asarray(c_var, dtype=float)
    z0 = circuit.free_space_impedance
    dzb_dc = 1j / (circuit.angular_frequency * c_var**2)
    dz_dzb = z_patch**2 / (z_patch + z_branch) ** 2
    dgamma_dz = 2.0 * z0 / (z + z0) ** 2
    return dgamma_dz * dz_dzb * dzb_dc


class IdealIrs:
    """Independent amplitude/phase control, ``theta = [A_1..A_S, phi_1..phi_S]``."""

    kind = "ideal"
    blocks = 2

    def __init__(self, elements: int, amplitude_bounds=(0.0, 1.0), phase_bounds=(-TWO_PI, TWO_PI)):
        self.elements = int(elements)
        self.amplitude_bounds = tuple(float(b) for b in amplitude_bounds)
        self.phase_bounds = tuple(float(b) for b in phase_bounds)
        s = self.elements
        self.box = ParameterBox(
            np.concatenate([np.full(s, self.amplitude_bounds[0]), np.full(s, self.phase_bounds[0])]),
            np.concatenate([np.full(s, self.amplitude_bounds[1]), np.full(s, self.phase_bounds[1])]),
        )

    @property
    def dim(self) -> int:
        return 2 * self.elements

    def split(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.dim:
            raise ValueError(f"theta has length {theta.shape[-1]}, expected {self.dim}")
        return theta[..., : self.elements], theta[..., self.elements:]

    def reflection(self, theta) -> np.ndarray:
        amplitude, phase = self.split(theta)
        return reflection_ideal(amplitude, phase)

    def reflection_derivative(self, theta) -> np.ndarray:
        """Shape ``(..., 2, S)``: d r_s / d A_s and d r_s / d phi_s."""
        amplitude, phase = self.split(theta)
        rotor = np.exp(1j * phase)
        return np.stack([rotor, 1j * amplitude * rotor], axis=-2)


class VaractorIrs:
    """Capacitance control through :func:`reflection_varactor`.

    ``theta`` is expressed in picofarads so that step sizes stay O(1).
    """

    kind = "varactor"
    blocks = 1
    unit = 1e-12

    def __init__(self, elements: int, circuit: VaractorCircuit | None = None, capacitance_bounds_pf=(0.2, 2.0)):
        self.elements = int(elements)
        self.circuit = circuit if circuit is not None else VaractorCircuit()
        lo, hi = (float(b) for b in capacitance_bounds_pf)
        if not 0 < lo <= hi:
            raise ValueError("capacitance bounds must satisfy 0 < C_min <= C_max")
        self.capacitance_bounds_pf = (lo, hi)
        self.box = ParameterBox(np.full(self.elements, lo), np.full(self.elements, hi))

    @property
    def dim(self) -> int:
        return self.elements

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.dim:
            raise ValueError(f"theta has length {theta.shape[-1]}, expected {self.dim}")
        return theta

    def reflection(self, theta) -> np.ndarray:
        return reflection_varactor(self._check(theta) * self.unit, self.circuit)

    def reflection_derivative(self, theta) -> np.ndarray:
        """Shape ``(..., 1, S)``: d Gamma / d C with C in picofarads."""
        theta = self._check(theta)
        d = reflection_varactor_derivative(theta * self.unit, self.circuit) * self.unit
        return d[..., None, :]


@dataclass
class IrsParameters:
    """A long-term decision vector tagged with the element law it drives."""

    kind: str
    values: np.ndarray
    circuit: VaractorCircuit | None = field(default=None)

    def __post_init__(self):
        if self.kind not in ("ideal", "varactor"):
            raise ValueError(f"unknown IRS kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=float)
