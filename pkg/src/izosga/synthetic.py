"""Affine test channels ``H(theta, omega) = A theta + b(omega)``.

For affine channels the two-point estimator is exactly unbiased for every
smoothing parameter and all Lipschitz constants are known in closed form,
which makes them the harness for estimator and convergence checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .irs import ParameterBox, project
from .utility import WeightedSumRate


@dataclass
class SyntheticScenario:
    tx_antennas: int
    users: int
    power_budget: float
    noise_vars: np.ndarray
    weights: np.ndarray

    @property
    def effective_dim(self) -> int:
        return self.tx_antennas * self.users


class AffineEnvironment:
    """Drop-in environment with ``H = A theta + b0 + spread * CN(0, I)``.

    ``A`` has shape ``(dim, K, M)``: slice ``A[i]`` is ``dH/dtheta_i``.
    """

    def __init__(self, A, b0, box: ParameterBox, spread: float = 0.0,
                 power_budget: float = 1.0, noise_vars=1.0, weights=1.0):
        self.A = np.asarray(A, dtype=complex)
        self.b0 = np.asarray(b0, dtype=complex)
        if self.A.shape[1:] != self.b0.shape:
            raise ValueError(f"A {self.A.shape} and b0 {self.b0.shape} disagree")
        if self.A.shape[0] != box.dim:
            raise ValueError("A's first axis must match the box dimension")
        k, m = self.b0.shape
        self.box = box
        self.spread = float(spread)
        self.scenario = SyntheticScenario(
            tx_antennas=m, users=k, power_budget=float(power_budget),
            noise_vars=np.broadcast_to(np.asarray(noise_vars, float), (k,)).copy(),
            weights=np.broadcast_to(np.asarray(weights, float), (k,)).copy(),
        )
        self.utility = WeightedSumRate(self.scenario.weights, self.scenario.noise_vars)

    @classmethod
    def random(cls, rng, dim: int, users: int = 1, antennas: int = 2, half_width: float = 1.0, **kwargs):
        shape = (dim, users, antennas)
        A = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2 * dim)
        b0 = (rng.standard_normal(shape[1:]) + 1j * rng.standard_normal(shape[1:])) / np.sqrt(2)
        box = ParameterBox(np.full(dim, -half_width), np.full(dim, half_width))
        return cls(A, b0, box, **kwargs)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def lipschitz(self) -> float:
        """Operator norm of ``theta -> A theta`` as a real-linear map into R^{2 M_U}."""
        flat = self.A.reshape(self.dim, -1)
        real = np.concatenate([flat.real, flat.imag], axis=1)
        return float(np.linalg.norm(real, 2))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        shape = self.b0.shape
        noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
        return self.b0 + self.spread * noise

    def channel(self, theta, realization) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.tensordot(theta, self.A, axes=([-1], [0])) + realization

    def theta_gradient(self, theta, realization, cog) -> np.ndarray:
        cog = np.asarray(cog)
        return 2.0 * np.real(np.einsum("ikm,...km->...i", self.A, cog))

    def channel_jacobian(self, theta, realization) -> np.ndarray:
        return self.A

    def project(self, theta) -> np.ndarray:
        return project(theta, self.box)


def concave_surrogate(seed: int = 1) -> AffineEnvironment:
    """Single-user affine channel on ``[-1, 1]^4``, noiseless.

    The sum rate is maximized at a vertex of the box, so projected ascent
    should settle there and the Moreau proxy should collapse.
    """
    return AffineEnvironment.random(np.random.default_rng(seed), 4, users=1, antennas=2,
                                    half_width=1.0, noise_vars=1.0)
