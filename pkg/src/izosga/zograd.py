"""Two-point zeroth-order sample gradient through the channel.

Given the channel difference ``delta = H(theta + mu u) - H(theta - mu u)`` and
the cogradient ``g`` of the utility at ``H(theta)``::

    D = (1/mu) * u * ( Re(delta) . Re(g) + Im(delta) . Re(j g) )
      = (1/mu) * u * Re( sum(delta * g) )

which is unbiased for the gradient of the Gaussian-smoothed composition.
"""
from __future__ import annotations

import numpy as np


def sample_direction(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Standard normal probing direction."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return rng.standard_normal(dim)


def sample_gradient(delta, u, mu: float, cog) -> np.ndarray:
    """Rank-one estimate ``D_mu`` from a channel difference and a cogradient.

    ``delta`` and ``cog`` share shape ``(..., K, M)`` (or any common trailing
    shape that flattens to C^{M_U}); ``u`` has shape ``(..., dim)``.
    """
    if not mu > 0:
        raise ValueError(f"smoothing parameter must be positive, got {mu}")
    delta = np.asarray(delta)
    cog = np.asarray(cog)
    if delta.shape != cog.shape:
        raise ValueError(f"channel difference {delta.shape} and cogradient {cog.shape} differ")
    u = np.asarray(u, dtype=float)
    axes = tuple(range(u.ndim - 1, delta.ndim))
    coupling = delta.real * cog.real + delta.imag * np.real(1j * cog)
    return (coupling.sum(axis=axes) / mu)[..., None] * u
