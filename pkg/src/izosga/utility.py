"""Weighted sum-rate utility, per-user SINR and its Wirtinger cogradient.

Conventions
-----------
Channels and precoders are complex arrays of shape ``(..., K, M)``: row ``k``
is ``h_k`` (resp. ``w_k``). Flattening the last two axes gives the user-major
stacked vector in C^{M*K}. Any number of leading batch axes is allowed.

The cogradient is the Wirtinger derivative ``dF/dz`` taken with ``conj(z)``
held constant, so for real ``F`` and ``z = x + j y``::

    dF/dx = 2 Re(g),   dF/dy = 2 Re(j g)
"""
from __future__ import annotations

import numpy as np

LN2 = np.log(2.0)


def _check_noise(noise_vars):
    noise_vars = np.asarray(noise_vars, dtype=float)
    if np.any(noise_vars <= 0):
        raise ValueError("noise variances must be positive")
    return noise_vars


def cross_gains(W, H) -> np.ndarray:
    """``a[..., k, j] = h_k^H w_j``."""
    W = np.asarray(W)
    H = np.asarray(H)
    if W.shape[-2:] != H.shape[-2:]:
        raise ValueError(f"precoder shape {W.shape} does not match channel shape {H.shape}")
    return np.conj(H) @ np.swapaxes(W, -1, -2)


def _powers(W, H, noise_vars):
    a = cross_gains(W, H)
    p = np.abs(a) ** 2
    signal = np.diagonal(p, axis1=-2, axis2=-1)
    interference = p.sum(axis=-1) - signal
    return a, signal, interference + noise_vars


def sinr(W, H, noise_vars, k=None) -> np.ndarray:
    """Per-user SINR ``|h_k^H w_k|^2 / (sum_{j!=k} |h_k^H w_j|^2 + sigma_k^2)``.

    Returns all users, or only user ``k`` when given.
    """
    noise_vars = _check_noise(noise_vars)
    _, signal, denom = _powers(W, H, noise_vars)
    out = signal / denom
    return out if k is None else out[..., k]


def sumrate(W, H, weights, noise_vars) -> np.ndarray:
    """Weighted sum rate in bits: ``sum_k alpha_k log2(1 + SINR_k)``."""
    weights = np.asarray(weights, dtype=float)
    return (weights * np.log2(1.0 + sinr(W, H, noise_vars))).sum(axis=-1)


def cogradient(W, H, weights, noise_vars) -> np.ndarray:
    """Wirtinger cogradient of the weighted sum rate with respect to ``H``.

    With ``a_kj = h_k^H w_j``, ``I_k`` the interference and ``S_k`` the total
    received power plus noise::

        g_k = alpha_k/ln2 * [ sum_j a_kj conj(w_j) / S_k
                              - sum_{j!=k} a_kj conj(w_j) / (I_k + sigma_k^2) ]
    """
    noise_vars = _check_noise(noise_vars)
    weights = np.asarray(weights, dtype=float)
    W = np.asarray(W)
    a, signal, denom = _powers(W, H, noise_vars)
    total = denom + signal
    a_off = a * (1.0 - np.eye(a.shape[-1]))
    wc = np.conj(W)
    full = (a @ wc) / total[..., None]
    cross = (a_off @ wc) / denom[..., None]
    return (weights / LN2)[..., None] * (full - cross)


def precoder_gradient(W, H, weights, noise_vars) -> np.ndarray:
    """Conjugate cogradient ``dF/d conj(W)``; the real ascent direction is twice this."""
    noise_vars = _check_noise(noise_vars)
    weights = np.asarray(weights, dtype=float)
    H = np.asarray(H)
    a, signal, denom = _powers(W, H, noise_vars)
    total = denom + signal
    c_full = (weights / LN2) / total
    c_cross = (weights / LN2) / denom
    coef = a * c_full[..., :, None] - a * (1.0 - np.eye(a.shape[-1])) * c_cross[..., :, None]
    # coef[k, j] multiplies h_k in dF/d conj(w_j)
    return np.swapaxes(coef, -1, -2) @ H


def compositional_gradient(jacobian, cog) -> np.ndarray:
    """Real gradient of ``theta -> F(W, H(theta))`` from a channel Jacobian.

    ``jacobian`` has shape ``(n_theta, K, M)`` (derivative of ``H`` with respect
    to each coordinate of ``theta``) and ``cog`` shape ``(K, M)``. Assembles
    ``2 grad Re(H) Re(g) + 2 grad Im(H) Re(j g)`` term by term.
    """
    jac = np.asarray(jacobian).reshape(np.shape(jacobian)[0], -1)
    g = np.asarray(cog).reshape(-1)
    return 2.0 * jac.real @ g.real + 2.0 * jac.imag @ np.real(1j * g)


class WeightedSumRate:
    """Value/cogradient pair for the weighted sum rate.

    Any object exposing ``value(W, H)`` and ``cogradient(W, H)`` with the same
    shapes can stand in for this one.
    """

    def __init__(self, weights, noise_vars):
        self.weights = np.asarray(weights, dtype=float)
        self.noise_vars = _check_noise(noise_vars)

    def value(self, W, H):
        return sumrate(W, H, self.weights, self.noise_vars)

    def cogradient(self, W, H):
        return cogradient(W, H, self.weights, self.noise_vars)
