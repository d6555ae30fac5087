"""MISO downlink channel with an IRS: Rician draws and effective-channel composition.

Every link is::

    sqrt(gain) * ( sqrt(kappa/(1+kappa)) * LoS + sqrt(1/(1+kappa)) * CN(0, 1) )

where the LoS parts are unit-modulus phase ramps fixed by the scenario's
``geometry_seed``. The effective channel of user ``k`` is

    h_k = G^H Diag(r) h_{r,k} + h_{d,k}

stacked row-wise into a ``(K, M)`` array (user-major when flattened).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .irs import IdealIrs, ParameterBox, VaractorIrs, project
from .utility import WeightedSumRate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkStats:
    gain: float = 1.0
    rician_factor: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """Static description of the downlink.

    ``noise_vars`` and ``weights`` accept a scalar (broadcast to all users) or
    a length-K sequence.
    """

    tx_antennas: int
    users: int
    irs_elements: int
    power_budget: float
    noise_vars: np.ndarray
    weights: np.ndarray
    direct: LinkStats = LinkStats()
    tx_irs: LinkStats = LinkStats()
    irs_user: LinkStats = LinkStats()
    geometry_seed: int = 0
    irs_correlation: float = 0.0
    los: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        errors = []
        for name in ("tx_antennas", "users", "irs_elements"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                errors.append(f"{name} must be a positive integer, got {value!r}")
        k = int(self.users) if self.users >= 1 else 1
        noise = np.broadcast_to(np.asarray(self.noise_vars, dtype=float), (k,)).copy() \
            if np.ndim(self.noise_vars) == 0 else np.asarray(self.noise_vars, dtype=float)
        weights = np.broadcast_to(np.asarray(self.weights, dtype=float), (k,)).copy() \
            if np.ndim(self.weights) == 0 else np.asarray(self.weights, dtype=float)
        if noise.shape != (k,):
            errors.append(f"noise_vars must have length {k}, got {noise.size}")
        elif np.any(~np.isfinite(noise)) or np.any(noise <= 0):
            errors.append("noise_vars must be finite and > 0")
        if weights.shape != (k,):
            errors.append(f"weights must have length {k}, got {weights.size}")
        elif np.any(~np.isfinite(weights)) or np.any(weights < 0):
            errors.append("weights must be finite and >= 0")
        if not (np.isfinite(self.power_budget) and self.power_budget > 0):
            errors.append("power_budget must be finite and > 0")
        for name in ("direct", "tx_irs", "irs_user"):
            link = getattr(self, name)
            if not (np.isfinite(link.gain) and link.gain >= 0):
                errors.append(f"{name}.gain must be finite and >= 0")
            if not (np.isfinite(link.rician_factor) and link.rician_factor >= 0):
                errors.append(f"{name}.rician_factor must be finite and >= 0")
        if not 0 <= self.irs_correlation < 1:
            errors.append("irs_correlation must lie in [0, 1)")
        if errors:
            raise ValueError("invalid scenario: " + "; ".join(errors))
        object.__setattr__(self, "noise_vars", noise)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "los", _los_components(self))

    @property
    def effective_dim(self) -> int:
        return self.tx_antennas * self.users

    @property
    def utility(self) -> WeightedSumRate:
        return WeightedSumRate(self.weights, self.noise_vars)


def _ramp(n: int, angle: float) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def _los_components(scenario: Scenario) -> dict:
    # half-wavelength linear arrays; angles drawn once from the geometry seed
    rng = np.random.default_rng(scenario.geometry_seed)
    m, k, s = scenario.tx_antennas, scenario.users, scenario.irs_elements
    depart, arrive = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
    user_irs = rng.uniform(-np.pi / 2, np.pi / 2, size=k)
    user_tx = rng.uniform(-np.pi / 2, np.pi / 2, size=k)
    return {
        "G": np.outer(_ramp(s, arrive), _ramp(m, depart)),
        "h_r": np.stack([_ramp(s, a) for a in user_irs]),
        "h_d": np.stack([_ramp(m, a) for a in user_tx]),
    }


@dataclass
class ChannelRealization:
    """One draw of the hidden state: ``G`` (S, M), ``h_r`` (K, S), ``h_d`` (K, M).

    Arrays may carry identical leading batch axes.
    """

    G: np.ndarray
    h_r: np.ndarray
    h_d: np.ndarray

    @classmethod
    def stack(cls, realizations) -> "ChannelRealization":
        realizations = list(realizations)
        return cls(*(np.stack([getattr(r, f) for r in realizations]) for f in ("G", "h_r", "h_d")))

    def __getitem__(self, index) -> "ChannelRealization":
        return ChannelRealization(self.G[index], self.h_r[index], self.h_d[index])


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _exp_corr_factor(n: int, rho: float) -> np.ndarray:
    idx = np.arange(n)
    return np.linalg.cholesky(rho ** np.abs(idx[:, None] - idx[None, :]))


def _rician(rng, los, link: LinkStats, corr_axis=None, corr_factor=None):
    kappa = link.rician_factor
    scattered = _cn(rng, los.shape)
    if corr_factor is not None:
        scattered = np.moveaxis(corr_factor @ np.moveaxis(scattered, corr_axis, -2), -2, corr_axis)
    if np.isinf(kappa):
        mix = los
    else:
        mix = np.sqrt(kappa / (1 + kappa)) * los + np.sqrt(1 / (1 + kappa)) * scattered
    return np.sqrt(link.gain) * mix


def sample_realization(scenario: Scenario, rng: np.random.Generator) -> ChannelRealization:
    """Draw ``G``, ``h_r`` and ``h_d`` (in that order) from ``rng``."""
    los = scenario.los
    corr = None
    if scenario.irs_correlation > 0:
        corr = _exp_corr_factor(scenario.irs_elements, scenario.irs_correlation)
    G = _rician(rng, los["G"], scenario.tx_irs, corr_axis=0, corr_factor=corr)
    h_r = _rician(rng, los["h_r"], scenario.irs_user, corr_axis=1, corr_factor=corr)
    h_d = _rician(rng, los["h_d"], scenario.direct)
    return ChannelRealization(G, h_r, h_d)


def effective_channel(realization: ChannelRealization, reflection) -> np.ndarray:
    """``h_k = G^H Diag(reflection) h_{r,k} + h_{d,k}`` for all users, shape (..., K, M)."""
    reflection = np.asarray(reflection)
    G, h_r, h_d = realization.G, realization.h_r, realization.h_d
    s = G.shape[-2]
    if reflection.shape[-1] != s or h_r.shape[-1] != s:
        raise ValueError(
            f"dimension mismatch: reflection {reflection.shape}, G {G.shape}, h_r {h_r.shape}"
        )
    if h_d.shape[-1] != G.shape[-1] or h_d.shape[-2] != h_r.shape[-2]:
        raise ValueError(f"dimension mismatch: h_d {h_d.shape} vs G {G.shape}, h_r {h_r.shape}")
    return h_d + (h_r * reflection[..., None, :]) @ np.conj(G)


class IrsEnvironment:
    """Couples a :class:`Scenario` with an IRS element law.

    This is the black box the optimizer interacts with: it draws realizations,
    composes effective channels for any ``theta``, and (for diagnostics only)
    returns the exact compositional gradient.
    """

    def __init__(self, scenario: Scenario, irs):
        if irs.elements != scenario.irs_elements:
            raise ValueError("IRS model size does not match scenario.irs_elements")
        self.scenario = scenario
        self.irs = irs
        self.utility = scenario.utility

    @property
    def dim(self) -> int:
        return self.irs.dim

    @property
    def box(self) -> ParameterBox:
        return self.irs.box

    def sample(self, rng: np.random.Generator) -> ChannelRealization:
        return sample_realization(self.scenario, rng)

    def channel(self, theta, realization: ChannelRealization) -> np.ndarray:
        return effective_channel(realization, self.irs.reflection(theta))

    def theta_gradient(self, theta, realization: ChannelRealization, cog) -> np.ndarray:
        """Exact ``grad_theta F`` given the cogradient ``cog`` at ``H(theta)``.

        Since every coordinate drives one element, ``2 Re(sum g * dH/dtheta)``
        reduces to ``2 Re(dr_s * c_s)`` with ``c_s = sum_k h_r[k,s] g_k^T conj(G[s])``.
        """
        c = ((np.asarray(cog) @ np.swapaxes(np.conj(realization.G), -1, -2)) * realization.h_r).sum(axis=-2)
        dr = self.irs.reflection_derivative(theta)
        grad = 2.0 * np.real(dr * c[..., None, :])
        return grad.reshape(grad.shape[:-2] + (-1,))

    def channel_jacobian(self, theta, realization: ChannelRealization) -> np.ndarray:
        """Dense ``dH/dtheta`` of shape ``(dim, K, M)`` for a single realization."""
        dr = self.irs.reflection_derivative(theta)  # (blocks, S)
        cascade = realization.h_r.T[:, :, None] * np.conj(realization.G)[:, None, :]  # (S, K, M)
        jac = dr[:, :, None, None] * cascade[None]
        return jac.reshape((-1,) + cascade.shape[1:])

    def project(self, theta) -> np.ndarray:
        return project(theta, self.box)


def probe_pair(env, realization, theta, u, mu):
    """Channels at ``theta + mu*u`` and ``theta - mu*u`` on the same realization.

    Probe points are not projected onto the box.
    """
    if not mu > 0:
        raise ValueError(f"smoothing parameter must be positive, got {mu}")
    theta = np.asarray(theta, dtype=float)
    step = mu * np.asarray(u, dtype=float)
    return env.channel(theta + step, realization), env.channel(theta - step, realization)


def make_irs(kind: str, elements: int, **kwargs):
    if kind == "ideal":
        return IdealIrs(elements, **kwargs)
    if kind == "varactor":
        return VaractorIrs(elements, **kwargs)
    raise ValueError(f"unknown IRS kind {kind!r}")
