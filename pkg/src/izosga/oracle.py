"""Inexact second-stage solvers: budgeted WMMSE and a multistart reference.

All solvers accept channels of shape ``(..., K, M)`` and treat leading axes as
independent problems solved in lockstep.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .utility import precoder_gradient, sumrate

logger = logging.getLogger(__name__)

WEIGHT_CAP = 1e12
REGULARIZATION = 1e-12
MAX_HALVINGS = 100


class BisectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    """Stopping rules for WMMSE: an iteration cap and an optional value tolerance."""

    max_iterations: int
    value_tolerance: float | None = None

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations!r}")
        if self.value_tolerance is not None and self.value_tolerance < 0:
            raise ValueError("value_tolerance must be >= 0")


@dataclass
class OracleTrace:
    sumrate_per_iteration: np.ndarray  # (..., max_iterations); frozen entries repeat after a stop
    iterations_used: np.ndarray
    value_gap: np.ndarray | None = None

    @property
    def final_sumrate(self) -> np.ndarray:
        return self.sumrate_per_iteration[..., -1]


def matched_filter(H, power: float) -> np.ndarray:
    """``w_k ∝ h_k`` with a common scale so that ``sum ||w_k||^2 = power``."""
    H = np.asarray(H)
    norm = np.sqrt((np.abs(H) ** 2).sum(axis=(-2, -1), keepdims=True))
    norm = np.where(norm > 0, norm, 1.0)
    return H * (np.sqrt(power) / norm)


def _total_power(W):
    return (np.abs(W) ** 2).sum(axis=(-2, -1))


def _solve_multiplier(d, q, power, nu0=None):
    """Find ``nu >= 0`` with ``sum_i q_i / (d_i + nu)^2 = power`` where needed.

    Safeguarded Newton on ``1/sqrt(p(nu))`` (nearly linear in ``nu``) inside a
    shrinking bisection bracket. ``nu0`` is an optional starting guess.
    """
    shape = d.shape[:-1]
    active = (q / d**2).sum(axis=-1) > power
    if not active.any():
        return np.zeros(shape)
    lo = np.zeros(shape)
    hi = np.sqrt(q.sum(axis=-1) / power)
    nu = np.zeros(shape) if nu0 is None else np.clip(nu0, 0.0, hi)
    for _ in range(MAX_HALVINGS):
        inv = 1.0 / (d + nu[..., None])
        t2 = q * inv * inv
        p = t2.sum(axis=-1)
        dp = -2.0 * (t2 * inv).sum(axis=-1)
        todo = active & (np.abs(p - power) > 1e-13 * power) & (hi - lo > 1e-15 * hi)
        if not todo.any():
            return np.where(active, nu, 0.0)
        above = p > power
        lo = np.where(todo & above, nu, lo)
        hi = np.where(todo & ~above, nu, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = nu + 2.0 * p * (1.0 - np.sqrt(p / power)) / dp
        step = np.where((step > lo) & (step < hi), step, 0.5 * (lo + hi))
        nu = np.where(todo, step, nu)
    raise BisectionError("multiplier search did not converge after %d halvings" % MAX_HALVINGS)


def _precoder_update(H, u, lam, power, nu0=None):
    """Weighted-MMSE transmit update with the sum-power multiplier."""
    c = lam * np.abs(u) ** 2
    A = np.swapaxes(H, -1, -2) @ (c[..., :, None] * np.conj(H))
    A = 0.5 * (A + np.swapaxes(np.conj(A), -1, -2))
    B = (lam * np.conj(u))[..., :, None] * H  # rows: lambda_k conj(u_k) h_k
    d, E = np.linalg.eigh(A)
    scale = np.maximum(d[..., -1:], 1.0)
    singular = d[..., :1] <= REGULARIZATION * scale
    if np.any(singular):
        logger.debug("WMMSE system matrix singular; adding %g*I", REGULARIZATION)
        d = np.where(singular, np.maximum(d, 0.0) + REGULARIZATION, d)
    Bt = np.swapaxes(np.conj(E), -1, -2) @ np.swapaxes(B, -1, -2)  # (M, K) in eigenbasis
    q = (np.abs(Bt) ** 2).sum(axis=-1)
    nu = _solve_multiplier(d, q, power, nu0)
    Wt = E @ (Bt / (d + nu[..., None])[..., :, None])
    W = np.swapaxes(Wt, -1, -2)
    total = _total_power(W)
    over = total > power
    if np.any(over):
        W = W * np.where(over, np.sqrt(power / np.where(over, total, 1.0)), 1.0)[..., None, None]
    return W, nu


def wmmse(H, scenario, budget: OracleBudget, warm_start=None):
    """Run WMMSE for at most ``budget.max_iterations`` rounds.

    ``scenario`` supplies ``power_budget``, ``noise_vars`` and ``weights``.
    Starts from ``warm_start`` when given, else from scaled matched filters.
    Returns ``(W, OracleTrace)``.
    """
    H = np.asarray(H, dtype=complex)
    if not np.all(np.isfinite(H)):
        raise ValueError("channel contains non-finite entries")
    power = float(scenario.power_budget)
    noise = np.asarray(scenario.noise_vars, dtype=float)
    weights = np.asarray(scenario.weights, dtype=float)
    W = matched_filter(H, power) if warm_start is None else np.array(warm_start, dtype=complex)
    batch = H.shape[:-2]
    n = int(budget.max_iterations)
    rates = np.empty(batch + (n,))
    used = np.zeros(batch, dtype=int)
    active = np.ones(batch, dtype=bool)
    previous = sumrate(W, H, weights, noise)
    nu = None
    for it in range(n):
        a = np.conj(H) @ np.swapaxes(W, -1, -2)
        signal = np.diagonal(a, axis1=-2, axis2=-1)
        total = (np.abs(a) ** 2).sum(axis=-1) + noise
        u = signal / total
        e = np.real(1.0 - np.conj(u) * signal)
        lam = np.where(e > 1.0 / WEIGHT_CAP, weights / np.maximum(e, 1.0 / WEIGHT_CAP), weights * WEIGHT_CAP)
        W_new, nu = _precoder_update(H, u, lam, power, nu)
        W = np.where(active[..., None, None], W_new, W)
        current = sumrate(W, H, weights, noise)
        rates[..., it] = current
        used = used + active
        if budget.value_tolerance is not None:
            active = active & (current - previous >= budget.value_tolerance)
            if not np.any(active):
                rates[..., it + 1:] = current[..., None]
                break
        previous = current
    return W, OracleTrace(rates, used)


def reference_solve(H, scenario, restarts: int = 64, inner_steps: int = 2000, seed: int = 0):
    """Multistart projected gradient ascent on the sum rate over ``||W||^2 <= P``.

    Test oracle for small instances (``M*K <= 8``). Each restart follows the
    analytic ascent direction with a diminishing step that also backs off
    whenever a step fails to increase the value; the best iterate wins.
    """
    H = np.asarray(H, dtype=complex)
    power = float(scenario.power_budget)
    noise = np.asarray(scenario.noise_vars, dtype=float)
    weights = np.asarray(scenario.weights, dtype=float)
    rng = np.random.default_rng(seed)
    shape = (restarts,) + H.shape
    W = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    W[0] = H  # one matched-filter start
    W = W * np.sqrt(power / _total_power(W))[..., None, None]
    value = sumrate(W, H, weights, noise)
    best_W, best_value = W.copy(), value.copy()
    # initial step scaled to the problem: a fraction of the radius per unit gradient
    g = 2.0 * precoder_gradient(W, H, weights, noise)
    gnorm = np.sqrt(_total_power(g))
    base = 0.5 * np.sqrt(power) / np.maximum(gnorm, 1e-12)
    scale = np.ones(restarts)
    for t in range(inner_steps):
        step = base * scale / np.sqrt(1.0 + t / 50.0)
        cand = W + step[:, None, None] * g
        tp = _total_power(cand)
        cand = cand * np.where(tp > power, np.sqrt(power / tp), 1.0)[:, None, None]
        cand_value = sumrate(cand, H, weights, noise)
        ok = cand_value >= value
        W = np.where(ok[:, None, None], cand, W)
        value = np.where(ok, cand_value, value)
        scale = np.where(ok, np.minimum(scale * 1.2, 1.0), scale * 0.5)
        g = np.where(ok[:, None, None], 2.0 * precoder_gradient(W, H, weights, noise), g)
        better = value > best_value
        best_W = np.where(better[:, None, None], W, best_W)
        best_value = np.where(better, value, best_value)
    return best_W[int(np.argmax(best_value))]


def oracle_error_estimate(W_tilde, H, scenario, reference) -> np.ndarray:
    """Value gap ``max(0, F(reference) - F(W_tilde))``."""
    f_ref = sumrate(reference, H, scenario.weights, scenario.noise_vars)
    f_tilde = sumrate(W_tilde, H, scenario.weights, scenario.noise_vars)
    return np.maximum(0.0, f_ref - f_tilde)
