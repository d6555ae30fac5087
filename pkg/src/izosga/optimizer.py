"""Inexact-oracle zeroth-order projected stochastic gradient ascent (iZoSGA).

Runs are driven in lockstep: :func:`izosga_runs` advances several independent
runs (one per seed) together so the per-iteration numpy work is shared. Each
run owns its own random streams, derived from its seed alone.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, probe_pair
from .irs import ParameterBox, project
from .oracle import OracleBudget, oracle_error_estimate, wmmse
from .utility import cogradient
from .zograd import sample_gradient

logger = logging.getLogger(__name__)


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


def step_size_theorem3(delta_f: float, c2: float, rho: float, iterations: int) -> float:
    """``eta = sqrt(delta_f / (C2 * rho * (T + 1)))``."""
    if delta_f < 0 or c2 <= 0 or rho <= 0 or iterations < 0:
        raise ValueError("step_size_theorem3 needs delta_f >= 0, C2 > 0, rho > 0, T >= 0")
    return float(np.sqrt(delta_f / (c2 * rho * (iterations + 1))))


def smoothing_rule(effective_dim: int, iterations: int, constant: float = 1.0) -> float:
    """``mu = c / sqrt(M_U * (T + 1))``."""
    if effective_dim < 1 or iterations < 0 or constant <= 0:
        raise ValueError("smoothing_rule needs M_U >= 1, T >= 0, c > 0")
    return float(constant / np.sqrt(effective_dim * (iterations + 1)))


def normalize_schedule(schedule) -> tuple:
    """Coerce ``[(start, budget), ...]`` into sorted ``(int, OracleBudget)`` pairs.

    A bare int or :class:`OracleBudget` is a constant schedule.
    """
    if isinstance(schedule, (int, np.integer, OracleBudget)):
        schedule = [(0, schedule)]
    out = []
    for start, budget in schedule:
        if not isinstance(budget, OracleBudget):
            budget = OracleBudget(int(budget))
        out.append((int(start), budget))
    if not out:
        raise ValueError("budget schedule is empty")
    starts = [s for s, _ in out]
    if starts[0] != 0:
        raise ValueError("budget schedule must start at iteration 0")
    if any(b <= a for a, b in zip(starts, starts[1:])):
        raise ValueError("budget schedule must be strictly increasing in start iteration")
    return tuple(out)


def budget_schedule_eval(schedule, t: int) -> OracleBudget:
    """Budget of the last schedule entry whose start is ``<= t``."""
    schedule = normalize_schedule(schedule)
    current = schedule[0][1]
    for start, budget in schedule:
        if start > t:
            break
        current = budget
    return current


@dataclass
class OptimizerConfig:
    """Inputs of one iZoSGA run.

    ``step_size`` is a positive float or ``"theorem3"`` (needs ``theorem3``
    constants ``delta_f``, ``c2``, ``rho``); ``smoothing`` is a positive float
    or ``"inverse-sqrt-MT"``.
    """

    iterations: int
    step_size: float | str = 0.1
    smoothing: float | str = 1e-3
    budget_schedule: tuple = ((0, OracleBudget(20)),)
    warm_start: bool = True
    seed: int = 0
    smoothing_constant: float = 1.0
    theorem3: dict | None = None
    directions_per_step: int = 1
    error_every: int = 0
    reference_iterations: int = 100
    snapshot_every: int = 0

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ValueError("iterations must be a nonnegative integer")
        self.budget_schedule = normalize_schedule(self.budget_schedule)
        if isinstance(self.step_size, str):
            if self.step_size != "theorem3":
                raise ValueError(f"unknown step-size rule {self.step_size!r}")
            if not self.theorem3 or not {"delta_f", "c2", "rho"} <= set(self.theorem3):
                raise ValueError("step_size='theorem3' needs theorem3={'delta_f','c2','rho'}")
        elif not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if isinstance(self.smoothing, str):
            if self.smoothing != "inverse-sqrt-MT":
                raise ValueError(f"unknown smoothing rule {self.smoothing!r}")
        elif not self.smoothing > 0:
            raise ValueError("smoothing must be > 0")
        if self.directions_per_step < 1:
            raise ValueError("directions_per_step must be >= 1")

    def resolved_step_size(self) -> float:
        if self.step_size == "theorem3":
            c = self.theorem3
            return step_size_theorem3(c["delta_f"], c["c2"], c["rho"], self.iterations)
        return float(self.step_size)

    def resolved_smoothing(self, effective_dim: int) -> float:
        if self.smoothing == "inverse-sqrt-MT":
            return smoothing_rule(effective_dim, self.iterations, self.smoothing_constant)
        return float(self.smoothing)


@dataclass
class DiagnosticsReport:
    empirical_BF: float = 0.0
    empirical_LH0: float = 0.0
    mean_sq_grad: float = 0.0
    lemma3_bound: float = 0.0
    eps_bar: float = float("nan")
    moreau_proxy_curve: list | None = None
    dim: int = 0


@dataclass
class RunResult:
    seed: int
    sumrate_curve: np.ndarray
    budget_curve: np.ndarray
    returned_theta: np.ndarray
    final_theta: np.ndarray
    selected_iteration: int
    diagnostics: DiagnosticsReport
    error_curve: np.ndarray | None = None
    theta_trace: list = field(default_factory=list)
    failure: str | None = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


def lemma3_bound(bf: float, lh0: float, dim: int) -> float:
    """``4 B_F^2 L_{H,0}^2 (S^2 + 2S)`` with ``S`` the parameter dimension."""
    return 4.0 * bf**2 * lh0**2 * (dim**2 + 2 * dim)


def lemma3_check(run: RunResult):
    """Second-moment bound from the run's empirical constants, and whether it holds."""
    d = run.diagnostics
    bound = lemma3_bound(d.empirical_BF, d.empirical_LH0, d.dim)
    return bound, bool(d.mean_sq_grad <= bound)


def run_streams(seed: int) -> dict:
    """Independent generators for initialization, channels, directions and t*."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("init", "channel", "direction", "select")
    return {n: np.random.Generator(np.random.PCG64(c)) for n, c in zip(names, children)}


def stack_realizations(realizations):
    realizations = list(realizations)
    if isinstance(realizations[0], ChannelRealization):
        return ChannelRealization.stack(realizations)
    return np.stack(realizations)


def _sample_batch(env, rngs):
    return stack_realizations(env.sample(r) for r in rngs)


def izosga_run(env, config: OptimizerConfig, theta0=None) -> RunResult:
    """Single run with seed ``config.seed``; raises on a non-finite gradient."""
    return izosga_runs(env, config, [config.seed], None if theta0 is None else [theta0])[0]


def izosga_runs(env, config: OptimizerConfig, seeds, theta0=None, on_failure: str = "raise") -> list:
    """Advance one iZoSGA run per seed in lockstep.

    For ``t = 0..T``: draw ``omega_t``, compose ``H(theta_t)``, call the
    budgeted oracle, probe ``theta_t +- mu U_t``, build ``D_t`` and step
    ``theta_{t+1} = proj(theta_t + eta D_t)``. Returns ``theta_{t*}`` with
    ``t*`` uniform on ``{0..T}`` plus traces and diagnostics.

    ``theta0`` is one vector per seed; when omitted each run starts from a
    uniform draw in the box. ``on_failure='drop'`` freezes a run whose
    gradient turns non-finite and reports it through ``RunResult.failure``.
    """
    seeds = [int(s) for s in seeds]
    n = len(seeds)
    streams = [run_streams(s) for s in seeds]
    box: ParameterBox = env.box
    T = int(config.iterations)
    scenario = env.scenario
    utility = env.utility
    eta = config.resolved_step_size()
    mu = config.resolved_smoothing(scenario.tx_antennas * scenario.users)
    dim = env.dim

    if theta0 is None:
        theta = np.stack([box.uniform(s["init"]) for s in streams])
    else:
        theta = np.asarray(theta0, dtype=float).reshape(n, dim)
    theta = project(theta, box)
    t_star = np.array([s["select"].integers(0, T + 1) for s in streams])
    returned = theta.copy()
    chan_rngs = [s["channel"] for s in streams]
    dir_rngs = [s["direction"] for s in streams]

    sumrates = np.empty((n, T + 1))
    budgets = np.empty(T + 1, dtype=int)
    errors = np.full((n, T + 1), np.nan) if config.error_every > 0 else None
    traces = [[] for _ in range(n)]
    bf = np.zeros(n)
    lh0 = np.zeros(n)
    sq_sum = np.zeros(n)
    failures = [None] * n
    alive = np.ones(n, dtype=bool)
    W_prev = None

    for t in range(T + 1):
        budget = budget_schedule_eval(config.budget_schedule, t)
        budgets[t] = budget.max_iterations
        omega = _sample_batch(env, chan_rngs)
        H = env.channel(theta, omega)
        warm = W_prev if (config.warm_start and W_prev is not None) else None
        W, trace = wmmse(H, scenario, budget, warm_start=warm)
        W_prev = W
        sumrates[:, t] = utility.value(W, H)
        if errors is not None and t % config.error_every == 0:
            ref, _ = wmmse(H, scenario, OracleBudget(config.reference_iterations), warm_start=W)
            errors[:, t] = oracle_error_estimate(W, H, scenario, ref)
        g = utility.cogradient(W, H)
        D = np.zeros_like(theta)
        for _ in range(config.directions_per_step):
            u = np.stack([r.standard_normal(dim) for r in dir_rngs])
            h_plus, h_minus = probe_pair(env, omega, theta, u, mu)
            delta = h_plus - h_minus
            D += sample_gradient(delta, u, mu, g)
            unorm = np.linalg.norm(u, axis=-1)
            secant = np.sqrt((np.abs(delta) ** 2).sum(axis=(-2, -1))) / (2 * mu * np.where(unorm > 0, unorm, 1.0))
            lh0 = np.where(alive, np.maximum(lh0, secant), lh0)
        D /= config.directions_per_step
        gnorm = np.sqrt((np.abs(g) ** 2).sum(axis=(-2, -1)))
        bf = np.where(alive, np.maximum(bf, gnorm), bf)
        bad = alive & ~np.all(np.isfinite(D), axis=-1)
        if np.any(bad):
            for i in np.flatnonzero(bad):
                dump = {
                    "seed": seeds[i], "iteration": t, "theta_norm": float(np.linalg.norm(theta[i])),
                    "cogradient_norm": float(gnorm[i]), "sumrate": float(sumrates[i, t]),
                    "channel_finite": bool(np.all(np.isfinite(H[i]))),
                }
                msg = f"non-finite sample gradient at iteration {t} (seed {seeds[i]}): {dump}"
                if on_failure == "raise":
                    raise NonFiniteGradientError(msg, dump)
                logger.error(msg)
                failures[i] = msg
            alive &= ~bad
            D = np.where(alive[:, None], D, 0.0)
        sq_sum += np.where(alive, (D**2).sum(axis=-1), 0.0)
        if config.snapshot_every and t % config.snapshot_every == 0:
            for i in range(n):
                traces[i].append((t, theta[i].copy()))
        hit = t_star == t
        returned[hit] = theta[hit]
        theta = np.where(alive[:, None], project(theta + eta * D, box), theta)
        if not np.all(box.contains(theta)):
            raise AssertionError("iterate left the feasible box")

    results = []
    for i in range(n):
        diag = DiagnosticsReport(
            empirical_BF=float(bf[i]),
            empirical_LH0=float(lh0[i]),
            mean_sq_grad=float(sq_sum[i] / (T + 1)),
            eps_bar=float(np.nanmean(errors[i])) if errors is not None else float("nan"),
            dim=dim,
        )
        diag.lemma3_bound = lemma3_bound(diag.empirical_BF, diag.empirical_LH0, dim)
        results.append(RunResult(
            seed=seeds[i],
            sumrate_curve=sumrates[i],
            budget_curve=budgets.copy(),
            returned_theta=returned[i],
            final_theta=theta[i],
            selected_iteration=int(t_star[i]),
            diagnostics=diag,
            error_curve=None if errors is None else errors[i],
            theta_trace=traces[i],
            failure=failures[i],
        ))
    return results


def evaluate_fixed(env, thetas, schedule, iterations: int, seeds, warm_start: bool = False) -> np.ndarray:
    """Sum-rate curves with ``theta`` frozen: only the oracle runs each iteration.

    Used for the random-IRS baseline and for deploying trained parameters.
    Returns an array of shape ``(len(seeds), iterations + 1)``.
    """
    schedule = normalize_schedule(schedule)
    seeds = [int(s) for s in seeds]
    rngs = [run_streams(s)["channel"] for s in seeds]
    theta = project(np.asarray(thetas, dtype=float).reshape(len(seeds), env.dim), env.box)
    out = np.empty((len(seeds), iterations + 1))
    W_prev = None
    for t in range(iterations + 1):
        budget = budget_schedule_eval(schedule, t)
        omega = _sample_batch(env, rngs)
        H = env.channel(theta, omega)
        W, _ = wmmse(H, env.scenario, budget, warm_start=W_prev if warm_start else None)
        W_prev = W
        out[:, t] = env.utility.value(W, H)
    return out


def random_thetas(env, seeds) -> np.ndarray:
    """One uniform draw in the box per seed, from each seed's init stream."""
    return np.stack([env.box.uniform(run_streams(int(s))["init"]) for s in seeds])


def moreau_gradient_proxy(theta, rho_bar: float, objective, box: ParameterBox,
                          inner_steps: int = 500, step: float | None = None, tol: float = 1e-12) -> float:
    """Estimate ``rho_bar * ||theta - prox(theta)||`` for the maximization of ``f``.

    ``objective(u)`` returns ``(f(u), grad f(u))``. The proximal point
    minimizes ``-f(u) + rho_bar/2 ||u - theta||^2`` over the box by projected
    gradient descent with backtracking.
    """
    if not rho_bar > 0:
        raise ValueError("rho_bar must be positive")
    theta = project(np.asarray(theta, dtype=float), box)

    def psi(u):
        value, grad = objective(u)
        diff = u - theta
        return -value + 0.5 * rho_bar * diff @ diff, -grad + rho_bar * diff

    lr = step if step is not None else 1.0 / rho_bar
    u = theta.copy()
    val, grad = psi(u)
    for _ in range(inner_steps):
        while True:
            cand = project(u - lr * grad, box)
            cval, cgrad = psi(cand)
            move = cand - u
            if cval <= val + grad @ move + 0.5 / lr * move @ move or lr < 1e-14:
                break
            lr *= 0.5
        done = np.linalg.norm(move) <= tol * (1 + np.linalg.norm(u))
        u, val, grad = cand, cval, cgrad
        lr *= 1.5
        if done:
            break
    return float(rho_bar * np.linalg.norm(theta - u))


def sample_average_objective(env, samples: int, budget, seed: int = 0):
    """``u -> (f_hat(u), grad f_hat(u))`` over ``samples`` fixed realizations.

    The oracle output at each realization is held fixed when differentiating,
    so the gradient is ``mean grad_theta F(W_tilde, H(u, omega_i))``.
    """
    budget = budget if isinstance(budget, OracleBudget) else OracleBudget(int(budget))
    rng = np.random.default_rng(seed)
    omega = stack_realizations(env.sample(rng) for _ in range(samples))

    def objective(u):
        u_b = np.broadcast_to(u, (samples, u.size))
        H = env.channel(u_b, omega)
        W, _ = wmmse(H, env.scenario, budget)
        g = cogradient(W, H, env.scenario.weights, env.scenario.noise_vars)
        value = env.utility.value(W, H).mean()
        grad = env.theta_gradient(u_b, omega, g).mean(axis=0)
        return float(value), grad

    return objective


def moreau_gradient_proxy_env(env, theta, rho_bar: float, samples: int = 16, inner_steps: int = 200,
                              budget=20, seed: int = 0) -> float:
    """Moreau-envelope stationarity proxy of the two-stage objective at ``theta``."""
    objective = sample_average_objective(env, samples, budget, seed)
    return moreau_gradient_proxy(theta, rho_bar, objective, env.box, inner_steps)
