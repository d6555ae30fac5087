"""Invariant and diagnostic checks behind ``izosga check``.

Each check returns a :class:`CheckResult`; the quick defaults take seconds,
``full=True`` uses the sample counts of the acceptance suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import IrsEnvironment, LinkStats, Scenario, probe_pair
from .irs import IdealIrs, ParameterBox, VaractorCircuit, project, reflection_varactor
from .oracle import OracleBudget, reference_solve, wmmse
from .optimizer import lemma3_bound, moreau_gradient_proxy
from .synthetic import AffineEnvironment
from .utility import cogradient, sumrate
from .zograd import sample_gradient


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    value: float = float("nan")


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def small_environment(seed: int, antennas: int = 3, users: int = 3, elements: int = 6) -> IrsEnvironment:
    scenario = Scenario(antennas, users, elements, power_budget=1.0, noise_vars=0.5, weights=1.0,
                        direct=LinkStats(1.0, 1.0), tx_irs=LinkStats(1.0, 2.0), irs_user=LinkStats(1.0, 0.0),
                        geometry_seed=seed)
    return IrsEnvironment(scenario, IdealIrs(elements))


def gradient_fd_error(instances: int = 100, seed: int = 0, h: float = 1e-6) -> float:
    """Worst relative error of the assembled theta-gradient against central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        env = small_environment(int(rng.integers(2**31)))
        omega = env.sample(rng)
        box = env.box
        # stay inside the box so both difference points are feasible
        theta = box.lower + (box.upper - box.lower) * rng.uniform(0.1, 0.9, env.dim)
        sc = env.scenario
        W = _cn(rng, (sc.users, sc.tx_antennas))
        W *= np.sqrt(sc.power_budget / np.sum(np.abs(W) ** 2))

        def f(th):
            return float(sumrate(W, env.channel(th, omega), sc.weights, sc.noise_vars))

        g = cogradient(W, env.channel(theta, omega), sc.weights, sc.noise_vars)
        analytic = env.theta_gradient(theta, omega, g)
        eye = np.eye(env.dim) * h
        numeric = np.array([(f(theta + e) - f(theta - e)) / (2 * h) for e in eye])
        err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-300)
        worst = max(worst, err)
    return worst


def estimator_statistics(samples: int = 100_000, seed: int = 0, dim: int = 6, mu: float = 0.05):
    """Sample gradients on a fixed affine channel.

    Returns ``(mean, standard_error, exact, mean_sq_norm, bound)``.
    """
    rng = np.random.default_rng(seed)
    env = AffineEnvironment.random(rng, dim, users=2, antennas=2, noise_vars=0.5)
    theta = env.box.uniform(rng) * 0.5
    omega = env.sample(rng)
    H = env.channel(theta, omega)
    W, _ = wmmse(H, env.scenario, OracleBudget(20))
    g = cogradient(W, H, env.scenario.weights, env.scenario.noise_vars)
    exact = env.theta_gradient(theta, omega, g)
    total = np.zeros(dim)
    total_sq = np.zeros(dim)
    norm_sq = 0.0
    chunk = 10_000
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        u = rng.standard_normal((n, dim))
        h_plus, h_minus = probe_pair(env, omega, np.broadcast_to(theta, (n, dim)), u, mu)
        D = sample_gradient(h_plus - h_minus, u, mu, np.broadcast_to(g, h_plus.shape))
        total += D.sum(axis=0)
        total_sq += (D**2).sum(axis=0)
        norm_sq += (D**2).sum()
        done += n
    mean = total / samples
    var = total_sq / samples - mean**2
    se = np.sqrt(var / samples)
    bf = float(np.sqrt(np.sum(np.abs(g) ** 2)))
    bound = lemma3_bound(bf, env.lipschitz, dim)
    return mean, se, exact, norm_sq / samples, bound


def wmmse_monotone_violations(instances: int = 100, seed: int = 0, iterations: int = 50) -> int:
    rng = np.random.default_rng(seed)
    scenario = Scenario(2, 2, 1, power_budget=1.0, noise_vars=0.1, weights=1.0)
    H = _cn(rng, (instances, 2, 2))
    _, trace = wmmse(H, scenario, OracleBudget(iterations))
    steps = np.diff(trace.sumrate_per_iteration, axis=-1)
    return int(np.sum(np.any(steps < -1e-9, axis=-1)))


def single_user_error(instances: int = 100, seed: int = 0) -> float:
    """Relative gap to ``log2(1 + P ||h||^2 / sigma^2)`` for K = 1."""
    rng = np.random.default_rng(seed)
    scenario = Scenario(4, 1, 1, power_budget=2.0, noise_vars=0.3, weights=1.0)
    H = _cn(rng, (instances, 1, 4))
    W, _ = wmmse(H, scenario, OracleBudget(5))
    got = sumrate(W, H, scenario.weights, scenario.noise_vars)
    want = np.log2(1 + scenario.power_budget * np.sum(np.abs(H) ** 2, axis=(-2, -1)) / scenario.noise_vars[0])
    return float(np.max(np.abs(got - want) / want))


def oracle_quality(instances: int = 100, seed: int = 0, noise: float = 0.1, restarts: int = 64,
                   inner_steps: int = 2000):
    """Relative shortfall of 50 WMMSE iterations against the multistart reference, per instance."""
    rng = np.random.default_rng(seed)
    scenario = Scenario(2, 2, 1, power_budget=1.0, noise_vars=noise, weights=1.0)
    H = _cn(rng, (instances, 2, 2))
    W, _ = wmmse(H, scenario, OracleBudget(50))
    f_w = sumrate(W, H, scenario.weights, scenario.noise_vars)
    f_ref = np.array([
        sumrate(reference_solve(H[i], scenario, restarts, inner_steps, seed=i), H[i],
                scenario.weights, scenario.noise_vars)
        for i in range(instances)
    ])
    return (f_ref - f_w) / f_ref, f_w, f_ref


def quadratic_moreau_proxy(dim: int = 5) -> float:
    """Proxy for ``phi(u) = ||u||^2/2`` (maximize ``-phi``) at ``e_1`` with ``rho_bar = 2``."""
    box = ParameterBox(np.full(dim, -100.0), np.full(dim, 100.0))
    theta = np.zeros(dim)
    theta[0] = 1.0
    return moreau_gradient_proxy(theta, 2.0, lambda u: (-0.5 * u @ u, -u), box, inner_steps=2000)


def varactor_phase_coverage(points: int = 2001, circuit: VaractorCircuit | None = None,
                            bounds=(0.2, 2.0)):
    """Unwrapped phase span in degrees, monotonicity and the modulus range."""
    c = np.linspace(bounds[0], bounds[1], points) * 1e-12
    gamma = reflection_varactor(c, circuit or VaractorCircuit())
    phase = np.unwrap(np.angle(gamma))
    steps = np.diff(phase)
    monotone = bool(np.all(steps > 0) or np.all(steps < 0))
    return float(np.degrees(abs(phase[-1] - phase[0]))), monotone, float(np.abs(gamma).min()), float(np.abs(gamma).max())


def projection_ok(trials: int = 200, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    box = IdealIrs(8).box
    for _ in range(trials):
        theta = rng.normal(scale=10.0, size=box.dim)
        p = project(theta, box)
        inside = box.uniform(rng)
        if not (box.contains(p) and np.array_equal(project(p, box), p)):
            return False
        # nonexpansive toward feasible points
        if np.linalg.norm(p - inside) > np.linalg.norm(theta - inside) + 1e-12:
            return False
    return True


def run_checks(full: bool = False) -> list:
    n = 100 if full else 10
    results = []
    err = gradient_fd_error(n)
    results.append(CheckResult("gradient_vs_finite_differences", err <= 1e-5, f"max relative error {err:.2e}", err))
    mean, se, exact, msq, bound = estimator_statistics(100_000 if full else 20_000)
    z = float(np.max(np.abs(mean - exact) / se))
    results.append(CheckResult("estimator_unbiased", z <= 3.0, f"max |z| {z:.2f} over {exact.size} coordinates", z))
    results.append(CheckResult("second_moment_bound", msq <= bound, f"E||D||^2 {msq:.3g} <= bound {bound:.3g}", msq))
    v = wmmse_monotone_violations(n)
    results.append(CheckResult("wmmse_monotone", v == 0, f"{v} non-monotone traces", v))
    e1 = single_user_error(n)
    results.append(CheckResult("wmmse_single_user_optimum", e1 <= 1e-6, f"max relative gap {e1:.2e}", e1))
    q = quadratic_moreau_proxy()
    results.append(CheckResult("moreau_quadratic", abs(q - 2 / 3) <= 1e-3, f"proxy {q:.6f} (closed form 2/3)", q))
    span, mono, lo, hi = varactor_phase_coverage()
    results.append(CheckResult("varactor_phase_coverage", span > 270 and mono and hi <= 1.0,
                               f"{span:.1f} deg, monotone={mono}, |Gamma| in [{lo:.3f}, {hi:.3f}]", span))
    results.append(CheckResult("projection", projection_ok(), "idempotent, in box, nonexpansive"))
    return results
