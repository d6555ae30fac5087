import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from izosga.channel import IrsEnvironment, LinkStats, Scenario
from izosga.irs import IdealIrs, project
from izosga.optimizer import stack_realizations
from izosga.oracle import OracleBudget, matched_filter, oracle_error_estimate, reference_solve, wmmse
from izosga.utility import sumrate

from conftest import cn


def small(m=2, k=2, power=1.0, noise=0.1):
    return Scenario(m, k, 1, power_budget=power, noise_vars=noise, weights=1.0)


def power(W):
    return (np.abs(W) ** 2).sum(axis=(-2, -1))


def test_single_user_matched_filter_optimum(rng):
    sc = small(4, 1, power=2.0, noise=0.3)
    H = cn(rng, (1, 4))
    W, trace = wmmse(H, sc, OracleBudget(2))
    expected = np.sqrt(2.0) * H / np.linalg.norm(H)
    np.testing.assert_allclose(np.abs(np.vdot(W, expected)), 2.0, rtol=1e-9)
    want = np.log2(1 + 2.0 * np.linalg.norm(H) ** 2 / 0.3)
    assert trace.final_sumrate == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("budget", [1, 2, 3, 5, 10, 20, 50])
def test_budget_trace_lengths(rng, budget):
    W, trace = wmmse(cn(rng, (5, 4, 3)), small(3, 4), OracleBudget(budget))
    assert trace.sumrate_per_iteration.shape == (5, budget)
    np.testing.assert_array_equal(trace.iterations_used, budget)


def test_budget_validation():
    with pytest.raises(ValueError):
        OracleBudget(0)
    with pytest.raises(ValueError):
        OracleBudget(3, value_tolerance=-1.0)


def test_more_iterations_never_hurt(rng):
    H = cn(rng, (100, 2, 2))
    sc = small()
    f = [wmmse(H, sc, OracleBudget(n))[1].final_sumrate for n in (1, 5, 50)]
    assert np.all(f[2] >= f[1] - 1e-9)
    assert np.all(f[1] >= f[0] - 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 4), st.floats(0.1, 10), st.floats(0.01, 3))
def test_trace_monotone_and_feasible(seed, m, k, p, noise):
    rng = np.random.default_rng(seed)
    sc = small(m, k, power=p, noise=noise)
    H = cn(rng, (8, k, m))
    W, trace = wmmse(H, sc, OracleBudget(15))
    assert np.all(np.diff(trace.sumrate_per_iteration, axis=-1) >= -1e-9)
    assert np.all(power(W) <= p * (1 + 1e-9))


def test_warm_start_is_used(rng):
    sc = small()
    H = cn(rng, (2, 2))
    W50, _ = wmmse(H, sc, OracleBudget(50))
    W, trace = wmmse(H, sc, OracleBudget(1), warm_start=W50)
    assert trace.final_sumrate >= sumrate(W50, H, sc.weights, sc.noise_vars) - 1e-9


def test_value_tolerance_stops_early(rng):
    H = cn(rng, (6, 2, 2))
    _, trace = wmmse(H, small(), OracleBudget(200, value_tolerance=1e-6))
    assert np.all(trace.iterations_used < 200)
    assert np.all(np.diff(trace.sumrate_per_iteration, axis=-1) >= -1e-9)


def test_singular_system_regularized():
    # a user with an all-zero channel leaves the system matrix singular
    H = np.array([[1.0 + 0j, 0.0, 0.0], [0.0, 0.0, 0.0]])
    W, trace = wmmse(H, small(3, 2), OracleBudget(5))
    assert np.all(np.isfinite(W))
    assert power(W) <= 1.0 + 1e-9


def test_rejects_nonfinite_channel():
    with pytest.raises(ValueError):
        wmmse(np.array([[np.nan, 1.0]]), small(2, 1), OracleBudget(1))


def test_matched_filter_power(rng):
    W = matched_filter(cn(rng, (3, 4, 2)), 2.5)
    np.testing.assert_allclose(power(W), 2.5)


def test_reference_single_user(rng):
    sc = small(3, 1, power=1.5, noise=0.2)
    H = cn(rng, (1, 3))
    W = reference_solve(H, sc, restarts=8, inner_steps=500)
    want = np.log2(1 + 1.5 * np.linalg.norm(H) ** 2 / 0.2)
    assert sumrate(W, H, sc.weights, sc.noise_vars) == pytest.approx(want, rel=1e-6)


def test_reference_deterministic(rng):
    H = cn(rng, (2, 2))
    a = reference_solve(H, small(), restarts=8, inner_steps=300, seed=4)
    b = reference_solve(H, small(), restarts=8, inner_steps=300, seed=4)
    np.testing.assert_array_equal(a, b)


def test_reference_dominates_wmmse():
    rng = np.random.default_rng(77)
    sc = small()
    for i in range(20):
        H = cn(rng, (2, 2))
        W, _ = wmmse(H, sc, OracleBudget(50))
        ref = reference_solve(H, sc, seed=i)
        assert power(ref) <= 1 + 1e-9
        assert sumrate(ref, H, sc.weights, sc.noise_vars) >= sumrate(W, H, sc.weights, sc.noise_vars) - 1e-6


def test_error_estimate_examples(rng):
    sc = small(2, 1, noise=0.5)
    H = cn(rng, (1, 2))
    W, _ = wmmse(H, sc, OracleBudget(3))
    assert oracle_error_estimate(W, H, sc, W) == 0.0
    gap = oracle_error_estimate(np.zeros_like(W), H, sc, W)
    assert gap == pytest.approx(np.log2(1 + np.linalg.norm(H) ** 2 / 0.5), rel=1e-9)


def test_one_iteration_gap_exceeds_ten():
    rng = np.random.default_rng(11)
    sc = small()
    H = cn(rng, (100, 2, 2))
    W1, _ = wmmse(H, sc, OracleBudget(1))
    W10, _ = wmmse(H, sc, OracleBudget(10))
    ref = np.stack([reference_solve(H[i], sc, restarts=8, inner_steps=500, seed=i) for i in range(100)])
    g1 = oracle_error_estimate(W1, H, sc, ref).mean()
    g10 = oracle_error_estimate(W10, H, sc, ref).mean()
    assert g1 > g10


def test_warm_start_regression_guard():
    """Warm start from the previous outer iterate rarely loses to a cold start."""
    rng = np.random.default_rng(2024)
    sc = Scenario(4, 8, 16, power_budget=1.0, noise_vars=1.0, weights=1.0,
                  direct=LinkStats(0.01, 1.0), tx_irs=LinkStats(0.1, 1.0), irs_user=LinkStats(0.1, 1.0))
    env = IrsEnvironment(sc, IdealIrs(16))
    trials = 1000
    thetas = np.stack([env.box.uniform(rng) for _ in range(trials)])
    step = 0.01 * rng.standard_normal(thetas.shape)
    nxt = project(thetas + step, env.box)
    omega = [env.sample(rng) for _ in range(trials)]
    omega = stack_realizations(omega)
    W_prev, _ = wmmse(env.channel(thetas, omega), sc, OracleBudget(1))
    H_next = env.channel(nxt, omega)
    _, warm = wmmse(H_next, sc, OracleBudget(1), warm_start=W_prev)
    _, cold = wmmse(H_next, sc, OracleBudget(1))
    wins = np.sum(warm.final_sumrate >= cold.final_sumrate)
    assert wins >= 0.9 * trials
