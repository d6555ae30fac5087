import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from izosga.utility import (
    LN2,
    WeightedSumRate,
    cogradient,
    compositional_gradient,
    precoder_gradient,
    sinr,
    sumrate,
)
from izosga.checks import gradient_fd_error, small_environment

from conftest import cn


def loop_sumrate(W, H, alpha, noise):
    total = 0.0
    K = H.shape[0]
    for k in range(K):
        gains = [abs(np.vdot(H[k], W[j])) ** 2 for j in range(K)]
        interference = sum(gains) - gains[k]
        total += alpha[k] * np.log2(1 + gains[k] / (interference + noise[k]))
    return total


def test_single_user_sinr():
    h = np.array([[1.0 + 1j, 2.0]])
    w = np.array([[0.5, 1j]])
    assert sinr(w, h, [2.0])[0] == pytest.approx(abs(np.vdot(h[0], w[0])) ** 2 / 2.0)


def test_zero_precoder_zero_sinr_and_rate(rng):
    H = cn(rng, (3, 2))
    W = np.zeros((3, 2), complex)
    np.testing.assert_array_equal(sinr(W, H, np.ones(3)), 0.0)
    assert sumrate(W, H, np.ones(3), np.ones(3)) == 0.0


def test_orthogonal_example():
    H = np.eye(2, dtype=complex)
    W = np.eye(2, dtype=complex)
    np.testing.assert_allclose(sinr(W, H, [1.0, 1.0]), [1.0, 1.0])
    assert sinr(W, H, [1.0, 1.0], k=1) == pytest.approx(1.0)
    assert sumrate(W, H, [1.0, 1.0], [1.0, 1.0]) == pytest.approx(2.0)


def test_nonpositive_noise_rejected(rng):
    with pytest.raises(ValueError):
        sinr(cn(rng, (2, 2)), cn(rng, (2, 2)), [1.0, 0.0])


def test_sumrate_matches_scalar_loop(rng):
    for _ in range(20):
        H, W = cn(rng, (4, 3)), cn(rng, (4, 3))
        alpha, noise = rng.uniform(0, 2, 4), rng.uniform(0.1, 2, 4)
        assert abs(sumrate(W, H, alpha, noise) - loop_sumrate(W, H, alpha, noise)) < 1e-12


def test_cogradient_zero_precoder(rng):
    np.testing.assert_array_equal(cogradient(np.zeros((2, 3)), cn(rng, (2, 3)), [1, 1], [1, 1]), 0)


def test_cogradient_scalar_hand_value():
    g = cogradient(np.ones((1, 1)), np.ones((1, 1)), [1.0], [1.0])
    assert g[0, 0] == pytest.approx(1 / (2 * LN2))
    assert g[0, 0] == pytest.approx(0.72135, abs=1e-5)


def test_cogradient_wirtinger_finite_differences(rng):
    H, W = cn(rng, (3, 4)), cn(rng, (3, 4))
    alpha, noise = np.array([1.0, 0.5, 2.0]), np.array([0.5, 1.0, 0.3])
    g = cogradient(W, H, alpha, noise)
    h = 1e-5
    for idx in np.ndindex(H.shape):
        e = np.zeros(H.shape, complex)
        e[idx] = h
        dx = (sumrate(W, H + e, alpha, noise) - sumrate(W, H - e, alpha, noise)) / (2 * h)
        dy = (sumrate(W, H + 1j * e, alpha, noise) - sumrate(W, H - 1j * e, alpha, noise)) / (2 * h)
        assert dx == pytest.approx(2 * g[idx].real, rel=1e-6, abs=1e-9)
        assert dy == pytest.approx(2 * np.real(1j * g[idx]), rel=1e-6, abs=1e-9)


def test_precoder_gradient_finite_differences(rng):
    H, W = cn(rng, (2, 3)), cn(rng, (2, 3))
    gw = precoder_gradient(W, H, [1.0, 1.0], [0.7, 0.7])
    h = 1e-6
    for idx in np.ndindex(W.shape):
        e = np.zeros(W.shape, complex)
        e[idx] = h
        dx = (sumrate(W + e, H, [1, 1], [0.7, 0.7]) - sumrate(W - e, H, [1, 1], [0.7, 0.7])) / (2 * h)
        dy = (sumrate(W + 1j * e, H, [1, 1], [0.7, 0.7]) - sumrate(W - 1j * e, H, [1, 1], [0.7, 0.7])) / (2 * h)
        assert dx == pytest.approx(2 * gw[idx].real, rel=1e-6, abs=1e-9)
        assert dy == pytest.approx(2 * gw[idx].imag, rel=1e-6, abs=1e-9)


def test_compositional_gradient_through_ideal_irs():
    assert gradient_fd_error(instances=20, seed=3) <= 1e-5


def test_two_term_assembly_matches_fast_path(rng):
    env = small_environment(4)
    real = env.sample(rng)
    theta = env.box.uniform(rng)
    sc = env.scenario
    W = cn(rng, (sc.users, sc.tx_antennas))
    g = cogradient(W, env.channel(theta, real), sc.weights, sc.noise_vars)
    slow = compositional_gradient(env.channel_jacobian(theta, real), g)
    np.testing.assert_allclose(slow, env.theta_gradient(theta, real, g), rtol=1e-10, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100))
def test_weight_scaling(seed, c):
    rng = np.random.default_rng(seed)
    H, W = cn(rng, (3, 2)), cn(rng, (3, 2))
    alpha, noise = rng.uniform(0, 1, 3), rng.uniform(0.1, 1, 3)
    np.testing.assert_allclose(sumrate(W, H, c * alpha, noise), c * sumrate(W, H, alpha, noise), rtol=1e-12)
    np.testing.assert_allclose(cogradient(W, H, c * alpha, noise), c * cogradient(W, H, alpha, noise),
                               rtol=1e-12, atol=1e-300)


def test_cogradient_bounded_on_compact_set():
    rng = np.random.default_rng(0)
    H = cn(rng, (10_000, 3, 2))
    W = cn(rng, (10_000, 3, 2))
    W /= np.sqrt((np.abs(W) ** 2).sum(axis=(-2, -1)))[:, None, None]
    norms = np.sqrt((np.abs(cogradient(W, H, np.ones(3), np.full(3, 0.5))) ** 2).sum(axis=(-2, -1)))
    assert np.isfinite(norms.max())


def test_utility_object(rng):
    u = WeightedSumRate([1.0, 2.0], [1.0, 1.0])
    H, W = cn(rng, (2, 2)), cn(rng, (2, 2))
    assert u.value(W, H) == pytest.approx(sumrate(W, H, [1.0, 2.0], [1.0, 1.0]))
    with pytest.raises(ValueError):
        WeightedSumRate([1.0], [0.0])
