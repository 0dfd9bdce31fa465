import numpy as np
import pytest

from altlin.linalg import IndexMask, nuclear_norm
from altlin.oracle import finite_diff_grad, scalar_prox_bruteforce
from altlin.smoothing import (
    DEFAULT_SIGMA,
    SmoothedL1,
    SmoothedMaskedL1,
    SmoothedNuclear,
    sigma_for_epsilon,
)


def test_default_sigma():
    assert DEFAULT_SIGMA == 1e-6
    assert SmoothedL1(1.0).sigma == 1e-6


def test_invalid_parameters():
    with pytest.raises(ValueError):
        SmoothedL1(0.0, 1.0)
    with pytest.raises(ValueError):
        SmoothedNuclear(-1.0)
    with pytest.raises(ValueError):
        SmoothedL1(1.0, 1.0).prox(np.ones(2), 0.0)


def test_l1_value_at_zero():
    assert SmoothedL1(0.3, 0.1).value(np.zeros(5)) == 0.0


def test_l1_value_saturated():
    h = SmoothedL1(0.5, 0.01)
    x = np.array([0.2, -1.0, 0.006, -0.005])  # all |x_i| >= rho*sigma
    expected = h.rho * np.abs(x).sum() - h.sigma * x.size * h.rho**2 / 2
    assert h.value(x) == pytest.approx(expected, abs=1e-15)


def test_l1_value_sandwich_and_dual_grid(rng):
    h = SmoothedL1(0.7, 0.3)
    grid = np.linspace(-h.rho, h.rho, 2001)
    for _ in range(20):
        x = rng.standard_normal(6) * 0.5
        v = h.value(x)
        l1 = h.rho * np.abs(x).sum()
        assert l1 - h.sigma * h.bound_constant(x.size) - 1e-12 <= v <= l1 + 1e-12
        dual = sum(np.max(xi * grid - 0.5 * h.sigma * grid**2) for xi in x)
        assert v == pytest.approx(dual, abs=1e-6)


def test_l1_grad_examples():
    h = SmoothedL1(2.0, 0.5)
    assert h.grad(np.array([0.6]))[0] == pytest.approx(1.2)
    np.testing.assert_array_equal(h.grad(np.array([1e9, -1e9])), [2.0, -2.0])


def test_l1_grad_finite_differences(rng):
    h = SmoothedL1(0.4, 0.2)
    for _ in range(10):
        x = rng.standard_normal(8) * 0.2
        # stay away from the clip kinks at |x| = rho*sigma
        x[np.abs(np.abs(x) - h.rho * h.sigma) < 1e-3] += 5e-3
        fd = finite_diff_grad(h.value, x, 1e-6)
        g = h.grad(x)
        assert np.linalg.norm(fd - g) <= 1e-6 * max(np.linalg.norm(g), 1e-12)


def test_l1_prox_examples():
    h = SmoothedL1(1.0, 1e-9)
    np.testing.assert_array_equal(h.prox(np.zeros(3), 0.5), np.zeros(3))
    z = np.array([5.0, -3.0, 2.0])
    np.testing.assert_allclose(h.prox(z, 0.5), np.sign(z) * (np.abs(z) - 0.5), atol=1e-8)


def test_l1_prox_stationarity_and_bruteforce(rng):
    h = SmoothedL1(0.8, 0.05)
    for tau in (0.01, 0.3, 2.0):
        z = rng.standard_normal(10)
        x = h.prox(z, tau)
        assert np.linalg.norm(tau * h.grad(x) + x - z) <= 1e-10
        phi = lambda t: SmoothedL1(0.8, 0.05).value(np.array([t]))
        ref = [scalar_prox_bruteforce(phi, zi, tau) for zi in z[:4]]
        np.testing.assert_allclose(x[:4], ref, atol=1e-8)


def test_nuclear_grad_examples():
    s = 1e-3
    h = SmoothedNuclear(s)
    np.testing.assert_array_equal(h.grad(np.zeros((3, 2))), np.zeros((3, 2)))
    np.testing.assert_allclose(h.grad(np.diag([5 * s, 0.5 * s])), np.diag([1.0, 0.5]), atol=1e-12)


def test_nuclear_grad_spectral_norm(rng):
    h = SmoothedNuclear(0.1)
    for _ in range(10):
        assert np.linalg.norm(h.grad(rng.standard_normal((4, 6))), 2) <= 1 + 1e-12


def _distinct_singular_values(rng, shape, sigma):
    # singular values well apart and away from the kink at gamma = 1
    u, _ = np.linalg.qr(rng.standard_normal((shape[0], shape[0])))
    v, _ = np.linalg.qr(rng.standard_normal((shape[1], shape[1])))
    r = min(shape)
    s = sigma * np.array([3.0, 0.6, 0.2, 1.7, 0.4][:r])
    return (u[:, :r] * s) @ v[:, :r].T


def test_nuclear_grad_finite_differences(rng):
    sigma = 0.5
    h = SmoothedNuclear(sigma)
    for _ in range(5):
        x = _distinct_singular_values(rng, (3, 3), sigma)
        fd = finite_diff_grad(h.value, x, 1e-6)
        g = h.grad(x)
        assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)


def test_nuclear_prox_stationarity(rng):
    h = SmoothedNuclear(0.2)
    for tau in (0.05, 1.0):
        z = rng.standard_normal((4, 3))
        x = h.prox(z, tau)
        assert np.linalg.norm(tau * h.grad(x) + x - z) <= 1e-10


def test_nuclear_sandwich(rng):
    h = SmoothedNuclear(0.3)
    for _ in range(20):
        x = rng.standard_normal((4, 5)) * rng.choice([0.1, 1.0, 10.0])
        v, nn = h.value(x), nuclear_norm(x)
        assert v - 1e-12 <= nn <= v + h.sigma * h.bound_constant(x.shape) + 1e-12


def test_masked_l1_grad():
    h_full = SmoothedL1(0.5, 0.1)
    y = np.array([[0.01, -0.2], [0.3, 0.04]])
    empty = SmoothedMaskedL1(0.5, 0.1, IndexMask([], (2, 2)))
    np.testing.assert_array_equal(empty.grad(y), np.zeros((2, 2)))
    full = SmoothedMaskedL1(0.5, 0.1, IndexMask.full((2, 2)))
    np.testing.assert_array_equal(full.grad(y), h_full.grad(y))
    assert full.value(y) == pytest.approx(h_full.value(y))


def test_masked_l1_off_mask(rng):
    mask = IndexMask.from_bool(rng.random((5, 5)) < 0.5)
    h = SmoothedMaskedL1(0.3, 0.01, mask)
    y = rng.standard_normal((5, 5))
    g = h.grad(y)
    assert np.all(g[~mask.bool] == 0.0)
    b = rng.standard_normal((5, 5))
    p = h.prox(b, 0.4)
    np.testing.assert_array_equal(p[~mask.bool], b[~mask.bool])
    assert np.linalg.norm(0.4 * h.grad(p) + p - b) <= 1e-10


def test_sigma_for_epsilon_examples():
    assert sigma_for_epsilon("l1-deblur", 1e-2, 0.1, 100) == pytest.approx(1e-2)
    assert sigma_for_epsilon("rpca", 1e-2, 0.5, 10, 10) == pytest.approx(2e-4)
    m = n = 16
    rho = 1 / np.sqrt(m)
    assert sigma_for_epsilon("rpca", 1e-3, rho, n, m) == pytest.approx(1e-3 / (2 * max(min(m, n), n)))
    with pytest.raises(ValueError):
        sigma_for_epsilon("rpca", 1e-2, 0.5, 10)
    with pytest.raises(ValueError):
        sigma_for_epsilon("tv", 1e-2, 0.5, 10)
    with pytest.raises(ValueError):
        sigma_for_epsilon("l1-deblur", -1.0, 0.5, 10)
