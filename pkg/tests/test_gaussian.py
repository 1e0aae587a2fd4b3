"""Linear-Gaussian backend: moments algebra, conjugacy, Monte Carlo."""
import json
import math

import numpy as np
import numpy.testing as nptest
import pytest

from lensgames.errors import DimensionMismatch, InvalidState, UnknownFactor
from lensgames.prob import (
    FiniteChannel,
    FiniteDist,
    GaussianChannel,
    GaussianState,
    almost_equal,
    bayes_invert,
    compose_channels,
    dumps_canonical,
    expectation,
    gaussian_channel_from_json,
    gaussian_channel_to_json,
    gaussian_state_from_json,
    gaussian_state_to_json,
    kl,
    log_density,
    marginalize,
    pushforward,
    tensor,
)


def test_state_validation():
    with pytest.raises(InvalidState):
        GaussianState([0.0], [[-1.0]])
    with pytest.raises(InvalidState):
        GaussianState([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        GaussianState([0.0, 0.0], [[1.0]])


def test_pushforward_affine_hand():
    pi = GaussianState([0.0], [[1.0]])
    c = GaussianChannel([[2.0]], [1.0], [[0.5]])
    out = pushforward(c, pi)
    nptest.assert_allclose(out.mean, [1.0])
    nptest.assert_allclose(out.cov, [[4.5]])


def test_compose_affine():
    c = GaussianChannel([[2.0]], [1.0], [[0.5]])
    d = GaussianChannel([[3.0]], [-1.0], [[0.25]])
    dc = compose_channels(d, c)
    nptest.assert_allclose(dc.weight, [[6.0]])
    nptest.assert_allclose(dc.bias, [2.0])
    nptest.assert_allclose(dc.noise_cov, [[9 * 0.5 + 0.25]])
    pi = GaussianState([0.3], [[2.0]])
    lhs = pushforward(dc, pi)
    rhs = pushforward(d, pushforward(c, pi))
    nptest.assert_allclose(lhs.mean, rhs.mean, atol=1e-14)
    nptest.assert_allclose(lhs.cov, rhs.cov, atol=1e-14)


def test_tensor_block_structure():
    p = GaussianState([1.0], [[2.0]])
    q = GaussianState([3.0, 4.0], [[1.0, 0.2], [0.2, 1.0]])
    joint = tensor(p, q)
    assert joint.blocks == (1, 2)
    nptest.assert_allclose(joint.cov[0, 1:], 0.0)
    assert marginalize(joint, 0) == p
    assert marginalize(joint, 1) == q


def test_marginalize_requires_declared_blocks():
    with pytest.raises(UnknownFactor):
        marginalize(GaussianState([0.0, 0.0], np.eye(2)), 0)


def test_invert_conjugate_hand():
    pi = GaussianState([0.0], [[1.0]])
    c = GaussianChannel([[1.0]], [0.0], [[1.0]])
    post = bayes_invert(c, pi)
    got = post.at([2.0])
    nptest.assert_allclose(got.mean, [1.0], atol=1e-14)
    nptest.assert_allclose(got.cov, [[0.5]], atol=1e-14)


def test_invert_singular_pushforward_rejected():
    pi = GaussianState([0.0], [[0.0]])
    c = GaussianChannel([[1.0]], [0.0], [[0.0]])
    with pytest.raises(InvalidState):
        bayes_invert(c, pi)


def test_invert_agrees_with_grid_discretisation():
    """Conjugate posterior mean vs a finite-grid oracle of the same model."""
    prior_var, noise_var, y_obs = 1.0, 0.5, 0.8
    grid = np.linspace(-6.0, 6.0, 1201)  # step 0.01 keeps error << 2e-2
    step = grid[1] - grid[0]
    prior_mass = np.exp(-0.5 * grid**2 / prior_var)
    prior_mass /= prior_mass.sum()
    labels = tuple(round(float(x), 3) for x in grid)
    pi_grid = FiniteDist(labels, prior_mass)
    rows = np.stack([np.exp(-0.5 * (grid - x) ** 2 / noise_var) for x in grid])
    rows /= rows.sum(axis=1, keepdims=True)
    c_grid = FiniteChannel(labels, labels, rows)
    fam = bayes_invert(c_grid, pi_grid)
    y_label = min(labels, key=lambda v: abs(v - y_obs))
    post = fam.at(y_label)
    grid_mean = float(np.asarray(labels) @ post.probs)

    pi = GaussianState([0.0], [[prior_var]])
    c = GaussianChannel([[1.0]], [0.0], [[noise_var]])
    exact = bayes_invert(c, pi).at([y_obs])
    assert abs(grid_mean - exact.mean[0]) < 2e-2


def test_log_density_standard_normal_at_mean():
    c = GaussianChannel([[1.0]], [0.0], [[1.0]])
    assert log_density(c, [0.3], [0.3]) == pytest.approx(-0.5 * math.log(2 * math.pi))


def test_kl_gaussian_hand():
    p = GaussianState([0.0], [[1.0]])
    q = GaussianState([1.0], [[1.0]])
    assert kl(p, q) == pytest.approx(0.5)
    assert kl(p, p) == pytest.approx(0.0, abs=1e-12)


def test_kl_nonnegative_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = rng.normal(size=2)
        a = rng.normal(size=(2, 2))
        p = GaussianState(m, a @ a.T + 0.1 * np.eye(2))
        b = rng.normal(size=(2, 2))
        q = GaussianState(rng.normal(size=2), b @ b.T + 0.1 * np.eye(2))
        assert kl(p, q) >= -1e-12


def test_expectation_monte_carlo_seeded():
    pi = GaussianState([0.0], [[1.0]])
    est = expectation(pi, lambda x: float(x[0] ** 2), seed=123, n_samples=100_000)
    assert est.n_samples == 100_000
    assert abs(est.value - 1.0) < 0.05
    again = expectation(pi, lambda x: float(x[0] ** 2), seed=123, n_samples=100_000)
    assert est.value == again.value  # same seed, same estimate


def test_expectation_requires_seed():
    with pytest.raises(DimensionMismatch):
        expectation(GaussianState([0.0], [[1.0]]), lambda x: 0.0)


def test_gaussian_family_almost_equal_is_parameter_supnorm():
    ref = GaussianState([0.0], [[1.0]])
    f1 = GaussianChannel([[0.5]], [0.1], [[0.5]])
    f2 = GaussianChannel([[0.5 + 5e-4]], [0.1], [[0.5]])
    assert almost_equal(f1, f2, ref, 1e-3)
    assert not almost_equal(f1, f2, ref, 1e-4)


def test_gaussian_json_roundtrip_bitexact():
    g = GaussianState([1 / 3, -2 / 7], [[1.0, 0.1], [0.1, 2.0]], blocks=(1, 1))
    back = gaussian_state_from_json(json.loads(dumps_canonical(gaussian_state_to_json(g))))
    assert back == g and back.blocks == (1, 1)
    c = GaussianChannel([[1 / 9, 0.2]], [math.pi], [[0.5]])
    cc = gaussian_channel_from_json(json.loads(dumps_canonical(gaussian_channel_to_json(c))))
    assert cc == c
