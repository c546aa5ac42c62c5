import numpy as np
import pytest

from mcmckit.exceptions import ConfigurationError, RejectedInputError
from mcmckit.sde import (RegionConstraint, euler_maruyama_step, simulate_brownian,
                         simulate_langevin_sde)
from mcmckit.targets import FunctionTarget, make_target


def test_euler_step_deterministic():
    assert euler_maruyama_step(np.array([1.0]), np.array([2.0]), 0.0, 0.5)[0] == 2.0
    x = np.array([0.3, -0.2])
    np.testing.assert_array_equal(euler_maruyama_step(x, np.zeros(2), 0.0, 0.1, rng=0), x)


def test_euler_step_noise_variance():
    rng = np.random.default_rng(3)
    dt, n = 0.2, 100_000
    x = np.zeros((n, 1))
    d = euler_maruyama_step(x, np.zeros_like(x), 1.0, dt, rng=rng)[:, 0]
    se = dt * np.sqrt(2.0 / (n - 1))
    assert abs(d.var(ddof=1) - dt) < 3 * se


def test_brownian_length_and_limit():
    path = simulate_brownian([0.0, 0.0], 1000, 0.1, rng=0)
    assert len(path) == 1001 and path.points.shape == (1001, 2)
    np.testing.assert_allclose(path.times[:3], [0, 1, 2])
    still = simulate_brownian([0.5, -0.5], 1000, 1e-300, rng=0)
    assert np.max(np.abs(still.points - [0.5, -0.5])) <= np.finfo(float).eps * 1000


def test_brownian_variance_grows_linearly():
    paths = simulate_brownian(np.zeros((20_000, 1)), 50, 0.3, rng=1).points[:, :, 0]
    var = paths[-1].var()
    assert var == pytest.approx(50 * 0.09, rel=0.03)


def test_disk_constraint_holds():
    c = RegionConstraint.disk(1.0)
    path = simulate_brownian([0.0, 0.0], 2000, 0.3, constraint=c, rng=2)
    assert np.max(np.linalg.norm(path.points, axis=1)) <= 1.0
    with pytest.raises(RejectedInputError):
        simulate_brownian([2.0, 0.0], 10, 0.1, constraint=c, rng=0)


def test_annulus_walk_stays_in_band():
    c = RegionConstraint.annulus(0.9, 1.1)
    path = simulate_brownian([1.0, 0.0], 500, 0.05, constraint=c, rng=0)
    r = np.linalg.norm(path.points, axis=1)
    assert r.min() >= 0.9 and r.max() <= 1.1


def test_langevin_stationary_variance():
    t = make_target("gaussian:dim=1")
    path = simulate_langevin_sde(t, np.zeros((2000, 1)), 400, 0.01, rng=4)
    late = path.points[-1, :, 0]
    # OU process after t=4: Var = (1 - e^{-2t}) and Euler bias O(dt)
    assert late.var() == pytest.approx(1 - np.exp(-8), rel=0.08)


def test_langevin_flat_target_is_brownian():
    flat = FunctionTarget(1, lambda x: np.zeros(np.shape(x)[:-1]), lambda x: np.zeros_like(x))
    dt = 0.05
    path = simulate_langevin_sde(flat, np.zeros((50_000, 1)), 1, dt, rng=5)
    assert path.points[1, :, 0].var() == pytest.approx(2 * dt, rel=0.03)


def test_langevin_one_step_from_mode():
    t = make_target("gaussian:dim=2")
    rng = np.random.default_rng(9)
    xi = np.random.default_rng(9).standard_normal((1, 2))
    path = simulate_langevin_sde(t, [0.0, 0.0], 1, 1e-8, rng=rng)
    np.testing.assert_allclose(path.points[1], np.sqrt(2e-8) * xi[0])


def test_bad_parameters():
    with pytest.raises(ConfigurationError):
        simulate_brownian([0.0], 0, 0.1)
    with pytest.raises(ConfigurationError):
        simulate_langevin_sde(make_target("gaussian:dim=1"), [0.0], 5, -1.0)
