import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcmckit.ebm import (CdConfig, annealed_score_langevin, cd_gradient, ebm_mh_acceptance,
                         ebm_mh_sample, ebm_ula_sample, gaussian_energy, model_from_dict,
                         quadratic_energy, relative_importance, score, train_cd,
                         unnorm_log_density)
from mcmckit.exceptions import ConfigurationError

pts = st.lists(st.floats(-4, 4), min_size=2, max_size=2)


def fd(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.array(out)


def test_unnorm_log_density_examples():
    m = gaussian_energy(0.0, 1.0)
    assert unnorm_log_density(m, [0.0]) == 0.0
    m = gaussian_energy(1.0, 2.0)
    assert unnorm_log_density(m, [3.0]) == pytest.approx(-0.5)


@settings(max_examples=30, deadline=None)
@given(pts)
def test_family_gradients_match_finite_differences(x):
    for m in (gaussian_energy([0.5, -1.0], 1.3),
              quadratic_energy([[-1.0, 0.3], [0.1, -0.8]], [0.2, -0.4])):
        np.testing.assert_allclose(score(m, x), fd(lambda v: m.f(m.theta, v), x),
                                   rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(m.grad_theta_f(m.theta, np.asarray(x)),
                                   fd(lambda th: m.f(th, np.asarray(x)), m.theta),
                                   rtol=1e-5, atol=1e-6)


def test_relative_importance():
    m = gaussian_energy([0.0, 0.0], 1.0)
    assert relative_importance(m, [1.0, 2.0], [1.0, 2.0]) == 1.0
    x, x2 = np.array([0.0, 0.0]), np.array([np.sqrt(2.0), 0.0])
    assert relative_importance(m, x, x2) == pytest.approx(np.e)


@given(pts, pts, pts)
def test_relative_importance_product_rule(a, b, c):
    m = gaussian_energy([0.0, 0.0], 1.5)
    lhs = relative_importance(m, a, b) * relative_importance(m, b, c)
    assert lhs == pytest.approx(relative_importance(m, a, c), rel=1e-12)


def test_mh_acceptance_rule():
    m = gaussian_energy(0.0, 1.0)
    assert ebm_mh_acceptance(m, [1.0], [0.5]) == 1.0
    # f-gap of ln 2 downhill
    x2 = np.sqrt(2 * np.log(2.0))
    assert ebm_mh_acceptance(m, [0.0], [x2]) == pytest.approx(0.5)


def test_mh_sampler_variance():
    m = gaussian_energy(0.0, 1.5)
    x = ebm_mh_sample(m, np.zeros((20_000, 1)), 1.5, 200, rng=0)
    assert x.var() == pytest.approx(2.25, rel=0.1)


def test_ula_flat_and_variance():
    flat = quadratic_energy([[-1e-300]], [0.0])
    eps = 0.02
    x = ebm_ula_sample(flat, np.zeros((50_000, 1)), eps, 1, rng=0)
    assert x.var() == pytest.approx(2 * eps, rel=0.03)
    m = gaussian_energy(0.0, 1.0)
    x = ebm_ula_sample(m, np.zeros((20_000, 1)), 0.01, 1000, rng=1)
    assert x.var() == pytest.approx(1.0, rel=0.05)
    again = ebm_ula_sample(m, np.zeros((10, 1)), 0.01, 20, rng=3)
    np.testing.assert_array_equal(again, ebm_ula_sample(m, np.zeros((10, 1)), 0.01, 20, rng=3))


def test_cd_gradient_hand_algebra():
    m = gaussian_energy(0.5, 2.0)
    data = np.array([[1.0], [2.0], [4.0]])
    cfg = CdConfig(k=5, inner="ula", step=0.1)
    g, neg = cd_gradient(m, data, cfg, rng=0, return_negatives=True)
    assert g[0] == pytest.approx((data.mean() - neg.mean()) / 4.0)
    zero = cd_gradient(m, data, CdConfig(k=0), rng=0)
    np.testing.assert_array_equal(zero, 0.0)


def test_cd_gradient_centered_at_truth():
    rng = np.random.default_rng(2)
    m = gaussian_energy(0.0, 1.0)
    cfg = CdConfig(k=10, step=0.05, init="from_noise")
    gs = np.array([cd_gradient(m, rng.standard_normal((100, 1)), cfg, rng) for _ in range(200)])
    se = gs.std(axis=0, ddof=1) / np.sqrt(len(gs))
    assert np.all(np.abs(gs.mean(axis=0)) < 3 * se)


def test_train_degenerate_data_and_determinism():
    m = gaussian_energy(0.0, 1.0)
    data = np.full((50, 1), 2.0)
    cfg = CdConfig(k=10, step=0.05)
    out = train_cd(m, data, cfg, 0.1, 400, rng=0, trainable=[1.0, 0.0])
    assert out.theta[0] == pytest.approx(2.0, abs=0.05)
    assert out.theta[1] == 0.0
    again = train_cd(m, data, cfg, 0.1, 400, rng=0, trainable=[1.0, 0.0])
    assert np.array_equal(out.theta, again.theta)


def test_persistent_cd_runs():
    m = gaussian_energy(0.0, 1.0)
    data = np.random.default_rng(0).normal(1.0, 1.0, (200, 1))
    out = train_cd(m, data, CdConfig(k=5, step=0.05, persistent=True), 0.05, 300, rng=0)
    assert out.theta[0] == pytest.approx(data.mean(), abs=0.15)


def test_score_examples():
    m = gaussian_energy([0.0, 0.0], 1.0)
    np.testing.assert_allclose(score(m, [2.0, -3.0]), [-2.0, 3.0])
    np.testing.assert_array_equal(score(m, [0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_array_equal(score(m.shifted(7.0), [2.0, -3.0]), score(m, [2.0, -3.0]))
    assert unnorm_log_density(m.shifted(7.0), [0.0, 0.0]) == 7.0


def test_annealed_single_level_is_ula():
    m = gaussian_energy([1.0, -1.0], 0.7)
    x0 = np.random.default_rng(0).normal(size=(5, 2))
    a = annealed_score_langevin(lambda x: score(m, x), x0, 0.03, [1.0], 40, rng=8)
    b = ebm_ula_sample(m, x0, 0.03, 40, rng=8)
    assert np.array_equal(a, b)


def test_annealed_tiny_step_is_noise_only():
    rng = np.random.default_rng(1)
    z = np.random.default_rng(1).standard_normal((1, 2))
    c = 1e-12
    out = annealed_score_langevin(lambda x: -x, np.array([[1.0, 2.0]]), c, [1.0], 1, rng)
    np.testing.assert_allclose(out, [[1.0, 2.0]] + np.sqrt(2 * c) * z, atol=1e-15)


def test_annealed_schedule_validation():
    with pytest.raises(ConfigurationError):
        annealed_score_langevin(lambda x: -x, [0.0], 0.1, [4.0, 2.0], 5)
    with pytest.raises(ConfigurationError):
        annealed_score_langevin(lambda x: -x, [0.0], 0.1, [], 5)


def test_model_roundtrip_and_validation():
    m = quadratic_energy([[-1.0, 0.0], [0.0, -2.0]], [0.5, 0.0])
    back = model_from_dict(m.to_dict())
    x = np.array([0.3, -0.4])
    assert unnorm_log_density(back, x) == unnorm_log_density(m, x)
    with pytest.raises(ConfigurationError):
        quadratic_energy([[1.0]], [0.0])
    with pytest.raises(ConfigurationError):
        CdConfig(inner="gibbs")
    with pytest.raises(ConfigurationError):
        CdConfig.from_spec("ula:eps=0.1,sigma=2")
