import json
import warnings

import numpy as np
import pytest

from mcmckit.diagnostics import (acceptance_rate, autocorrelation, autocorrelation_function,
                                 diagnose, ess, grid_target_mass, histogram_tv, moments,
                                 tv_from_masses)
from mcmckit.exceptions import RejectedInputError, UndefinedVarianceError
from mcmckit.samplers import SamplerConfig, run_chain
from mcmckit.targets import make_target


def ar1(rho, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / np.sqrt(1 - rho * rho)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + e[i]
    return x


def test_acceptance_rate_extremes():
    assert acceptance_rate(np.ones(10, bool)) == 1.0
    assert acceptance_rate(np.zeros(10, bool)) == 0.0
    with pytest.raises(RejectedInputError):
        acceptance_rate([])


def test_autocorrelation_examples():
    x = np.random.default_rng(0).standard_normal(100_000)
    assert autocorrelation(x, 0) == 1.0
    assert abs(autocorrelation(x, 1)) < 3 / np.sqrt(x.size)
    assert autocorrelation(ar1(0.9, 100_000, 1), 1) == pytest.approx(0.9, abs=0.02)
    with pytest.raises(UndefinedVarianceError):
        autocorrelation(np.ones(50), 1)


def test_fft_acf_matches_direct_sum():
    x = ar1(0.5, 500, 2)
    rho = autocorrelation_function(x, 10)
    direct = [autocorrelation(x, k) for k in range(11)]
    np.testing.assert_allclose(rho, direct, atol=1e-12)


def test_ess_iid_and_pairs():
    x = np.random.default_rng(3).standard_normal(10_000)
    assert ess(x) == pytest.approx(10_000, rel=0.15)
    pairs = np.repeat(np.random.default_rng(4).standard_normal(5_000), 2)
    assert ess(pairs) == pytest.approx(5_000, rel=0.2)


def test_ess_ar1_oracle():
    rho = 0.8
    x = ar1(rho, 200_000, 5)
    # integrated autocorrelation time of AR(1) is (1 + rho) / (1 - rho)
    assert ess(x) == pytest.approx(x.size * (1 - rho) / (1 + rho), rel=0.1)


def test_ess_tiny_mh_steps():
    c = run_chain(SamplerConfig.mh(0.05), make_target("gaussian:dim=1"), [0.0], 20_000, seed=0)
    assert ess(c.samples[:, 0]) < c.samples.shape[0] / 10


def test_moments_examples():
    mean, cov = moments([[0.0, 0.0], [2.0, 2.0]])
    np.testing.assert_allclose(mean, [1.0, 1.0])
    _, cov = moments(np.tile([1.0, 2.0], (5, 1)))
    np.testing.assert_array_equal(cov, np.zeros((2, 2)))
    x = np.random.default_rng(6).standard_normal((100_000, 2))
    _, cov = moments(x)
    np.testing.assert_allclose(cov, np.eye(2), atol=0.05)


def test_histogram_tv_self_consistency():
    t = make_target("gaussian:dim=2")
    x = np.random.default_rng(7).standard_normal((100_000, 2))
    assert histogram_tv(x, t, [(-5, 5), (-5, 5)], 20) < 0.05


def test_histogram_tv_extremes():
    t = make_target("gaussian:dim=1,var=1000")
    x = np.full((1000, 1), 0.1)
    assert histogram_tv(x, t, [(-1, 1)], 100) > 0.95
    p = grid_target_mass(t, [(-1, 1)], 10)
    assert tv_from_masses(p, p) == 0.0


def test_histogram_tv_warns_when_grid_misses_mass():
    t = make_target("gaussian:dim=1")
    x = np.random.default_rng(8).standard_normal((1000, 1))
    with pytest.warns(RuntimeWarning):
        histogram_tv(x, t, [(2, 4)], 10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        histogram_tv(x, t, [(-6, 6)], 10)


def test_diagnose_report_json():
    t = make_target("gaussian:dim=2")
    c = run_chain(SamplerConfig.mh(1.0), t, [0, 0], 2000, seed=1)
    rep = diagnose(c, t, [(-4, 4), (-4, 4)], 10)
    payload = json.loads(rep.to_json(config={"seed": 1}))
    assert list(payload)[0] == "config"
    assert set(payload) >= {"acceptance_rate", "mean", "covariance", "ess_per_dim", "tv_distance"}
    assert rep.min_ess == min(rep.ess_per_dim)


def test_diagnose_batched_chains_sum_ess():
    t = make_target("gaussian:dim=1")
    c = run_chain(SamplerConfig.mh(2.0), t, np.zeros((4, 1)), 2000, seed=2)
    rep = diagnose(c)
    singles = [ess(c.samples[:, k, 0]) for k in range(4)]
    assert rep.ess_per_dim[0] == pytest.approx(sum(singles))
