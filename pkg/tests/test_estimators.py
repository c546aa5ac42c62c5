import numpy as np
import pytest
from sklearn.base import clone

from mcmckit.estimators import GaussianEBM, MCMCSampler, SGLDGaussianMean
from mcmckit.targets import make_target


def test_sampler_params_roundtrip():
    s = MCMCSampler(kind="hmc", step_size=0.1, leapfrog_steps=10, random_state=3)
    params = s.get_params()
    assert params["kind"] == "hmc" and params["leapfrog_steps"] == 10
    c = clone(s).set_params(step_size=0.2)
    assert c.step_size == 0.2 and s.step_size == 0.1


def test_sampler_sample_and_diagnose():
    t = make_target("gaussian:dim=2")
    s = MCMCSampler(kind="mala", step_size=0.8, burn_in=100, random_state=0)
    x = s.sample(t, [0.0, 0.0], 2000)
    assert x.shape == (1900, 2) and 0 < s.acceptance_rate_ < 1
    assert s.diagnose().min_ess > 50


def test_gaussian_ebm_fit():
    X = np.random.default_rng(0).normal(3.0, 1.0, size=(500, 1))
    m = GaussianEBM(n_iter=1500, random_state=1).fit(X)
    assert m.mean_[0] == pytest.approx(X.mean(), abs=0.1)
    scores = m.score_samples(np.array([[m.mean_[0]], [m.mean_[0] + 1.0]]))
    assert scores[0] == 0.0 and scores[1] < 0
    assert m.sample(5, n_steps=10).shape == (5, 1)


def test_sgld_mean_estimator():
    X = np.random.default_rng(2).normal(1.0, 1.0, size=30)
    est = SGLDGaussianMean(n_iter=60_000, random_state=0).fit(X)
    assert est.map_ == pytest.approx(est.model_.posterior_mean, abs=1e-10)
    assert est.posterior_mean_ == pytest.approx(est.model_.posterior_mean, abs=0.05)
    assert est.predict(np.zeros((3, 1))).shape == (3,)
