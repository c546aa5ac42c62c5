"""scikit-learn style wrappers around the functional API.

Samplers are configured in ``__init__`` and expose ``get_params`` /
``set_params``; the model-fitting pieces (EBM, Bayesian mean) follow the
``fit`` / ``score_samples`` / ``sample`` convention of density estimators.
"""
import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from . import ebm as _ebm
from .diagnostics import diagnose
from .optim import ConjugateGaussianModel, map_estimate, sgld_sample_posterior
from .samplers import SamplerConfig, TemperatureSchedule, run_chain


class MCMCSampler(BaseEstimator):
    """Markov chain sampler over a :class:`~mcmckit.targets.TargetDensity`.

    Parameters
    ----------
    kind : {"mh", "ula", "mala", "hmc", "almc"}
    step_size : float
        Proposal sigma (mh), tau (Langevin kinds) or eps (hmc).
    leapfrog_steps : int
        Only used by hmc.
    t_max, n_levels, steps_per_level
        Geometric temperature schedule, only used by almc.
    burn_in, thin, random_state
        Passed to :func:`~mcmckit.samplers.run_chain`.
    """

    def __init__(self, kind="mh", step_size=1.0, leapfrog_steps=20, t_max=10.0, n_levels=10,
                 steps_per_level=100, burn_in=0, thin=1, random_state=0):
        self.kind = kind
        self.step_size = step_size
        self.leapfrog_steps = leapfrog_steps
        self.t_max = t_max
        self.n_levels = n_levels
        self.steps_per_level = steps_per_level
        self.burn_in = burn_in
        self.thin = thin
        self.random_state = random_state

    def config(self):
        if self.kind == "almc":
            schedule = TemperatureSchedule.geometric(self.t_max, self.n_levels, self.steps_per_level)
            return SamplerConfig.almc(self.step_size, schedule)
        leapfrog = self.leapfrog_steps if self.kind == "hmc" else 1
        return SamplerConfig(self.kind, self.step_size, leapfrog)

    def sample(self, target, x0, n_steps):
        """Run the chain; the :class:`~mcmckit.samplers.Chain` is stored as ``chain_``."""
        self.chain_ = run_chain(self.config(), target, x0, n_steps, self.burn_in, self.thin,
                                self.random_state)
        self.acceptance_rate_ = self.chain_.acceptance_rate
        return self.chain_.samples

    def diagnose(self, target=None, bounds=None, bins=None):
        if not hasattr(self, "chain_"):
            raise NotFittedError("call sample() before diagnose()")
        return diagnose(self.chain_, target, bounds, bins)


class GaussianEBM(DensityMixin, BaseEstimator):
    """Gaussian energy model ``f = -|x - mu|^2 / (2 sigma^2)`` trained by contrastive divergence."""

    def __init__(self, k=20, inner="ula", step=0.05, init="from_data", persistent=False,
                 learning_rate=0.05, n_iter=2000, batch_size=200, random_state=0):
        self.k = k
        self.inner = inner
        self.step = step
        self.init = init
        self.persistent = persistent
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        cfg = _ebm.CdConfig(self.k, self.inner, self.step, self.init, self.persistent)
        start = _ebm.gaussian_energy(np.zeros(X.shape[1]), 1.0)
        self.model_ = _ebm.train_cd(start, X, cfg, self.learning_rate, self.n_iter,
                                    self.random_state, self.batch_size)
        self.mean_ = self.model_.theta[:-1].copy()
        self.sigma_ = float(np.exp(self.model_.theta[-1]))
        return self

    def score_samples(self, X):
        """Unnormalized log-density ``f(x)`` (no partition function)."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        return _ebm.unnorm_log_density(self.model_, X)

    def sample(self, n_samples=1, n_steps=500, eps=0.01, random_state=None):
        check_is_fitted(self, "model_")
        rng = np.random.default_rng(self.random_state if random_state is None else random_state)
        x0 = rng.standard_normal((n_samples, self.n_features_in_))
        return _ebm.ebm_ula_sample(self.model_, x0, eps, n_steps, rng)


class SGLDGaussianMean(BaseEstimator):
    """Posterior over the mean of 1-D Gaussian data, sampled with SGLD.

    After ``fit``: ``samples_`` (post-burn-in draws), ``posterior_mean_``,
    ``posterior_var_`` (sample moments) and ``map_`` (gradient descent).
    """

    def __init__(self, prior_var=1.0, noise_var=1.0, learning_rate=1e-3, n_iter=100_000,
                 burn_in=1000, random_state=0):
        self.prior_var = prior_var
        self.noise_var = noise_var
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False).ravel()
        self.model_ = ConjugateGaussianModel(X, self.prior_var, self.noise_var)
        grad = self.model_.gradient()
        # step of half the inverse curvature: contraction 0.5 per iteration
        self.map_ = float(map_estimate(grad, [0.0], 0.5 * self.model_.posterior_var, 200)[0])
        trace = sgld_sample_posterior(grad, [self.map_], self.learning_rate, self.n_iter,
                                      self.burn_in, self.random_state)
        self.samples_ = trace.thetas[:, 0]
        self.posterior_mean_ = float(self.samples_.mean())
        self.posterior_var_ = float(self.samples_.var(ddof=1))
        return self

    def predict(self, X=None):
        """Posterior mean of the data mean (the same for every query)."""
        check_is_fitted(self, "samples_")
        n = 1 if X is None else len(X)
        return np.full(n, self.posterior_mean_)
