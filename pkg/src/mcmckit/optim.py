"""SGD and SGLD updates, MAP estimation and SGLD posterior sampling."""
from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_point, check_positive, check_rng
from .exceptions import ConfigurationError, DivergenceError

DIVERGENCE_NORM = 1e8


class ObjectiveGradient:
    """Gradient of a loss (or negative log-posterior) as a callable of ``theta``."""

    def __init__(self, grad, dim):
        self.grad = grad
        self.dim = check_count(dim, "dim")

    def __call__(self, theta):
        return np.asarray(self.grad(theta), dtype=float)


def _as_gradient(g, theta):
    if isinstance(g, ObjectiveGradient):
        return g
    return ObjectiveGradient(g, np.shape(theta)[-1])


@dataclass
class OptimizerTrace:
    thetas: np.ndarray
    eta: float
    seed: object = None
    burn_in: int = 0


def sgd_step(theta, g, eta):
    """``theta - eta * grad(theta)``."""
    check_positive(eta, "eta")
    theta = np.asarray(theta, dtype=float)
    return theta - eta * np.asarray(g(theta), dtype=float)


def sgld_step(theta, g, eta, rng=None, xi=None):
    """``theta - eta/2 * grad(theta) + sqrt(eta) * xi`` with ``xi ~ N(0, I)``."""
    check_positive(eta, "eta")
    theta = np.asarray(theta, dtype=float)
    if xi is None:
        xi = check_rng(rng).standard_normal(theta.shape)
    return theta - (eta / 2) * np.asarray(g(theta), dtype=float) + np.sqrt(eta) * xi


def _guard(theta, it):
    if not np.all(np.isfinite(theta)) or np.linalg.norm(theta) > DIVERGENCE_NORM:
        raise DivergenceError(f"parameters diverged at iteration {it} (|theta| > {DIVERGENCE_NORM:g})")


def map_estimate(neg_log_post_grad, theta0, eta, iters):
    """Run ``iters`` gradient-descent steps on the negative log-posterior."""
    check_positive(eta, "eta")
    iters = check_count(iters, "iters")
    theta = check_point(theta0, name="theta0")
    g = _as_gradient(neg_log_post_grad, theta)
    for it in range(iters):
        theta = theta - eta * g(theta)
        _guard(theta, it)
    return theta


def sgld_sample_posterior(neg_log_post_grad, theta0, eta, total, burn_in=0, seed=0,
                          noise=True):
    """SGLD chain on the negative log-posterior; keeps the iterates after ``burn_in``.

    With ``noise=False`` the random term is dropped (a gradient-descent run at
    rate ``eta / 2``).
    """
    check_positive(eta, "eta")
    total = check_count(total, "total")
    burn_in = check_count(burn_in, "burn_in", minimum=0)
    if burn_in >= total:
        raise ConfigurationError("burn_in", f"must be < total ({total}), got {burn_in}")
    theta = check_point(theta0, name="theta0")
    g = _as_gradient(neg_log_post_grad, theta)
    rng = check_rng(seed)
    thetas = np.empty((total - burn_in,) + theta.shape)
    half, scale = eta / 2, np.sqrt(eta)
    block = 8192
    with np.errstate(over="ignore", invalid="ignore"):
        _run_blocks(theta, g, half, scale, rng, thetas, total, burn_in, block, noise)
    return OptimizerTrace(thetas, float(eta), seed, burn_in)


def _run_blocks(theta, g, half, scale, rng, thetas, total, burn_in, block, noise):
    for start in range(0, total, block):
        nb = min(block, total - start)
        xi = rng.standard_normal((nb,) + theta.shape) if noise else np.zeros((nb,) + theta.shape)
        for j in range(nb):
            theta = theta - half * g(theta) + scale * xi[j]
            i = start + j
            if not (i & 0x3FF):
                _guard(theta, i)
            if i >= burn_in:
                thetas[i - burn_in] = theta
    _guard(theta, total)


def gradient_noise(grad, scale, rng=None):
    """Wrap ``grad`` with additive Gaussian noise, mimicking mini-batch gradients."""
    scale = check_positive(scale, "scale", strict=False)
    rng = check_rng(rng)

    def noisy(theta):
        g = np.asarray(grad(theta), dtype=float)
        return g + scale * rng.standard_normal(g.shape)

    return noisy


class ConjugateGaussianModel:
    """Observations ``x_i ~ N(theta, noise_var)`` with prior ``theta ~ N(prior_mean, prior_var)``.

    Scalar ``theta``; exposes the closed-form posterior and the gradient of
    the negative log-posterior.
    """

    def __init__(self, data, prior_var=1.0, noise_var=1.0, prior_mean=0.0):
        self.data = np.asarray(data, dtype=float).ravel()
        self.prior_var = check_positive(prior_var, "prior_var")
        self.noise_var = check_positive(noise_var, "noise_var")
        self.prior_mean = float(prior_mean)
        self.n = self.data.size
        self._sum = float(self.data.sum())

    @property
    def posterior_precision(self):
        return self.n / self.noise_var + 1.0 / self.prior_var

    @property
    def posterior_var(self):
        return 1.0 / self.posterior_precision

    @property
    def posterior_mean(self):
        return self.posterior_var * (self._sum / self.noise_var + self.prior_mean / self.prior_var)

    def neg_log_posterior_grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (self.n * theta - self._sum) / self.noise_var + (theta - self.prior_mean) / self.prior_var

    def gradient(self):
        return ObjectiveGradient(self.neg_log_posterior_grad, 1)
