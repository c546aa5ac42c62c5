"""Energy-based models: ``p_theta(x) = exp(f_theta(x)) / Z_theta``.

Nothing here evaluates ``Z_theta``. Sampling uses ``f`` differences or its
``x``-gradient (the score), and training uses contrastive divergence, where
the gradient of ``log Z`` is replaced by an average over MCMC negatives.
"""
from dataclasses import dataclass

import numpy as np

from ._spec import as_float, parse_spec
from ._validation import check_count, check_point, check_positive, check_rng
from .exceptions import ConfigurationError, DivergenceError
from .targets import sqnorm

DIVERGENCE_NORM = 1e8


class EnergyModel:
    """Parametric unnormalized log-density ``f(theta, x)`` with both gradients.

    ``f``, ``grad_x_f`` and ``grad_theta_f`` take ``theta`` and a point (or a
    batch of points along leading axes).
    """

    def __init__(self, theta, f, grad_x_f, grad_theta_f, dim, family="custom"):
        self.theta = np.array(theta, dtype=float)
        self.f = f
        self.grad_x_f = grad_x_f
        self.grad_theta_f = grad_theta_f
        self.dim = dim
        self.family = family

    def with_theta(self, theta):
        return EnergyModel(theta, self.f, self.grad_x_f, self.grad_theta_f, self.dim, self.family)

    def shifted(self, c):
        """Same model with ``c`` added to ``f`` (changes ``Z`` but not the distribution)."""
        f = self.f
        return EnergyModel(self.theta, lambda th, x: f(th, x) + c, self.grad_x_f,
                           self.grad_theta_f, self.dim, self.family)

    def to_dict(self):
        return {"family": self.family, "dim": self.dim, "theta": [float(t) for t in self.theta]}

    def __repr__(self):
        return f"EnergyModel(family={self.family!r}, theta={self.theta.tolist()})"


def gaussian_energy(mu=0.0, sigma=1.0, dim=None):
    """``f = -|x - mu|**2 / (2 sigma**2)`` with ``theta = (mu_1, ..., mu_d, log sigma)``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if dim is not None:
        mu = np.broadcast_to(mu, (dim,)).copy()
    sigma = check_positive(float(sigma), "sigma")
    d = mu.size

    def f(theta, x):
        inv_var = np.exp(-2.0 * theta[d])
        return -0.5 * sqnorm(np.asarray(x, dtype=float) - theta[:d]) * inv_var

    def grad_x(theta, x):
        return -(np.asarray(x, dtype=float) - theta[:d]) * np.exp(-2.0 * theta[d])

    def grad_theta(theta, x):
        diff = np.asarray(x, dtype=float) - theta[:d]
        inv_var = np.exp(-2.0 * theta[d])
        return np.concatenate([diff * inv_var, (sqnorm(diff) * inv_var)[..., None]], axis=-1)

    return EnergyModel(np.append(mu, np.log(sigma)), f, grad_x, grad_theta, d, "gaussian_energy")


def quadratic_energy(A, b):
    """``f = x^T A x + b^T x`` with ``theta = (A.ravel(), b)``; ``A + A^T`` must be negative definite."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = b.size
    if A.shape != (d, d):
        raise ConfigurationError("A", f"expected shape {(d, d)}, got {A.shape}")
    if np.max(np.linalg.eigvalsh(A + A.T)) >= 0:
        raise ConfigurationError("A", "symmetric part must be negative definite")

    def unpack(theta):
        return theta[: d * d].reshape(d, d), theta[d * d:]

    def f(theta, x):
        a, bb = unpack(theta)
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, a, x) + x @ bb

    def grad_x(theta, x):
        a, bb = unpack(theta)
        return np.asarray(x, dtype=float) @ (a + a.T).T + bb

    def grad_theta(theta, x):
        x = np.asarray(x, dtype=float)
        outer = (x[..., :, None] * x[..., None, :]).reshape(x.shape[:-1] + (d * d,))
        return np.concatenate([outer, x], axis=-1)

    return EnergyModel(np.concatenate([A.ravel(), b]), f, grad_x, grad_theta, d, "quadratic_form")


FAMILIES = {"gaussian_energy": gaussian_energy, "quadratic_form": quadratic_energy}


def model_from_dict(payload):
    """Rebuild a model saved with :meth:`EnergyModel.to_dict`."""
    family = payload.get("family")
    theta = np.asarray(payload.get("theta"), dtype=float)
    dim = int(payload.get("dim", 1))
    if family == "gaussian_energy":
        return gaussian_energy(np.zeros(dim)).with_theta(theta)
    if family == "quadratic_form":
        return quadratic_energy(-np.eye(dim), np.zeros(dim)).with_theta(theta)
    raise ConfigurationError("family", f"unknown energy family {family!r}")


def unnorm_log_density(model, x):
    """``f_theta(x)``, the log of the unnormalized density."""
    return model.f(model.theta, np.asarray(x, dtype=float))


def relative_importance(model, x, x2):
    """``p(x) / p(x2) = exp(f(x) - f(x2))``."""
    return np.exp(unnorm_log_density(model, x) - unnorm_log_density(model, x2))


def score(model, x):
    """``grad_x log p_theta(x) = grad_x f_theta(x)``."""
    return model.grad_x_f(model.theta, np.asarray(x, dtype=float))


def ebm_mh_acceptance(model, x, x_prime):
    """Probability of accepting ``x -> x_prime``: 1 uphill, ``exp(f(x') - f(x))`` downhill."""
    gap = unnorm_log_density(model, x_prime) - unnorm_log_density(model, x)
    return np.where(gap > 0, 1.0, np.exp(np.minimum(gap, 0.0)))


def ebm_mh_sample(model, x0, noise_sigma, steps, rng=None):
    """Random-walk sampler on ``f``: always take uphill moves, take downhill ones
    with probability ``exp(f(x') - f(x))``. Returns the final state.

    ``x0`` may be a batch of independent starting points.
    """
    check_positive(noise_sigma, "noise_sigma")
    steps = check_count(steps, "steps")
    x = check_point(x0, model.dim, name="x0")
    rng = check_rng(rng)
    theta = model.theta
    fx = model.f(theta, x)
    for _ in range(steps):
        prop = x + noise_sigma * rng.standard_normal(x.shape)
        u = rng.random(x.shape[:-1])
        fp = model.f(theta, prop)
        gap = fp - fx
        with np.errstate(over="ignore"):
            accept = (gap > 0) | (u < np.exp(np.minimum(gap, 0.0)))
        x = np.where(accept[..., None], prop, x)
        fx = np.where(accept, fp, fx)
    return x


def ebm_ula_sample(model, x0, eps, steps, rng=None):
    """``x + eps * grad_x f(x) + sqrt(2 eps) * z`` repeated ``steps`` times; no rejection."""
    check_positive(eps, "eps")
    steps = check_count(steps, "steps")
    x = check_point(x0, model.dim, name="x0")
    rng = check_rng(rng)
    theta, noise = model.theta, np.sqrt(2.0 * eps)
    for _ in range(steps):
        z = rng.standard_normal(x.shape)
        x = x + eps * model.grad_x_f(theta, x) + noise * z
    return x


@dataclass(frozen=True)
class CdConfig:
    """Contrastive-divergence settings.

    ``inner`` is ``"ula"`` (``step`` is eps) or ``"mh"`` (``step`` is the
    proposal sigma); negatives start at the data or at standard-normal noise.
    """

    k: int = 20
    inner: str = "ula"
    step: float = 0.01
    init: str = "from_data"
    persistent: bool = False

    def __post_init__(self):
        check_count(self.k, "k", minimum=0)
        if self.inner not in ("ula", "mh"):
            raise ConfigurationError("inner", f"expected 'ula' or 'mh', got {self.inner!r}")
        check_positive(self.step, "step")
        if self.init not in ("from_data", "from_noise"):
            raise ConfigurationError("init", f"expected 'from_data' or 'from_noise', got {self.init!r}")

    @classmethod
    def from_spec(cls, inner="ula:eps=0.01", k=20, init="from_data", persistent=False):
        spec = parse_spec(inner, field="inner")
        kind = spec.get("kind")
        key = {"ula": "eps", "mh": "sigma"}.get(kind)
        if key is None:
            raise ConfigurationError("inner", f"expected ula or mh, got {kind!r}")
        extra = set(spec) - {"kind", key}
        if extra:
            raise ConfigurationError(f"inner.{sorted(extra)[0]}", f"unknown parameter for {kind}")
        return cls(k=k, inner=kind, step=as_float(spec, key, 0.01 if kind == "ula" else 0.5, "inner."),
                   init=init, persistent=persistent)


def negative_samples(model, start, cfg, rng):
    """Run ``cfg.k`` inner MCMC steps from ``start`` (a batch of points)."""
    if cfg.k == 0:
        return np.array(start, dtype=float)
    if cfg.inner == "ula":
        return ebm_ula_sample(model, start, cfg.step, cfg.k, rng)
    return ebm_mh_sample(model, start, cfg.step, cfg.k, rng)


def cd_gradient(model, data_batch, cfg, rng=None, negatives_init=None, return_negatives=False):
    """Contrastive-divergence estimate of ``grad_theta`` of the mean log-likelihood.

    ``mean grad_theta f(data) - mean grad_theta f(negatives)``, one negative per
    data point. ``negatives_init`` overrides ``cfg.init`` (persistent chains).
    """
    batch = check_point(data_batch, model.dim, name="data_batch")
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.shape[0] == 0:
        raise ConfigurationError("data_batch", "must not be empty")
    rng = check_rng(rng)
    if negatives_init is not None:
        start = np.asarray(negatives_init, dtype=float)
    elif cfg.init == "from_data":
        start = batch
    else:
        start = rng.standard_normal(batch.shape)
    neg = negative_samples(model, start, cfg, rng)
    theta = model.theta
    grad = model.grad_theta_f(theta, batch).mean(axis=0) - model.grad_theta_f(theta, neg).mean(axis=0)
    return (grad, neg) if return_negatives else grad


def train_cd(model, data, cfg, eta, steps, rng=None, batch_size=None, trainable=None):
    """Gradient ascent ``theta += eta * cd_gradient`` for ``steps`` iterations.

    ``trainable`` is an optional boolean mask over ``theta``; frozen entries
    keep their value. Returns a new model.
    """
    check_positive(eta, "eta")
    steps = check_count(steps, "steps")
    data = check_point(data, model.dim, name="data")
    if data.ndim == 1:
        data = data[:, None] if model.dim == 1 else data[None, :]
    rng = check_rng(rng)
    mask = np.ones_like(model.theta) if trainable is None else np.asarray(trainable, dtype=float)
    current = model.with_theta(model.theta)
    persistent = None
    for it in range(steps):
        if batch_size is None or batch_size >= len(data):
            batch = data
        else:
            batch = data[rng.choice(len(data), size=batch_size, replace=False)]
        if cfg.persistent and persistent is not None and len(persistent) == len(batch):
            init = persistent
        else:
            init = None
        grad, neg = cd_gradient(current, batch, cfg, rng, negatives_init=init, return_negatives=True)
        persistent = neg if cfg.persistent else None
        theta = current.theta + eta * mask * grad
        if not np.all(np.isfinite(theta)) or np.linalg.norm(theta) > DIVERGENCE_NORM:
            raise DivergenceError(f"parameters diverged at iteration {it}")
        current = current.with_theta(theta)
    return current


def annealed_score_langevin(score_fn, x0, step_c, noise_levels, steps_per_level, rng=None):
    """Langevin updates ``x + c * score(x) / T + sqrt(2c) * z`` over decreasing levels ``T``.

    ``noise_levels`` must end at 1; each level runs ``steps_per_level``
    updates. ``x0`` may be a batch. Returns the final state.
    """
    check_positive(step_c, "step_c")
    steps_per_level = check_count(steps_per_level, "steps_per_level")
    levels = [float(t) for t in noise_levels]
    if not levels:
        raise ConfigurationError("noise_levels", "must not be empty")
    if any(not t >= 1 for t in levels) or levels[-1] != 1.0:
        raise ConfigurationError("noise_levels", "temperatures must be >= 1 and end at 1")
    x = np.array(x0, dtype=float)
    rng = check_rng(rng)
    noise = np.sqrt(2.0 * step_c)
    for temperature in levels:
        for _ in range(steps_per_level):
            z = rng.standard_normal(x.shape)
            x = x + step_c * (score_fn(x) / temperature) + noise * z
    return x
