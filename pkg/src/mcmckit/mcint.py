"""Plain and multiple-importance-sampled Monte Carlo estimators."""
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import check_count, check_rng
from .exceptions import ConfigurationError, InconsistentStrategyError, RejectedInputError


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    n: int


class Strategy:
    """A sampling technique: ``sample(rng, n)`` draws and ``pdf(x)`` is its *normalized* density.

    Points are arrays of shape ``(n, dim)``; 1-D strategies may also return ``(n,)``.
    """

    def __init__(self, sample, pdf, dim=1, name="custom"):
        self._sample = sample
        self._pdf = pdf
        self.dim = dim
        self.name = name

    def sample(self, rng, n=1):
        return self._sample(rng, n)

    def pdf(self, x):
        return self._pdf(x)

    def __repr__(self):
        return f"Strategy({self.name})"


def _check_normalized(strategy, bounds, points=4001, rtol=1e-3):
    """Trapezoid check that a 1-D/2-D pdf integrates to 1 over ``bounds``."""
    axes = [np.linspace(lo, hi, points if strategy.dim == 1 else 801) for lo, hi in bounds]
    if strategy.dim == 1:
        total = np.trapezoid(strategy.pdf(axes[0]), axes[0])
    else:
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = strategy.pdf(mesh.reshape(-1, 2)).reshape(mesh.shape[:-1])
        total = np.trapezoid(np.trapezoid(vals, axes[1], axis=1), axes[0])
    if abs(total - 1.0) > rtol:
        raise ConfigurationError("strategy", f"{strategy.name} pdf integrates to {total:.6f}, not 1")
    return strategy


def gaussian_strategy(mean=0.0, sd=1.0, dim=1):
    """Isotropic Gaussian strategy; verified to integrate to 1 for ``dim <= 2``."""
    if not sd > 0:
        raise ConfigurationError("sd", f"must be > 0, got {sd!r}")
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (dim,)).copy()
    if dim == 1:
        dist = stats.norm(loc=mean[0], scale=sd)
        strat = Strategy(lambda rng, n: dist.rvs(size=n, random_state=rng),
                         dist.pdf, 1, f"gaussian(mean={mean[0]}, sd={sd})")
    else:
        dist = stats.multivariate_normal(mean=mean, cov=sd * sd)
        strat = Strategy(lambda rng, n: mean + sd * rng.standard_normal((n, dim)),
                         dist.pdf, dim, f"gaussian(mean={mean.tolist()}, sd={sd})")
    if dim <= 2:
        _check_normalized(strat, [(m - 12 * sd, m + 12 * sd) for m in mean])
    return strat


def uniform_strategy(low, high):
    """Uniform density on ``[low, high)`` in one dimension."""
    if not high > low:
        raise ConfigurationError("high", f"need high > low, got [{low}, {high})")
    dist = stats.uniform(loc=low, scale=high - low)
    strat = Strategy(lambda rng, n: dist.rvs(size=n, random_state=rng), dist.pdf, 1,
                     f"uniform({low}, {high})")
    return _check_normalized(strat, [(low - 1e-9, high + 1e-9)], points=200001, rtol=1e-3)


def mc_estimate(f, strategy, n, rng=None):
    """Importance-sampling estimate ``mean(f(x_i) / p(x_i))`` with ``x_i ~ strategy``.

    ``std_error`` is the sample standard deviation over ``sqrt(n)`` (0 when ``n == 1``).
    """
    n = check_count(n, "n")
    rng = check_rng(rng)
    x = strategy.sample(rng, n)
    p = np.asarray(strategy.pdf(x), dtype=float)
    if np.any(p <= 0):
        raise InconsistentStrategyError(f"{strategy!r} drew a point where its pdf is 0")
    ratios = np.asarray(f(x), dtype=float) / p
    return _summarize(ratios)


def _summarize(values):
    n = values.size
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    return Estimate(float(values.mean()), sd / np.sqrt(n), n)


def balance_weights(densities):
    """Balance-heuristic weights ``p_i / sum_j p_j``.

    ``densities`` has the strategies on the last axis, so a ``(n, k)`` array
    gives one weight vector per evaluated point.
    """
    d = np.asarray(densities, dtype=float)
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise RejectedInputError("densities must be finite and non-negative")
    total = d.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise RejectedInputError("at least one density must be positive")
    return d / total


def mis_contributions(f, strategies, n_per_strategy, rng=None):
    """Per-round one-sample MIS contributions and the weights used.

    Returns ``(contrib, weights)`` with ``contrib`` of shape ``(n,)`` and
    ``weights`` of shape ``(n, k, k)``: ``weights[r, i]`` are the balance
    weights of all ``k`` strategies at the point strategy ``i`` drew in round ``r``.
    """
    if len(strategies) < 2:
        raise ConfigurationError("strategies", "multiple importance sampling needs at least 2")
    n = check_count(n_per_strategy, "n_per_strategy")
    rng = check_rng(rng)
    k = len(strategies)
    contrib = np.zeros(n)
    weights = np.empty((n, k, k))
    for i, strat in enumerate(strategies):
        x = strat.sample(rng, n)
        dens = np.stack([np.asarray(s.pdf(x), dtype=float) for s in strategies], axis=-1)
        if np.any(dens[:, i] <= 0):
            raise InconsistentStrategyError(f"{strat!r} drew a point where its pdf is 0")
        w = balance_weights(dens)
        weights[:, i] = w
        contrib += w[:, i] * np.asarray(f(x), dtype=float) / dens[:, i]
    return contrib, weights


def mis_estimate(f, strategies, n_per_strategy, rng=None):
    """One-sample-per-strategy MIS estimator with balance-heuristic weights."""
    contrib, _ = mis_contributions(f, strategies, n_per_strategy, rng)
    return _summarize(contrib)


def two_bump(narrow=(1.0, 0.1, 0.3), wide=(0.0, 2.0, 0.7)):
    """Integrand made of a narrow and a wide Gaussian bump, with matching strategies.

    Each tuple is ``(center, sd, mass)``. Returns ``(f, integral, strategies)``.
    """
    (c1, s1, a1), (c2, s2, a2) = narrow, wide
    n1, n2 = stats.norm(c1, s1), stats.norm(c2, s2)

    def f(x):
        return a1 * n1.pdf(x) + a2 * n2.pdf(x)

    return f, a1 + a2, [gaussian_strategy(c1, s1), gaussian_strategy(c2, s2)]
