"""Euler-Maruyama simulation of Brownian motion and Langevin diffusions."""
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count, check_point, check_positive, check_rng
from .exceptions import ConfigurationError, RejectedInputError

MAX_CONSTRAINT_RETRIES = 100


@dataclass
class SdePath:
    """A simulated trajectory, initial state included.

    ``points`` has shape ``(steps + 1, dim)``; the time of row ``i`` is ``i * dt``.
    """

    points: np.ndarray
    dt: float
    seed: object = None
    rejected_steps: int = field(default=0, compare=False)

    @property
    def times(self):
        return np.arange(len(self.points)) * self.dt

    def __len__(self):
        return len(self.points)


class RegionConstraint:
    """Pure indicator of an allowed region; ``contains(x)`` is True inside."""

    def __init__(self, indicator, name="custom"):
        self.indicator = indicator
        self.name = name

    def contains(self, x):
        return bool(self.indicator(np.asarray(x, dtype=float)))

    def __call__(self, x):
        return self.contains(x)

    @classmethod
    def disk(cls, radius, center=None):
        radius = check_positive(radius, "radius")
        c = None if center is None else np.asarray(center, dtype=float)

        def inside(x):
            d = x if c is None else x - c
            return np.dot(d, d) <= radius * radius

        return cls(inside, name=f"disk:radius={radius}")

    @classmethod
    def annulus(cls, inner, outer, center=None):
        """Band around a circle, the curve-following walk of a confined particle."""
        if not 0 <= inner < outer:
            raise ConfigurationError("inner", f"need 0 <= inner < outer, got {inner}, {outer}")
        c = None if center is None else np.asarray(center, dtype=float)

        def inside(x):
            d = x if c is None else x - c
            r2 = np.dot(d, d)
            return inner * inner <= r2 <= outer * outer

        return cls(inside, name=f"annulus:inner={inner},outer={outer}")


def euler_maruyama_step(x, drift, sigma, dt, rng=None, xi=None):
    """One step ``x + drift*dt + sigma*sqrt(dt)*xi`` with ``xi ~ N(0, I)``.

    ``xi`` may be supplied to replay a specific draw.
    """
    if not dt > 0:
        raise ConfigurationError("dt", f"must be > 0, got {dt!r}")
    if sigma < 0:
        raise ConfigurationError("sigma", f"must be >= 0, got {sigma!r}")
    x = np.asarray(x, dtype=float)
    if xi is None:
        xi = check_rng(rng).standard_normal(x.shape)
    return x + np.asarray(drift, dtype=float) * dt + sigma * np.sqrt(dt) * xi


def simulate_brownian(x0, steps, step_sigma, constraint=None, rng=None):
    """Gaussian random walk with per-step standard deviation ``step_sigma``.

    Each step is a unit of time (``dt = 1``), so ``Var(x_t - x_0) = t * step_sigma**2``
    for the free walk. ``x0`` may be a batch ``(n_paths, dim)`` when
    unconstrained; ``points`` then has shape ``(steps + 1, n_paths, dim)``.
    With a constraint, a step that leaves the region is
    redrawn up to ``MAX_CONSTRAINT_RETRIES`` times; after that the walker
    stays put for that step.
    """
    steps = check_count(steps, "steps")
    step_sigma = check_positive(step_sigma, "step_sigma")
    x = check_point(x0, name="x0")
    if constraint is not None and x.ndim != 1:
        raise RejectedInputError("constrained walks take a single starting point")
    if constraint is not None and not constraint(x):
        raise RejectedInputError("x0 violates the region constraint")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = check_rng(rng)
    points = np.empty((steps + 1,) + x.shape)
    points[0] = x
    if constraint is None:
        increments = step_sigma * rng.standard_normal((steps,) + x.shape)
        np.cumsum(increments, axis=0, out=points[1:])
        points[1:] += x
        return SdePath(points, 1.0, seed)
    stuck = 0
    for i in range(1, steps + 1):
        for _ in range(MAX_CONSTRAINT_RETRIES):
            candidate = x + step_sigma * rng.standard_normal(x.size)
            if constraint(candidate):
                x = candidate
                break
        else:
            stuck += 1
        points[i] = x
    return SdePath(points, 1.0, seed, stuck)


def simulate_langevin_sde(target, x0, steps, dt, rng=None):
    """Euler-Maruyama discretization of ``dx = grad log p(x) dt + sqrt(2) dW``."""
    steps = check_count(steps, "steps")
    if not dt > 0:
        raise ConfigurationError("dt", f"must be > 0, got {dt!r}")
    x = check_point(x0, target.dim, name="x0")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = check_rng(rng)
    points = np.empty((steps + 1,) + x.shape)
    points[0] = x
    sigma = np.sqrt(2.0)
    noise = rng.standard_normal((steps,) + x.shape)
    for i in range(steps):
        x = euler_maruyama_step(x, target._grad(x), sigma, dt, xi=noise[i])
        points[i + 1] = x
    return SdePath(points, float(dt), seed)
