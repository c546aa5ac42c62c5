"""Primary-sample-space Metropolis light transport over a black-box estimator.

The estimator maps a point ``u`` of the unit hypercube to an image position
``(px, py)`` and a non-negative brightness. A Metropolis-Hastings chain on
``u`` with target proportional to brightness produces a 2-D histogram of
image positions; its global scale is then fixed by a plain MC estimate of
the mean brightness.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_positive, check_rng
from .exceptions import ConfigurationError, DegenerateIntegrandError, RejectedInputError

MAX_INIT_TRIES = 1_000_000
_BLOCK = 8192


class BlackBoxEstimator:
    """``eval(u) -> (px, py, brightness)`` for ``u`` of shape ``(dim,)`` or ``(n, dim)``.

    ``fn`` must be pure and vectorized over leading axes.
    """

    def __init__(self, dim, fn, name="custom"):
        self.dim = check_count(dim, "dim", minimum=2)
        self._fn = fn
        self.name = name

    def eval(self, u):
        px, py, b = self._fn(np.asarray(u, dtype=float))
        return px, py, b

    def brightness(self, u):
        return self.eval(u)[2]

    def __repr__(self):
        return f"BlackBoxEstimator({self.name}, dim={self.dim})"


@dataclass
class Image:
    """Row-major ``height x width`` grid of non-negative accumulators."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float).reshape(self.height, self.width)
        if not np.all(np.isfinite(self.pixels)) or np.any(self.pixels < 0):
            raise RejectedInputError("pixels must be finite and non-negative")

    @classmethod
    def blank(cls, width, height):
        return cls(width, height, np.zeros((height, width)))

    def mass(self):
        """Pixels as a probability histogram."""
        total = self.pixels.sum()
        if not total > 0:
            raise DegenerateIntegrandError("image is empty")
        return self.pixels / total

    def __add__(self, other):
        if (self.width, self.height) != (other.width, other.height):
            raise RejectedInputError("image sizes differ")
        return Image(self.width, self.height, self.pixels + other.pixels)


def wrap_unit(v):
    """Map reals into ``[0, 1)`` modulo 1."""
    v = np.asarray(v, dtype=float)
    w = v - np.floor(v)
    # tiny negative inputs round up to exactly 1.0
    return np.where(w >= 1.0, 0.0, w)


def small_step(u, sigma, rng=None, xi=None):
    """Local mutation: Gaussian perturbation of every coordinate, wrapped into [0, 1)."""
    check_positive(sigma, "sigma")
    u = np.asarray(u, dtype=float)
    if xi is None:
        xi = check_rng(rng).standard_normal(u.shape)
    return wrap_unit(u + sigma * xi)


def large_step(dim, rng=None):
    """Independence mutation: fresh uniform coordinates."""
    dim = check_count(dim, "dim")
    return check_rng(rng).random(dim)


def wrapped_normal_density(delta, sigma, images=20):
    """Density of a wrapped-normal increment on the unit circle, by summing images."""
    k = np.arange(-images, images + 1)
    d = np.asarray(delta, dtype=float)[..., None] + k
    return np.exp(-0.5 * (d / sigma) ** 2).sum(axis=-1) / (sigma * np.sqrt(2 * np.pi))


def pixel_index(px, py, width, height):
    ix = np.minimum((np.asarray(px) * width).astype(int), width - 1)
    iy = np.minimum((np.asarray(py) * height).astype(int), height - 1)
    return iy, ix


def _flat_index(px, py, width, height):
    ix = int(px * width)
    iy = int(py * height)
    return (iy if iy < height else height - 1) * width + (ix if ix < width else width - 1)


def _initial_state(est, rng):
    for _ in range(MAX_INIT_TRIES):
        u = rng.random(est.dim)
        px, py, b = est.eval(u)
        if b > 0:
            return u, px, py, float(b)
    raise DegenerateIntegrandError(
        f"no state with positive brightness found in {MAX_INIT_TRIES} large steps")


def pssmlt_render(est, width, height, n_mutations, large_step_prob=0.3, sigma=0.05,
                  seed=0, splat="expected"):
    """Run the primary-sample-space chain and return the unnormalized histogram image.

    With ``splat="expected"`` every mutation deposits weight ``1 - a`` at the
    current state and ``a`` at the proposal, ``a`` being the acceptance
    probability. ``splat="accepted"`` deposits 1 at the state after the
    accept/reject decision.
    """
    width = check_count(width, "width")
    height = check_count(height, "height")
    n_mutations = check_count(n_mutations, "n_mutations")
    if not 0 < large_step_prob <= 1:
        raise ConfigurationError("large_step_prob", f"must be in (0, 1], got {large_step_prob!r}")
    sigma = check_positive(sigma, "sigma")
    if splat not in ("expected", "accepted"):
        raise ConfigurationError("splat", f"expected 'expected' or 'accepted', got {splat!r}")
    rng = check_rng(seed)

    u, px, py, b = _initial_state(est, rng)
    film = np.zeros(height * width)
    expected = splat == "expected"
    dim = est.dim
    evaluate = est._fn
    cur = _flat_index(px, py, width, height)
    for start in range(0, n_mutations, _BLOCK):
        nb = min(_BLOCK, n_mutations - start)
        is_large = rng.random(nb) < large_step_prob
        fresh = rng.random((nb, dim))
        noise = rng.standard_normal((nb, dim))
        accept_u = rng.random(nb)
        for j in range(nb):
            if is_large[j]:
                v = fresh[j]
            else:
                v = u + sigma * noise[j]
                v -= np.floor(v)
                v[v >= 1.0] = 0.0
            qx, qy, bv = evaluate(v)
            bv = float(bv)
            a = bv / b if bv < b else 1.0
            prop = _flat_index(qx, qy, width, height)
            if expected:
                film[cur] += 1.0 - a
                film[prop] += a
            if accept_u[j] < a:
                u, b, cur = v, bv, prop
            if not expected:
                film[cur] += 1.0
    return Image(width, height, film.reshape(height, width))


def mc_mean_brightness(est, n_mc, rng=None, chunk=1_000_000):
    """Plain MC estimate of the mean brightness over uniform ``u``."""
    n_mc = check_count(n_mc, "n_mc")
    rng = check_rng(rng)
    total = 0.0
    for start in range(0, n_mc, chunk):
        m = min(chunk, n_mc - start)
        total += float(np.sum(est.brightness(rng.random((m, est.dim)))))
    return total / n_mc


def normalize_image(img, est, n_mc, rng=None):
    """Scale ``img`` so its mean pixel equals the MC estimate of mean brightness."""
    level = mc_mean_brightness(est, n_mc, rng)
    if not level > 0:
        raise DegenerateIntegrandError("MC estimate of the integral is not positive")
    mean_pixel = img.pixels.mean()
    if not mean_pixel > 0:
        raise DegenerateIntegrandError("image is empty but the integrand is positive")
    return Image(img.width, img.height, img.pixels * (level / mean_pixel))


def plain_mc_image(est, width, height, n, rng=None, chunk=1_000_000):
    """Reference image: average of brightness splatted at uniformly drawn ``u``.

    Each pixel holds the mean brightness per unit of image area, matching the
    scale of :func:`normalize_image`.
    """
    n = check_count(n, "n")
    rng = check_rng(rng)
    film = np.zeros(height * width)
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        px, py, b = est.eval(rng.random((m, est.dim)))
        iy, ix = pixel_index(px, py, width, height)
        film += np.bincount(iy * width + ix, weights=b, minlength=height * width)
    return Image(width, height, film.reshape(height, width) * (width * height / n))


# --- built-in integrands -------------------------------------------------------


def constant_estimator(c=1.0, dim=2):
    """Brightness ``c`` everywhere; the calibration case."""
    if not c > 0:
        raise ConfigurationError("c", f"must be > 0, got {c!r}")

    def fn(u):
        return u[..., 0], u[..., 1], np.full(u.shape[:-1], float(c))

    return BlackBoxEstimator(dim, fn, f"constant:c={c}")


def spike_estimator(width=0.02, radius=0.3, center=(0.5, 0.5), dim=2):
    """Narrow Gaussian ridge of the given width along a circle in the image plane."""
    if not width > 0:
        raise ConfigurationError("width", f"must be > 0, got {width!r}")
    cx, cy = center

    def fn(u):
        px, py = u[..., 0], u[..., 1]
        r = np.hypot(px - cx, py - cy)
        return px, py, np.exp(-0.5 * ((r - radius) / width) ** 2)

    return BlackBoxEstimator(dim, fn, f"spike:width={width}")


def two_island_estimator(centers=((0.25, 0.25), (0.75, 0.7)), widths=(0.04, 0.04),
                         heights=(1.0, 2.0), dim=2):
    """Two isolated Gaussian blobs that local mutations alone cannot hop between."""
    centers = np.asarray(centers, dtype=float)
    widths = np.asarray(widths, dtype=float)
    heights = np.asarray(heights, dtype=float)

    def fn(u):
        px, py = u[..., 0], u[..., 1]
        b = np.zeros(np.shape(px))
        for (cx, cy), w, h in zip(centers, widths, heights):
            b = b + h * np.exp(-0.5 * ((px - cx) ** 2 + (py - cy) ** 2) / (w * w))
        return px, py, b

    est = BlackBoxEstimator(dim, fn, "two-island")
    # analytic island masses (each blob is far from the unit-square edges)
    est.island_masses = heights * 2 * np.pi * widths ** 2
    est.island_centers = centers
    return est


def half_plane_estimator(dim=2):
    """Unit brightness on ``px < 0.5`` and zero elsewhere."""

    def fn(u):
        px = u[..., 0]
        return px, u[..., 1], (px < 0.5).astype(float)

    return BlackBoxEstimator(dim, fn, "half-plane")


ESTIMATORS = {
    "constant": constant_estimator,
    "spike": spike_estimator,
    "two-island": two_island_estimator,
    "half-plane": half_plane_estimator,
}


def make_estimator(name, **params):
    try:
        factory = ESTIMATORS[name]
    except KeyError:
        raise ConfigurationError("estimator.kind",
                                 f"unknown estimator {name!r}; expected one of {sorted(ESTIMATORS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError("estimator", str(exc)) from None
