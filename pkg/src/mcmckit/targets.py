"""Analytic target densities with exact gradients.

Every target works with *unnormalized* log-densities. Inputs may be a single
point of shape ``(dim,)`` or a batch of shape ``(..., dim)``; outputs follow
the leading shape.

    >>> from mcmckit.targets import make_target
    >>> t = make_target("gaussian:dim=2")
    >>> float(t.log_density([1.0, 1.0]))
    -1.0
"""
import numpy as np
from scipy.special import logsumexp, ndtr

from ._spec import as_array, as_float, as_int, parse_spec
from ._validation import check_dim
from .exceptions import ConfigurationError


class TargetDensity:
    """Base class: subclasses implement ``_log_density`` and ``_grad``."""

    kind = "abstract"

    def __init__(self, dim, log_norm_const=None):
        self.dim = int(dim)
        self.log_norm_const = log_norm_const

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        check_dim(x, self.dim)
        return self._log_density(x)

    def grad_log_density(self, x):
        x = np.asarray(x, dtype=float)
        check_dim(x, self.dim)
        return self._grad(x)

    def params(self):
        """Plain-Python description, round-trippable through :func:`make_target`."""
        return {"kind": self.kind, "dim": self.dim}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items() if k != "kind")
        return f"{type(self).__name__}({args})"


def sqnorm(a, weights=None):
    """Sum of squares over the last axis (``a @ a`` for a single vector).

    ``weights`` divides each square, ``sum(a**2 / weights)``.
    """
    b = a if weights is None else a / weights
    if a.ndim == 1:
        return a.dot(b)
    return np.einsum("...i,...i->...", a, b)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Gaussian(TargetDensity):
    """Axis-aligned Gaussian, ``log p = -0.5 * sum((x - mean)**2 / var)``."""

    kind = "gaussian"

    def __init__(self, mean=0.0, var=1.0, dim=None):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        var = np.atleast_1d(np.asarray(var, dtype=float))
        if dim is None:
            dim = max(mean.size, var.size)
        if dim < 1:
            raise ConfigurationError("dim", f"must be >= 1, got {dim}")
        try:
            mean = np.broadcast_to(mean, (dim,))
        except ValueError:
            raise ConfigurationError("mean", f"length {mean.size} does not match dim={dim}") from None
        try:
            var = np.broadcast_to(var, (dim,))
        except ValueError:
            raise ConfigurationError("var", f"length {var.size} does not match dim={dim}") from None
        if not np.all(np.isfinite(mean)):
            raise ConfigurationError("mean", "must be finite")
        if not np.all(np.isfinite(var)) or np.any(var <= 0):
            raise ConfigurationError("var", "covariance diagonal must be > 0")
        self.mean = _frozen(mean)
        self.var = _frozen(var)
        super().__init__(dim, 0.5 * float(np.sum(np.log(2.0 * np.pi * self.var))))

    def _log_density(self, x):
        return -0.5 * sqnorm(x - self.mean, self.var)

    def _grad(self, x):
        return -(x - self.mean) / self.var

    def params(self):
        return {"kind": self.kind, "dim": self.dim,
                "mean": self.mean.tolist(), "var": self.var.tolist()}


class GaussianMixture(TargetDensity):
    """Mixture of axis-aligned Gaussians.

    Components keep their relative normalizers (``-0.5*sum(log var)``) so the
    weights mean what they say; only the shared ``(2*pi)**(dim/2)`` factor
    is dropped. A one-component mixture with unit variances is therefore
    identical to :class:`Gaussian`.
    """

    kind = "mixture"

    def __init__(self, weights, means, var=1.0):
        weights = np.atleast_1d(np.asarray(weights, dtype=float))
        means = np.asarray(means, dtype=float)
        if means.ndim == 1:
            means = means.reshape(-1, 1) if weights.size > 1 or means.size == 1 else means[None, :]
        if means.ndim != 2 or means.shape[0] != weights.size:
            raise ConfigurationError(
                "means", f"need one row per weight ({weights.size}), got shape {means.shape}")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise ConfigurationError("weights", "must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigurationError("weights", f"must sum to 1, got {weights.sum()!r}")
        if not np.all(np.isfinite(means)):
            raise ConfigurationError("means", "must be finite")
        try:
            var = np.broadcast_to(np.asarray(var, dtype=float), means.shape)
        except ValueError:
            raise ConfigurationError("var", f"cannot broadcast to {means.shape}") from None
        if not np.all(np.isfinite(var)) or np.any(var <= 0):
            raise ConfigurationError("var", "component variances must be > 0")
        dim = means.shape[1]
        self.weights = _frozen(weights)
        self.means = _frozen(means)
        self.var = _frozen(var)
        self._log_coef = _frozen(np.log(weights) - 0.5 * np.sum(np.log(var), axis=1))
        super().__init__(dim, 0.5 * dim * np.log(2.0 * np.pi))

    def _component_logs(self, x):
        diff = x[..., None, :] - self.means
        return self._log_coef - 0.5 * np.einsum("...ki,...ki->...k", diff, diff / self.var), diff

    def _log_density(self, x):
        logs, _ = self._component_logs(x)
        return logsumexp(logs, axis=-1)

    def _grad(self, x):
        logs, diff = self._component_logs(x)
        resp = np.exp(logs - logsumexp(logs, axis=-1, keepdims=True))
        return -np.sum(resp[..., None] * diff / self.var, axis=-2)

    def params(self):
        return {"kind": self.kind, "dim": self.dim, "weights": self.weights.tolist(),
                "means": self.means.tolist(), "var": self.var.tolist()}


class Ring(TargetDensity):
    """Annulus, ``log p = -(|x| - radius)**2 / (2 * width**2)``."""

    kind = "ring"

    def __init__(self, radius=2.0, width=0.25, dim=2):
        if not np.isfinite(radius) or radius <= 0:
            raise ConfigurationError("radius", f"must be > 0, got {radius!r}")
        if not np.isfinite(width) or width <= 0:
            raise ConfigurationError("width", f"must be > 0, got {width!r}")
        if dim < 1:
            raise ConfigurationError("dim", f"must be >= 1, got {dim}")
        self.radius = float(radius)
        self.width = float(width)
        log_z = None
        if dim == 2:
            r, w = self.radius, self.width
            # 2*pi * int_0^inf rho * exp(-(rho - r)^2 / 2w^2) d rho
            inner = w * w * np.exp(-0.5 * (r / w) ** 2) + r * w * np.sqrt(2 * np.pi) * ndtr(r / w)
            log_z = float(np.log(2.0 * np.pi * inner))
        super().__init__(dim, log_z)

    def _log_density(self, x):
        r = np.linalg.norm(x, axis=-1)
        return -0.5 * ((r - self.radius) / self.width) ** 2

    def _grad(self, x):
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        # the radial direction is undefined at the origin; the gradient is taken as 0 there
        safe = np.where(r > 0, r, 1.0)
        scale = np.where(r > 0, -(r - self.radius) / (self.width ** 2 * safe), 0.0)
        return scale * x

    def params(self):
        return {"kind": self.kind, "dim": self.dim, "radius": self.radius, "width": self.width}


class Banana(TargetDensity):
    """Twisted Gaussian in 2D.

    With ``y1 = x1`` and ``y2 = x2 - b*x1**2 + b*s**2``, ``y`` is distributed
    as ``N(0, diag(s**2, 1))``. The map has unit Jacobian, so the normalizer
    is ``2*pi*s``.
    """

    kind = "banana"

    def __init__(self, curvature=0.5, scale=2.0):
        if not np.isfinite(curvature):
            raise ConfigurationError("curvature", "must be finite")
        if not np.isfinite(scale) or scale <= 0:
            raise ConfigurationError("scale", f"must be > 0, got {scale!r}")
        self.curvature = float(curvature)
        self.scale = float(scale)
        super().__init__(2, float(np.log(2.0 * np.pi * self.scale)))

    def _twist(self, x):
        b, s = self.curvature, self.scale
        return x[..., 1] - b * x[..., 0] ** 2 + b * s * s

    def _log_density(self, x):
        y2 = self._twist(x)
        return -0.5 * (x[..., 0] / self.scale) ** 2 - 0.5 * y2 ** 2

    def _grad(self, x):
        y2 = self._twist(x)
        g0 = -x[..., 0] / self.scale ** 2 + 2.0 * self.curvature * x[..., 0] * y2
        return np.stack([g0, -y2], axis=-1)

    def sample(self, n, rng):
        """Exact i.i.d. draws (used as a reference by tests and diagnostics)."""
        y1 = self.scale * rng.standard_normal(n)
        y2 = rng.standard_normal(n)
        b, s = self.curvature, self.scale
        return np.stack([y1, y2 + b * y1 ** 2 - b * s * s], axis=-1)

    def params(self):
        return {"kind": self.kind, "dim": 2, "curvature": self.curvature, "scale": self.scale}


class FunctionTarget(TargetDensity):
    """Wrap user callables ``log_fn(x)`` and ``grad_fn(x)`` as a target."""

    kind = "function"

    def __init__(self, dim, log_fn, grad_fn, log_norm_const=None):
        super().__init__(dim, log_norm_const)
        self._log_fn = log_fn
        self._grad_fn = grad_fn

    def _log_density(self, x):
        return self._log_fn(x)

    def _grad(self, x):
        return self._grad_fn(x)


def log_density(target, x):
    return target.log_density(x)


def grad_log_density(target, x):
    return target.grad_log_density(x)


_KINDS = ("gaussian", "mixture", "ring", "banana")


def make_target(spec):
    """Build a target from a dict or a ``"kind:key=value,..."`` string.

    Raises :class:`ConfigurationError` naming the offending field.
    """
    if isinstance(spec, TargetDensity):
        return spec
    try:
        return _build(parse_spec(spec, field="target"))
    except ConfigurationError as exc:
        if exc.field.startswith("target"):
            raise
        raise ConfigurationError("target." + exc.field, exc.message) from None


def _build(spec):
    kind = spec.get("kind")
    allowed = {"gaussian": {"dim", "mean", "var"},
               "mixture": {"dim", "weights", "means", "var"},
               "ring": {"dim", "radius", "width"},
               "banana": {"curvature", "scale", "dim"}}
    if kind not in allowed:
        raise ConfigurationError("target.kind", f"unknown kind {kind!r}; expected one of {_KINDS}")
    unknown = set(spec) - allowed[kind] - {"kind"}
    if unknown:
        raise ConfigurationError(f"target.{sorted(unknown)[0]}", f"unknown parameter for {kind}")
    p = "target."
    if kind == "gaussian":
        mean = as_array(spec, "mean", 0.0, p)
        var = as_array(spec, "var", 1.0, p)
        dim = as_int(spec, "dim", max(mean.size, var.size), p)
        if dim < 1:
            raise ConfigurationError("target.dim", f"must be >= 1, got {dim}")
        return Gaussian(mean, var, dim=dim)
    if kind == "mixture":
        dim = as_int(spec, "dim", 1, p)
        if dim < 1:
            raise ConfigurationError("target.dim", f"must be >= 1, got {dim}")
        weights = as_array(spec, "weights", "0.5/0.5", p)
        if "means" in spec:
            means = as_array(spec, "means", None, p, ndim=2)
        else:
            means = np.zeros((weights.size, dim))
            means[:, 0] = np.linspace(-4.0, 4.0, weights.size) if weights.size > 1 else 0.0
        if means.shape[1] == 1 and dim > 1:
            # scalar locations place each component along the first axis
            means = np.hstack([means, np.zeros((means.shape[0], dim - 1))])
        if means.shape[1] != dim:
            raise ConfigurationError("target.means", f"rows have {means.shape[1]} entries, dim={dim}")
        var = as_array(spec, "var", 1.0, p)
        var = var.reshape(-1, 1) if var.size == weights.size and var.size > 1 else var
        return GaussianMixture(weights, means, var)
    if kind == "ring":
        return Ring(as_float(spec, "radius", 2.0, p), as_float(spec, "width", 0.25, p),
                    dim=as_int(spec, "dim", 2, p))
    if as_int(spec, "dim", 2, p) != 2:
        raise ConfigurationError("target.dim", "banana target is two-dimensional")
    return Banana(as_float(spec, "curvature", 0.5, p), as_float(spec, "scale", 2.0, p))
