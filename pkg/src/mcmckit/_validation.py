"""Input validation helpers used at public entry points.

Inner loops call private kernels directly and skip these checks.
"""
import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ConfigurationError, RejectedInputError


def check_point(x, dim=None, name="x"):
    """Return ``x`` as a finite float array of shape ``(..., dim)``.

    Scalars become 1-vectors. Batches of points (leading axes) are allowed.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    try:
        arr = check_array(arr, ensure_2d=False, allow_nd=True, dtype=float,
                          copy=True, input_name=name)
    except ValueError as exc:
        raise RejectedInputError(str(exc)) from exc
    if dim is not None and arr.shape[-1] != dim:
        raise RejectedInputError(
            f"{name} has dimension {arr.shape[-1]}, expected {dim}")
    return arr


def check_dim(x, dim):
    """Cheap dimension check for hot paths (no copy, no finiteness scan)."""
    if np.shape(x)[-1:] != (dim,):
        raise RejectedInputError(
            f"point has shape {np.shape(x)}, expected trailing dimension {dim}")


def check_positive(value, field, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigurationError(field, f"must be a finite real, got {value!r}")
    if value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise ConfigurationError(field, f"must be {bound}, got {value!r}")
    return float(value)


def check_count(value, field, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(field, f"must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigurationError(field, f"must be >= {minimum}, got {value!r}")
    return int(value)


def check_rng(random_state):
    """Turn ``None``, an int seed or a Generator into a ``np.random.Generator``."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, numbers.Integral):
        return np.random.default_rng(random_state)
    raise ConfigurationError("random_state",
                             f"expected None, int or Generator, got {random_state!r}")
