"""Chain quality metrics: acceptance, autocorrelation, ESS, moments, histogram TV."""
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import check_count
from .exceptions import RejectedInputError, UndefinedVarianceError

OUTSIDE_WARN_FRACTION = 0.2


@dataclass
class DiagnosticsReport:
    acceptance_rate: float
    mean: list
    covariance: list
    ess_per_dim: list
    tv_distance: float = None

    @property
    def min_ess(self):
        return min(self.ess_per_dim)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **extra):
        """Serialize with the fixed field names; ``extra`` keys (e.g. ``config``) come first."""
        return json.dumps({**extra, **self.to_dict()}, indent=2, sort_keys=False)


def acceptance_rate(chain):
    """Fraction of proposal events that were accepted."""
    flags = np.asarray(getattr(chain, "accept_flags", chain), dtype=bool)
    if flags.size == 0:
        raise RejectedInputError("chain has no proposal events")
    return float(flags.mean())


def _centered(series):
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise RejectedInputError(f"expected a 1-D series, got shape {x.shape}")
    xc = x - x.mean()
    var = xc.dot(xc)
    if not var > 0:
        raise UndefinedVarianceError("series is constant; autocorrelation is undefined")
    return xc, var


def autocorrelation_function(series, max_lag=None):
    """Normalized autocovariances ``rho_0 = 1, rho_1, ...`` via FFT.

    Uses the biased (divide-by-N) autocovariance estimator.
    """
    xc, var = _centered(series)
    n = xc.size
    max_lag = n - 1 if max_lag is None else min(int(max_lag), n - 1)
    size = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(xc, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1]
    rho = acov / var
    rho[0] = 1.0
    return rho


def autocorrelation(series, lag):
    """Lag-``lag`` autocorrelation of a 1-D series; exactly 1 at lag 0."""
    lag = check_count(lag, "lag", minimum=0)
    xc, var = _centered(series)
    if lag >= xc.size:
        raise RejectedInputError(f"lag {lag} must be < series length {xc.size}")
    if lag == 0:
        return 1.0
    return float(xc[:-lag].dot(xc[lag:]) / var)


def ess(series):
    """Effective sample size ``N / (1 + 2 * sum rho_k)``.

    The sum stops before the first negative autocorrelation. The result is
    clamped to ``(0, N]``.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 10:
        raise RejectedInputError(f"ESS needs at least 10 values, got {n}")
    rho = autocorrelation_function(x)
    negative = np.flatnonzero(rho[1:] < 0)
    stop = negative[0] + 1 if negative.size else rho.size
    tau = 1.0 + 2.0 * rho[1:stop].sum()
    return float(min(n, max(n / tau, np.finfo(float).tiny)))


def ess_per_dim(samples):
    samples = _as_samples(samples)
    return [ess(samples[:, k]) for k in range(samples.shape[1])]


def _as_samples(samples):
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.ndim != 2:
        raise RejectedInputError(f"expected samples of shape (n, dim), got {s.shape}")
    return s


def moments(samples):
    """Sample mean and unbiased sample covariance."""
    s = _as_samples(samples)
    if s.shape[0] < 2:
        raise RejectedInputError("moments need at least 2 samples")
    cov = np.atleast_2d(np.cov(s, rowvar=False, ddof=1))
    return s.mean(axis=0), (cov + cov.T) / 2


def grid_target_mass(target, bounds, bins, oversample=4):
    """Probability of each grid cell under ``target``, normalized over the grid.

    Each cell is integrated with an ``oversample``-point midpoint rule per axis.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    dim = bounds.shape[0]
    bins = np.broadcast_to(np.asarray(bins, dtype=int), (dim,))
    axes = []
    for (lo, hi), b in zip(bounds, bins):
        fine = b * oversample
        axes.append(lo + (np.arange(fine) + 0.5) * (hi - lo) / fine)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    logp = target.log_density(mesh)
    w = np.exp(logp - logp.max())
    w = w.reshape(tuple(x for b in bins for x in (b, oversample))).sum(
        axis=tuple(range(1, 2 * dim, 2)))
    return w / w.sum()


def empirical_mass(samples, bounds, bins):
    """Histogram mass per cell plus the fraction falling outside the grid."""
    s = _as_samples(samples)
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    bins = np.broadcast_to(np.asarray(bins, dtype=int), (bounds.shape[0],))
    counts, _ = np.histogramdd(s, bins=bins, range=bounds)
    n = s.shape[0]
    return counts / n, 1.0 - counts.sum() / n


def tv_from_masses(p, q, slack_p=0.0, slack_q=0.0):
    """Half the L1 distance between two cell-mass arrays (plus slack cells)."""
    return 0.5 * (float(np.abs(np.asarray(p) - np.asarray(q)).sum()) + abs(slack_p - slack_q))


def histogram_tv(samples, target, bounds, bins):
    """Total-variation distance between the sample histogram and the gridded target.

    ``bounds`` is ``[(lo, hi)]`` per dimension (at most 2) and ``bins`` the
    number of cells per dimension (at least 4). Samples outside the grid go to
    a slack cell that the normalized target gives no mass; if more than 20%
    of samples land there a ``RuntimeWarning`` is issued.
    """
    s = _as_samples(samples)
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if s.shape[1] > 2 or bounds.shape[0] != s.shape[1]:
        raise RejectedInputError("histogram TV is defined for 1-D or 2-D samples with matching bounds")
    if np.any(np.asarray(bins) < 4):
        raise RejectedInputError("need at least 4 bins per dimension")
    emp, outside = empirical_mass(s, bounds, bins)
    if outside > OUTSIDE_WARN_FRACTION:
        warnings.warn(f"{outside:.1%} of samples fall outside the histogram grid",
                      RuntimeWarning, stacklevel=2)
    return tv_from_masses(emp, grid_target_mass(target, bounds, bins), outside, 0.0)


def diagnose(chain, target=None, bounds=None, bins=None):
    """Build a :class:`DiagnosticsReport` for a chain or a raw ``(n, dim)`` sample array.

    Batched chains are pooled; ESS is then summed over the independent chains.
    """
    samples = getattr(chain, "samples", chain)
    flags = getattr(chain, "accept_flags", None)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 3:
        per_chain = [ess_per_dim(samples[:, c]) for c in range(samples.shape[1])]
        ess_dims = [float(v) for v in np.sum(per_chain, axis=0)]
        pooled = samples.reshape(-1, samples.shape[-1])
    else:
        pooled = _as_samples(samples)
        ess_dims = ess_per_dim(pooled)
    mean, cov = moments(pooled)
    tv = None
    if target is not None and bounds is not None:
        tv = histogram_tv(pooled, target, bounds, bins if bins is not None else 50)
    return DiagnosticsReport(
        acceptance_rate=acceptance_rate(flags) if flags is not None else 1.0,
        mean=[float(v) for v in mean],
        covariance=[[float(v) for v in row] for row in cov],
        ess_per_dim=ess_dims,
        tv_distance=tv,
    )


def min_ess_at_budget(config, target, x0, budget, seed=0, burn_in_fraction=0.1):
    """Minimum per-coordinate ESS of one chain run at a fixed gradient budget.

    The budget is converted to transitions with
    :func:`~mcmckit.samplers.steps_for_gradient_budget`; the first
    ``burn_in_fraction`` of them are discarded.
    """
    from .samplers import run_chain, steps_for_gradient_budget

    n = steps_for_gradient_budget(config, budget)
    chain = run_chain(config, target, x0, n, burn_in=int(n * burn_in_fraction), seed=seed)
    return min(ess_per_dim(chain.samples))


def select_step_size(configs, target, x0, budget, seed):
    """Pick the config with the largest :func:`min_ess_at_budget` on a pilot seed."""
    scores = [min_ess_at_budget(c, target, x0, budget, seed) for c in configs]
    return configs[int(np.argmax(scores))], scores
