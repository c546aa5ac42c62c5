"""MCMC transition kernels and the chain driver.

Kernels operate on a single point of shape ``(dim,)`` or on a batch of
independent chains of shape ``(n_chains, dim)``. All acceptance tests are
done in log space.

Implemented transitions:

* ``mh``    random-walk Metropolis-Hastings with isotropic Gaussian proposals
* ``ula``   unadjusted Langevin, ``x + tau**2/2 * grad log p(x) + tau * xi``
* ``mala``  the same proposal followed by a Metropolis-Hastings correction
* ``almc``  annealed Langevin, drift divided by a temperature that decreases to 1
* ``hmc``   Hamiltonian Monte Carlo with a leapfrog integrator and accept test
"""
from dataclasses import dataclass, field

import numpy as np

from ._spec import as_float, as_int, parse_spec
from ._validation import check_count, check_point, check_positive, check_rng
from .exceptions import ConfigurationError
from .targets import sqnorm as _rowdot

KINDS = ("mh", "ula", "mala", "almc", "hmc")
_BLOCK = 4096


@dataclass(frozen=True)
class TemperatureSchedule:
    """Strictly decreasing temperatures ending at 1, each held for ``steps_per_level``."""

    temps: tuple
    steps_per_level: int = 1

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temps)
        object.__setattr__(self, "temps", temps)
        if not temps:
            raise ConfigurationError("schedule", "needs at least one temperature")
        if any(not np.isfinite(t) or t <= 0 for t in temps):
            raise ConfigurationError("schedule", "temperatures must be finite and > 0")
        if any(a <= b for a, b in zip(temps, temps[1:])):
            raise ConfigurationError("schedule", "temperatures must be strictly decreasing")
        if temps[-1] != 1.0:
            raise ConfigurationError("schedule", f"final temperature must be 1, got {temps[-1]}")
        check_count(self.steps_per_level, "steps_per_level")

    @classmethod
    def geometric(cls, t_max, n_levels, steps_per_level=1):
        """``n_levels`` temperatures spaced geometrically from ``t_max`` down to 1."""
        n_levels = check_count(n_levels, "levels")
        if n_levels == 1:
            return cls((1.0,), steps_per_level)
        if not t_max > 1:
            raise ConfigurationError("t_max", f"must be > 1 for several levels, got {t_max!r}")
        temps = np.geomspace(t_max, 1.0, n_levels)
        temps[-1] = 1.0
        return cls(tuple(temps), steps_per_level)

    @property
    def total_steps(self):
        return len(self.temps) * self.steps_per_level

    def temperature_at(self, step):
        """Temperature of 0-based ``step``; stays at 1 once the schedule is exhausted."""
        level = step // self.steps_per_level
        return self.temps[level] if level < len(self.temps) else 1.0


@dataclass(frozen=True)
class SamplerConfig:
    """Which transition to run and its step parameters.

    ``step_size`` is the proposal sigma for ``mh``, ``tau`` for the Langevin
    kinds and ``eps`` for ``hmc``.
    """

    kind: str
    step_size: float
    leapfrog_steps: int = 1
    schedule: TemperatureSchedule = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError("sampler.kind", f"unknown sampler {self.kind!r}; expected one of {KINDS}")
        check_positive(self.step_size, "sampler." + _STEP_NAME[self.kind])
        check_count(self.leapfrog_steps, "sampler.L")
        if self.kind == "almc" and self.schedule is None:
            raise ConfigurationError("sampler.schedule", "almc needs a temperature schedule")

    @classmethod
    def mh(cls, proposal_sigma):
        return cls("mh", proposal_sigma)

    @classmethod
    def ula(cls, tau):
        return cls("ula", tau)

    @classmethod
    def mala(cls, tau):
        return cls("mala", tau)

    @classmethod
    def almc(cls, tau, schedule):
        return cls("almc", tau, schedule=schedule)

    @classmethod
    def hmc(cls, eps, leapfrog_steps):
        return cls("hmc", eps, leapfrog_steps)

    @classmethod
    def from_spec(cls, spec):
        """Parse ``"mh:sigma=1.0"``, ``"hmc:eps=0.1,L=20"``, ``"almc:tau=0.5,t_max=10,levels=10,steps_per_level=200"``."""
        spec = parse_spec(spec, field="sampler")
        kind = spec.get("kind")
        if kind not in KINDS:
            raise ConfigurationError("sampler.kind", f"unknown sampler {kind!r}; expected one of {KINDS}")
        allowed = {"mh": {"sigma"}, "ula": {"tau"}, "mala": {"tau"},
                   "almc": {"tau", "t_max", "levels", "steps_per_level"},
                   "hmc": {"eps", "L"}}[kind]
        unknown = set(spec) - allowed - {"kind"}
        if unknown:
            raise ConfigurationError(f"sampler.{sorted(unknown)[0]}", f"unknown parameter for {kind}")
        p = "sampler."
        if kind == "mh":
            return cls.mh(as_float(spec, "sigma", 1.0, p))
        if kind in ("ula", "mala"):
            return cls(kind, as_float(spec, "tau", 0.5, p))
        if kind == "hmc":
            return cls.hmc(as_float(spec, "eps", 0.1, p), as_int(spec, "L", 20, p))
        schedule = TemperatureSchedule.geometric(
            as_float(spec, "t_max", 10.0, p), as_int(spec, "levels", 10, p),
            as_int(spec, "steps_per_level", 100, p))
        return cls.almc(as_float(spec, "tau", 0.5, p), schedule)

    def to_dict(self):
        out = {"kind": self.kind, _STEP_NAME[self.kind]: self.step_size}
        if self.kind == "hmc":
            out["L"] = self.leapfrog_steps
        if self.schedule is not None:
            out["temps"] = list(self.schedule.temps)
            out["steps_per_level"] = self.schedule.steps_per_level
        return out


_STEP_NAME = {"mh": "sigma", "ula": "tau", "mala": "tau", "almc": "tau", "hmc": "eps"}


@dataclass(eq=False)
class Chain:
    """Result of :func:`run_chain`.

    ``samples`` has shape ``(n_kept, dim)`` (or ``(n_kept, n_chains, dim)``
    for a batch). ``accept_flags`` has one entry per proposal event,
    burn-in included; Langevin kinds without a correction accept everything.
    """

    samples: np.ndarray
    accept_flags: np.ndarray
    config: SamplerConfig
    seed: object
    burn_in: int
    thin: int
    x0: np.ndarray = None
    grad_evals: int = 0
    density_evals: int = 0
    kept_steps: np.ndarray = field(default=None, repr=False)

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accept_flags))

    def accepted_only(self):
        """States right after an accepted proposal, in order.

        This reproduces samplers that append only accepted moves. The result is
        NOT distributed according to the target; use ``samples`` for inference.
        """
        if self.samples.ndim != 2 or self.burn_in != 0 or self.thin != 1:
            raise ValueError("accepted_only needs a single chain with burn_in=0, thin=1")
        return self.samples[self.accept_flags]

    def identical_to(self, other):
        return (np.array_equal(self.samples, other.samples)
                and np.array_equal(self.accept_flags, other.accept_flags)
                and self.config == other.config and self.seed == other.seed)


@dataclass
class PhasePoint:
    """Position ``q`` and momentum ``m`` of a Hamiltonian system."""

    q: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.q.shape != self.m.shape:
            raise ConfigurationError("m", f"momentum shape {self.m.shape} != position shape {self.q.shape}")


# --- kernels -----------------------------------------------------------------
# Each kernel takes the current state plus pre-drawn noise and returns the new
# state. Log-densities and gradients of the current point are carried along so
# every proposal costs exactly one new evaluation.


def _mh_kernel(target, x, lp, sigma, xi, log_u):
    y = x + sigma * xi
    lpy = target._log_density(y)
    accept = log_u < lpy - lp
    if accept.ndim == 0:
        return (y, lpy, accept) if accept else (x, lp, accept)
    return np.where(accept[..., None], y, x), np.where(accept, lpy, lp), accept


def _langevin_kernel(target, x, coef, tau, xi):
    return x + coef * target._grad(x) + tau * xi


def _mala_log_ratio(x, lpx, gx, y, lpy, gy, coef, tau):
    fwd = y - x - coef * gx
    rev = x - y - coef * gy
    return lpy - lpx - (_rowdot(rev) - _rowdot(fwd)) / (2.0 * tau * tau)


def _mala_kernel(target, x, lp, g, tau, xi, log_u):
    coef = 0.5 * tau * tau
    y = x + coef * g + tau * xi
    lpy = target._log_density(y)
    gy = target._grad(y)
    accept = log_u < _mala_log_ratio(x, lp, g, y, lpy, gy, coef, tau)
    if accept.ndim == 0:
        return (y, lpy, gy, accept) if accept else (x, lp, g, accept)
    a = accept[..., None]
    return np.where(a, y, x), np.where(accept, lpy, lp), np.where(a, gy, g), accept


def _leapfrog_logp(target, q, m, g, eps, n_steps):
    """Kick-drift-kick with ``grad U = -grad log p``; ``g`` is grad log p at ``q``."""
    half = 0.5 * eps
    for _ in range(n_steps):
        m = m + half * g
        q = q + eps * m
        g = target._grad(q)
        m = m + half * g
    return q, m, g


def _hmc_kernel(target, x, lp, g, eps, n_steps, momentum, log_u):
    q, m, gq = _leapfrog_logp(target, x, momentum, g, eps, n_steps)
    lpq = target._log_density(q)
    h_current = -lp + 0.5 * _rowdot(momentum)
    h_proposed = -lpq + 0.5 * _rowdot(m)
    accept = log_u < h_current - h_proposed
    if accept.ndim == 0:
        return (q, lpq, gq, accept) if accept else (x, lp, g, accept)
    a = accept[..., None]
    return np.where(a, q, x), np.where(accept, lpq, lp), np.where(a, gq, g), accept


def _log_uniform(u):
    with np.errstate(divide="ignore"):
        return np.log(u)


# --- single-step public API --------------------------------------------------


def _prepare(x, target):
    return check_point(x, target.dim)


def mh_log_acceptance(target, x, x_star):
    """``min(0, log p(x_star) - log p(x))`` for a symmetric proposal."""
    delta = target.log_density(x_star) - target.log_density(x)
    return np.minimum(0.0, np.nan_to_num(delta, nan=-np.inf))


def mh_step(x, target, proposal_sigma, rng=None, xi=None, u=None):
    """Random-walk Metropolis-Hastings step. Returns ``(new_x, accepted)``.

    On rejection the input state is returned unchanged.
    """
    check_positive(proposal_sigma, "proposal_sigma")
    x = _prepare(x, target)
    rng = check_rng(rng) if xi is None or u is None else rng
    if xi is None:
        xi = rng.standard_normal(x.shape)
    if u is None:
        u = rng.random(x.shape[:-1])
    new, _, accepted = _mh_kernel(target, x, target._log_density(x), proposal_sigma,
                                  np.asarray(xi, dtype=float), _log_uniform(u))
    return new, accepted


def ula_step(x, target, tau, rng=None, xi=None):
    """Unadjusted Langevin step ``x + tau**2/2 * grad log p(x) + tau * xi``."""
    check_positive(tau, "tau")
    x = _prepare(x, target)
    if xi is None:
        xi = check_rng(rng).standard_normal(x.shape)
    return _langevin_kernel(target, x, 0.5 * tau * tau / 1.0, tau, np.asarray(xi, dtype=float))


def almc_step(x, target, tau, temperature, rng=None, xi=None):
    """Tempered Langevin step ``x + tau**2/(2T) * grad log p(x) + tau * xi``.

    This is an unadjusted Langevin step on ``p**(1/T)``; at ``T = 1`` it is
    bit-for-bit :func:`ula_step`.
    """
    check_positive(tau, "tau")
    if not temperature >= 1:
        raise ConfigurationError("temperature", f"must be >= 1, got {temperature!r}")
    x = _prepare(x, target)
    if xi is None:
        xi = check_rng(rng).standard_normal(x.shape)
    return _langevin_kernel(target, x, 0.5 * tau * tau / temperature, tau,
                            np.asarray(xi, dtype=float))


def mala_log_acceptance(target, x, x_star, tau):
    """Log acceptance probability of moving ``x -> x_star`` under MALA."""
    x = _prepare(x, target)
    y = _prepare(x_star, target)
    coef = 0.5 * tau * tau
    ratio = _mala_log_ratio(x, target._log_density(x), target._grad(x),
                            y, target._log_density(y), target._grad(y), coef, tau)
    return np.minimum(0.0, np.nan_to_num(ratio, nan=-np.inf))


def mala_step(x, target, tau, rng=None, xi=None, u=None):
    """Metropolis-adjusted Langevin step. Returns ``(new_x, accepted)``."""
    check_positive(tau, "tau")
    x = _prepare(x, target)
    rng = check_rng(rng) if xi is None or u is None else rng
    if xi is None:
        xi = rng.standard_normal(x.shape)
    if u is None:
        u = rng.random(x.shape[:-1])
    new, _, _, accepted = _mala_kernel(target, x, target._log_density(x), target._grad(x),
                                       tau, np.asarray(xi, dtype=float), _log_uniform(u))
    return new, accepted


def leapfrog(start, grad_U, eps, L):
    """Integrate Hamilton's equations for ``L`` kick-drift-kick steps.

    ``grad_U`` is the gradient of the potential energy ``U = -log p``.
    Returns a new :class:`PhasePoint`; the unit mass matrix is assumed.
    """
    check_positive(eps, "eps")
    L = check_count(L, "L")
    q, m = start.q.copy(), start.m.copy()
    half = 0.5 * eps
    g = np.asarray(grad_U(q), dtype=float)
    for _ in range(L):
        m = m - half * g
        q = q + eps * m
        g = np.asarray(grad_U(q), dtype=float)
        m = m - half * g
    return PhasePoint(q, m)


def hamiltonian(target, point):
    """``H(q, m) = -log p(q) + |m|**2 / 2``."""
    return -target.log_density(point.q) + 0.5 * _rowdot(point.m)


def hmc_step(x, target, eps, L, rng=None, momentum=None, u=None):
    """One HMC transition with a Metropolis accept test. Returns ``(new_x, accepted)``."""
    check_positive(eps, "eps")
    L = check_count(L, "L")
    x = _prepare(x, target)
    rng = check_rng(rng) if momentum is None or u is None else rng
    if momentum is None:
        momentum = rng.standard_normal(x.shape)
    if u is None:
        u = rng.random(x.shape[:-1])
    new, _, _, accepted = _hmc_kernel(target, x, target._log_density(x), target._grad(x),
                                      eps, L, np.asarray(momentum, dtype=float), _log_uniform(u))
    return new, accepted


# --- driver ------------------------------------------------------------------


def run_chain(config, target, x0, total_steps, burn_in=0, thin=1, seed=0):
    """Run ``total_steps`` transitions from ``x0`` and keep thinned post-burn-in states.

    The result is a deterministic function of its arguments. ``x0`` may be a
    batch of starting points, in which case every chain advances in lock-step
    with independent noise.
    """
    if not isinstance(config, SamplerConfig):
        config = SamplerConfig.from_spec(config)
    total_steps = check_count(total_steps, "steps")
    burn_in = check_count(burn_in, "burn_in", minimum=0)
    thin = check_count(thin, "thin")
    if burn_in >= total_steps:
        raise ConfigurationError("burn_in", f"must be < steps ({total_steps}), got {burn_in}")
    x = check_point(x0, target.dim, name="x0")
    rng = check_rng(seed)

    shape, batch = x.shape, x.shape[:-1]
    n_keep = (total_steps - burn_in) // thin
    samples = np.empty((n_keep,) + shape)
    accept_flags = np.ones((total_steps,) + batch, dtype=bool)
    kind, step = config.kind, config.step_size
    needs_u = kind in ("mh", "mala", "hmc")

    lp = target._log_density(x) if needs_u else None
    g = target._grad(x) if kind in ("mala", "hmc") else None
    density_evals = 1 if needs_u else 0
    grad_evals = 1 if g is not None else 0
    coef = 0.5 * step * step

    keep = 0
    # diverging proposals give inf/nan log-densities; the accept test rejects them
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, total_steps, _BLOCK):
            nb = min(_BLOCK, total_steps - start)
            noise = rng.standard_normal((nb,) + shape)
            log_u = _log_uniform(rng.random((nb,) + batch)) if needs_u else None
            for j in range(nb):
                i = start + j
                if kind == "mh":
                    x, lp, accept_flags[i] = _mh_kernel(target, x, lp, step, noise[j], log_u[j])
                elif kind == "ula":
                    x = _langevin_kernel(target, x, coef / 1.0, step, noise[j])
                elif kind == "almc":
                    x = _langevin_kernel(target, x, coef / config.schedule.temperature_at(i),
                                         step, noise[j])
                elif kind == "mala":
                    x, lp, g, accept_flags[i] = _mala_kernel(target, x, lp, g, step, noise[j], log_u[j])
                else:
                    x, lp, g, accept_flags[i] = _hmc_kernel(target, x, lp, g, step,
                                                            config.leapfrog_steps, noise[j], log_u[j])
                done = i + 1
                if done > burn_in and (done - burn_in) % thin == 0:
                    samples[keep] = x
                    keep += 1

    per_step_grads = {"mh": 0, "ula": 1, "almc": 1, "mala": 1, "hmc": config.leapfrog_steps}[kind]
    n_chains = int(np.prod(batch)) if batch else 1
    return Chain(
        samples=samples, accept_flags=accept_flags, config=config, seed=seed,
        burn_in=burn_in, thin=thin, x0=check_point(x0, target.dim, name="x0"),
        grad_evals=(grad_evals + per_step_grads * total_steps) * n_chains,
        density_evals=(density_evals + (total_steps if needs_u else 0)) * n_chains,
        kept_steps=burn_in + thin * np.arange(1, n_keep + 1),
    )


def steps_for_gradient_budget(config, budget):
    """Number of transitions ``config`` can afford with ``budget`` gradient evaluations.

    Metropolis-Hastings uses no gradients; each of its density evaluations is
    charged as one unit so the comparison is per model evaluation.
    """
    per_step = config.leapfrog_steps if config.kind == "hmc" else 1
    return max(1, int(budget) // per_step)

