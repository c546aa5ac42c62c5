"""Markov chain Monte Carlo toolkit: samplers, diagnostics, Monte Carlo
integration, primary-sample-space light transport, SGLD and energy-based models."""
from .diagnostics import DiagnosticsReport, acceptance_rate, autocorrelation, diagnose, ess, histogram_tv
from .ebm import (CdConfig, EnergyModel, annealed_score_langevin, cd_gradient, ebm_mh_sample,
                  ebm_ula_sample, gaussian_energy, quadratic_energy, train_cd)
from .estimators import GaussianEBM, MCMCSampler, SGLDGaussianMean
from .exceptions import (ConfigurationError, DegenerateIntegrandError, DivergenceError,
                         InconsistentStrategyError, McmcError, RejectedInputError,
                         UndefinedVarianceError)
from .mcint import Estimate, Strategy, balance_weights, mc_estimate, mis_estimate
from .optim import ConjugateGaussianModel, map_estimate, sgd_step, sgld_sample_posterior, sgld_step
from .pssmlt import BlackBoxEstimator, Image, normalize_image, pssmlt_render
from .samplers import (Chain, PhasePoint, SamplerConfig, TemperatureSchedule, almc_step, hmc_step,
                       leapfrog, mala_step, mh_step, run_chain, ula_step)
from .sde import RegionConstraint, SdePath, simulate_brownian, simulate_langevin_sde
from .targets import Banana, Gaussian, GaussianMixture, Ring, TargetDensity, make_target

__version__ = "0.1.0"
