import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcmckit.exceptions import ConfigurationError
from mcmckit.samplers import (PhasePoint, SamplerConfig, TemperatureSchedule, almc_step,
                              hamiltonian, hmc_step, leapfrog, mala_log_acceptance, mala_step,
                              mh_log_acceptance, mh_step, run_chain, ula_step)
from mcmckit.targets import FunctionTarget, make_target

G2 = make_target("gaussian:dim=2")
G1 = make_target("gaussian:dim=1")


def test_mh_acceptance_probabilities():
    assert np.exp(mh_log_acceptance(G2, [1.0, 1.0], [0.0, 0.0])) == 1.0
    assert np.exp(mh_log_acceptance(G2, [0.0, 0.0], [1.0, 1.0])) == pytest.approx(np.exp(-1.0))


def test_mh_step_uses_injected_draws():
    x, ok = mh_step([0.0, 0.0], G2, 1.0, xi=[1.0, 1.0], u=0.36)
    assert ok and np.array_equal(x, [1.0, 1.0])
    x, ok = mh_step([0.0, 0.0], G2, 1.0, xi=[1.0, 1.0], u=0.37)
    assert not ok and np.array_equal(x, [0.0, 0.0])


def test_ula_step_examples():
    np.testing.assert_array_equal(ula_step([0.0, 0.0], G2, 0.5, xi=[0.0, 0.0]), [0.0, 0.0])
    # x + tau^2/2 * (-x) + tau * xi
    out = ula_step([2.0], G1, 0.4, xi=[0.5])
    assert out[0] == pytest.approx(2.0 - 0.08 * 2.0 + 0.2)
    tiny = ula_step([1.0, -1.0], G2, 1e-12, rng=0)
    np.testing.assert_allclose(tiny, [1.0, -1.0], atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.01, 2.0))
def test_almc_at_unit_temperature_is_ula(x, xi, tau):
    a = almc_step([x], G1, tau, 1.0, xi=[xi])
    b = ula_step([x], G1, tau, xi=[xi])
    assert np.array_equal(a, b)


def test_almc_high_temperature_is_diffusion():
    out = almc_step([3.0], G1, 0.5, 1e15, xi=[0.2])
    assert out[0] == pytest.approx(3.0 + 0.5 * 0.2)
    with pytest.raises(ConfigurationError):
        almc_step([0.0], G1, 0.5, 0.5, rng=0)


def test_mala_symmetric_case_accepts():
    flat = FunctionTarget(1, lambda x: np.zeros(np.shape(x)[:-1]), lambda x: np.zeros_like(x))
    assert mala_log_acceptance(flat, [0.0], [0.7], 0.5) == 0.0


def test_mala_log_space_is_finite_for_extreme_gaps():
    lin = FunctionTarget(1, lambda x: 700.0 * np.tanh(x[..., 0]),
                         lambda x: 700.0 / np.cosh(x)**2)
    for a, b in [(-5.0, 5.0), (5.0, -5.0)]:
        v = mala_log_acceptance(lin, [a], [b], 0.5)
        assert not np.isnan(v)
    steep = FunctionTarget(1, lambda x: -700.0 * x[..., 0] ** 2, lambda x: -1400.0 * x)
    x, ok = mala_step([1.0], steep, 0.5, rng=0)
    assert np.all(np.isfinite(x))


def test_mala_small_tau_acceptance():
    chain = run_chain(SamplerConfig.mala(0.1), G1, [0.0], 20_000, seed=1)
    assert chain.acceptance_rate > 0.9


def test_leapfrog_hand_values():
    out = leapfrog(PhasePoint([1.0], [0.0]), lambda q: q, 0.1, 1)
    assert out.q[0] == pytest.approx(0.995, abs=1e-15)
    assert out.m[0] == pytest.approx(-0.09975, abs=1e-15)
    tiny = leapfrog(PhasePoint([1.0, 2.0], [0.5, -0.5]), lambda q: q, 1e-14, 3)
    np.testing.assert_allclose(tiny.q, [1.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(tiny.m, [0.5, -0.5], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.floats(0.01, 0.3), st.integers(1, 30))
def test_leapfrog_reversible(q, m, eps, L):
    t = make_target("banana")
    def grad_u(x):
        return -t.grad_log_density(x)
    fwd = leapfrog(PhasePoint(q, m), grad_u, eps, L)
    back = leapfrog(PhasePoint(fwd.q, -fwd.m), grad_u, eps, L)
    np.testing.assert_allclose(back.q, q, atol=1e-10)
    np.testing.assert_allclose(-back.m, m, atol=1e-10)


def _max_energy_error(eps, L):
    p = PhasePoint([1.0], [0.0])
    h0 = 0.5 * 1.0
    worst = 0.0
    for _ in range(L):
        p = leapfrog(p, lambda q: q, eps, 1)
        worst = max(worst, abs(0.5 * p.q[0] ** 2 + 0.5 * p.m[0] ** 2 - h0))
    return worst


def test_leapfrog_second_order():
    ratio = _max_energy_error(0.1, 100) / _max_energy_error(0.05, 200)
    assert 3.5 <= ratio <= 4.5


def test_hamiltonian_value():
    assert hamiltonian(G2, PhasePoint([1.0, 1.0], [1.0, 0.0])) == pytest.approx(1.5)


def test_hmc_tiny_step_accepts():
    rng = np.random.default_rng(0)
    acc = [hmc_step(rng.normal(size=2), G2, 1e-3, 1, rng)[1] for _ in range(2000)]
    assert np.mean(acc) >= 1 - 1e-4


def test_run_chain_counts():
    assert run_chain(SamplerConfig.mh(1.0), G2, [0, 0], 5).samples.shape == (5, 2)
    c = run_chain(SamplerConfig.mh(1.0), G2, [0, 0], 100, burn_in=20, thin=4)
    assert c.samples.shape == (20, 2)
    assert len(c.accept_flags) == 100
    np.testing.assert_array_equal(c.kept_steps, np.arange(24, 101, 4))


def test_run_chain_matches_single_steps():
    cfg = SamplerConfig.ula(0.3)
    chain = run_chain(cfg, G2, [1.0, -1.0], 10, seed=7)
    rng = np.random.default_rng(7)
    noise = rng.standard_normal((10, 2))
    x = np.array([1.0, -1.0])
    for i in range(10):
        x = ula_step(x, G2, 0.3, xi=noise[i])
        assert np.array_equal(chain.samples[i], x)


@pytest.mark.parametrize("spec", ["mh:sigma=1.0", "ula:tau=0.3", "mala:tau=0.5", "hmc:eps=0.1,L=5",
                                  "almc:tau=0.5,t_max=4,levels=3,steps_per_level=10"])
def test_run_chain_deterministic(spec):
    cfg = SamplerConfig.from_spec(spec)
    a = run_chain(cfg, G2, [0.5, 0.5], 200, seed=11)
    b = run_chain(cfg, G2, [0.5, 0.5], 200, seed=11)
    assert a.identical_to(b)
    c = run_chain(cfg, G2, [0.5, 0.5], 200, seed=12)
    assert not np.array_equal(a.samples, c.samples)


def test_batch_chain_rows_are_independent_chains():
    x0 = np.zeros((3, 2))
    c = run_chain(SamplerConfig.mala(0.5), G2, x0, 50, seed=0)
    assert c.samples.shape == (50, 3, 2) and c.accept_flags.shape == (50, 3)


def test_accepted_only_keeps_accepted_states():
    c = run_chain(SamplerConfig.mh(2.0), G2, [0.0, 0.0], 500, seed=3)
    acc = c.accepted_only()
    assert len(acc) == c.accept_flags.sum()
    assert np.array_equal(acc, c.samples[c.accept_flags])


def test_config_validation():
    with pytest.raises(ConfigurationError):
        run_chain(SamplerConfig.mh(1.0), G2, [0, 0], 10, burn_in=10)
    with pytest.raises(ConfigurationError):
        run_chain(SamplerConfig.mh(1.0), G2, [0, 0], 10, thin=0)
    with pytest.raises(ConfigurationError) as err:
        SamplerConfig.from_spec("mh:sigma=-1")
    assert err.value.field == "sampler.sigma"
    with pytest.raises(ConfigurationError):
        SamplerConfig.from_spec("gibbs")
    with pytest.raises(ConfigurationError):
        TemperatureSchedule((1.0, 2.0), 5)


def test_geometric_schedule():
    s = TemperatureSchedule.geometric(10.0, 10, 200)
    assert s.temps[0] == 10.0 and s.temps[-1] == 1.0 and len(s.temps) == 10
    assert s.total_steps == 2000
    assert s.temperature_at(199) == 10.0 and s.temperature_at(5000) == 1.0
    np.testing.assert_allclose(np.diff(np.log(s.temps)), np.log(0.1) / 9)


def test_gradient_accounting():
    c = run_chain(SamplerConfig.hmc(0.1, 20), G2, [0, 0], 10)
    assert c.grad_evals == 1 + 200
    assert run_chain(SamplerConfig.mh(1.0), G2, [0, 0], 10).grad_evals == 0
