import numpy as np
import pytest

from src.diffcore.tensor import DiffArray
from src.exceptions import InferenceError
from src.models.diffusion import (ddim_timesteps, forward_sample,
                                  make_schedule, posterior_mean, predict_a0,
                                  run_reverse, sample_step)


def oracle_eps(a0, schedule):
    """Exact noise for trajectories that all denoise to ``a0``."""
    def eps(a, tau):
        ab = schedule.alpha_bar[tau]
        return (np.asarray(a) - np.sqrt(ab) * a0) / np.sqrt(1.0 - ab)
    return eps


@pytest.fixture(scope='module')
def schedule():
    return make_schedule(1000)


def test_schedule_tables(schedule):
    assert len(schedule.beta) == 1001
    assert schedule.beta[0] == 0.0 and schedule.alpha_bar[0] == 1.0
    assert schedule.beta[1] == pytest.approx(1e-4)
    assert schedule.beta[1000] == pytest.approx(0.02)
    np.testing.assert_allclose(schedule.alpha_bar[2],
                               (1 - 1e-4) * (1 - schedule.beta[2]))
    assert schedule.alpha_bar[1000] < 1e-3
    assert np.all(np.diff(schedule.alpha_bar) < 0)
    with pytest.raises(ValueError):
        make_schedule(0)


@pytest.mark.parametrize('tau', [1, 500, 1000])
def test_forward_sample_moments(schedule, tau):
    rng = np.random.default_rng(tau)
    a0 = np.full(100_000, 3.0)
    noisy = forward_sample(a0, tau, rng.standard_normal(a0.shape), schedule)
    ab = schedule.alpha_bar[tau]
    assert noisy.values.mean() == pytest.approx(np.sqrt(ab) * 3.0, abs=0.02)
    assert noisy.values.var() == pytest.approx(1 - ab, rel=0.05)


def test_forward_sample_reaches_standard_normal(schedule):
    rng = np.random.default_rng(7)
    a0 = np.ones(100_000)
    noisy = forward_sample(a0, 1000, rng.standard_normal(a0.shape),
                           schedule).values
    assert noisy.mean() == pytest.approx(0.0, abs=0.02)
    assert noisy.var() == pytest.approx(1.0, rel=0.05)


def test_forward_sample_per_agent_steps(schedule):
    a0 = np.ones((2, 30, 2, 1))
    noise = np.zeros_like(a0)
    out = forward_sample(a0, np.array([1, 1000]), noise, schedule).values
    np.testing.assert_allclose(out[0], np.sqrt(schedule.alpha_bar[1]))
    np.testing.assert_allclose(out[1], np.sqrt(schedule.alpha_bar[1000]))
    with pytest.raises(ValueError):
        forward_sample(a0, 0, noise, schedule)


def test_posterior_mean_closed_form(schedule):
    a, eps = np.array([1.0]), np.array([0.5])
    tau = 10
    expected = (a - schedule.beta[tau] / np.sqrt(1 - schedule.alpha_bar[tau])
                * eps) / np.sqrt(schedule.alpha[tau])
    np.testing.assert_allclose(posterior_mean(a, tau, eps, schedule),
                               expected)


def test_ddpm_last_step_is_deterministic(schedule):
    a = np.ones((1, 30, 2, 2))
    eps = np.zeros_like(a)
    out = sample_step(a, 1, eps, schedule, 'ddpm', rng=None)
    np.testing.assert_allclose(out, posterior_mean(a, 1, eps, schedule))


def test_ddim_same_label_returns_input(schedule):
    a = np.random.default_rng(1).standard_normal((1, 30, 2, 2))
    out = sample_step(a, 40, np.zeros_like(a), schedule, 'ddim',
                      tau_next=40)
    assert out is a


def test_unknown_sampler(schedule):
    a = np.zeros((1, 30, 2, 1))
    with pytest.raises(InferenceError, match='sampler'):
        sample_step(a, 5, a, schedule, 'euler')


def test_ddim_timesteps():
    assert list(ddim_timesteps(1000, 1)) == [1000]
    steps = ddim_timesteps(1000, 5)
    assert list(steps) == [1000, 750, 500, 251, 1]
    assert len(set(ddim_timesteps(50, 50))) == 50
    with pytest.raises(InferenceError):
        ddim_timesteps(50, 51)


def test_oracle_ddpm_recovers_trajectory(schedule):
    rng = np.random.default_rng(2)
    a0 = np.cumsum(rng.standard_normal((1, 30, 2, 1)) * 0.1, axis=1)
    start = rng.standard_normal(a0.shape)
    out = run_reverse(oracle_eps(a0, schedule), start,
                      np.arange(1000, 0, -1), schedule, 'ddpm', rng)
    np.testing.assert_allclose(out, a0, atol=1e-2)


def test_oracle_ddim_recovers_trajectory_in_five_steps(schedule):
    rng = np.random.default_rng(3)
    a0 = rng.standard_normal((2, 30, 2, 3))
    start = rng.standard_normal(a0.shape)
    out = run_reverse(oracle_eps(a0, schedule), start,
                      ddim_timesteps(1000, 5), schedule, 'ddim')
    np.testing.assert_allclose(out, a0, atol=1e-8)


def test_noise_free_ddpm_recovers_trajectory_over_all_steps(schedule):
    rng = np.random.default_rng(8)
    a0 = np.cumsum(rng.standard_normal((2, 30, 2, 3)) * 0.1, axis=1)
    eps = oracle_eps(a0, schedule)
    a = rng.standard_normal(a0.shape)
    for tau in range(schedule.T, 0, -1):
        a = posterior_mean(a, tau, eps(a, tau), schedule)
    np.testing.assert_allclose(a, a0, atol=1e-3)


def test_oracle_ddim_recovers_trajectory_in_fifty_steps(schedule):
    rng = np.random.default_rng(9)
    a0 = rng.standard_normal((2, 30, 2, 3))
    start = rng.standard_normal(a0.shape)
    labels = ddim_timesteps(1000, 50)
    assert len(labels) == 50
    out = run_reverse(oracle_eps(a0, schedule), start, labels, schedule,
                      'ddim')
    np.testing.assert_allclose(out, a0, atol=1e-3)


def test_predict_a0_inverts_forward_sample(schedule):
    rng = np.random.default_rng(4)
    a0 = rng.standard_normal((3, 30, 2, 1))
    noise = rng.standard_normal(a0.shape)
    tau = np.array([1, 37, 999])
    a_tau = forward_sample(a0, tau, noise, schedule).values
    np.testing.assert_allclose(predict_a0(a_tau, tau, noise, schedule), a0,
                               atol=1e-9)


def test_denoiser_shapes_and_call_counter(tiny_model):
    denoiser = tiny_model.denoiser
    denoiser.reset_calls()
    a = np.random.default_rng(5).standard_normal((3, 30, 2, 4))
    cond = DiffArray(np.ones((3, 16)))
    out = denoiser(a, 7, cond)
    assert out.shape == (3, 30, 2, 4)
    out = denoiser(a, np.array([1, 20, 50]), cond)
    assert out.shape == (3, 30, 2, 4)
    assert denoiser.calls == 2


def test_denoiser_modes_are_independent(tiny_model):
    rng = np.random.default_rng(6)
    a = rng.standard_normal((2, 30, 2, 3))
    cond = DiffArray(rng.standard_normal((2, 16)))
    full = tiny_model.denoiser(a, 10, cond).values
    single = tiny_model.denoiser(a[..., 1:2], 10, cond).values
    np.testing.assert_allclose(full[..., 1:2], single, atol=1e-10)
