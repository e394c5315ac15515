import numpy as np
import pytest

from diffusion.process import forward_noise, forward_noise_step, reverse_step
from diffusion.sampling import sample_loop
from diffusion.schedule import make_schedule
from diffusion.training import evaluate_epsilon_mse, train_denoiser
from errors import ContractViolation, ShapeMismatch
from nets.denoiser import DenoiserArch, build_denoiser
from nets.training import LabeledImages, TrainConfig


class ZeroDenoiser:
    def predict(self, x_t, t, c):
        return np.zeros_like(x_t)


def _tiny_denoiser(T: int, seed: int = 0):
    return build_denoiser(DenoiserArch(num_timesteps=T, channels=3, depth=2, time_dim=4, embed_dim=4), seed)


def test_linear_schedule_example():
    sched = make_schedule(4, "linear", 0.1, 0.4)
    np.testing.assert_allclose(sched.betas, [0.1, 0.2, 0.3, 0.4])
    np.testing.assert_allclose(sched.alphas, [0.9, 0.8, 0.7, 0.6])
    np.testing.assert_allclose(sched.alpha_bars, [0.9, 0.72, 0.504, 0.3024])
    np.testing.assert_allclose(sched.sigmas, np.sqrt([0.1, 0.2, 0.3, 0.4]))
    assert sched.beta(1) == pytest.approx(0.1)
    assert sched.alpha_bar(4) == pytest.approx(0.3024)


def test_single_step_schedule():
    sched = make_schedule(1, "linear", 0.05, 0.3)
    assert sched.T == 1
    assert sched.alpha_bar(1) == pytest.approx(sched.alpha(1))
    assert sched.alpha(1) == pytest.approx(0.95)


def test_default_schedule_nearly_destroys_signal():
    sched = make_schedule()
    assert sched.T == 200
    assert sched.alpha_bar(200) < 0.05
    assert np.all(np.diff(sched.alpha_bars) < 0)


@pytest.mark.parametrize("args", [(0, "linear", 1e-4, 0.02), (10, "linear", 0.0, 0.02),
                                  (10, "linear", 0.5, 0.1), (10, "linear", 1e-4, 1.0), (10, "cosine", 1e-4, 0.02)])
def test_schedule_rejects_bad_bounds(args):
    with pytest.raises(ContractViolation):
        make_schedule(*args)


def test_schedule_rejects_out_of_range_step():
    sched = make_schedule(5)
    with pytest.raises(ContractViolation):
        sched.beta(0)
    with pytest.raises(ContractViolation):
        sched.alpha_bar(6)


def test_forward_noise_step_examples():
    sched = make_schedule(1, "linear", 0.25, 0.25)
    x_prev = np.array([[2.0, -4.0]])
    np.testing.assert_allclose(forward_noise_step(x_prev, 1, np.zeros((1, 2)), sched), np.sqrt(0.75) * x_prev)
    z = np.array([[1.0, 3.0]])
    np.testing.assert_allclose(forward_noise_step(np.zeros((1, 2)), 1, z, sched), 0.5 * z)
    with pytest.raises(ContractViolation):
        forward_noise_step(x_prev, 2, z, sched)


def test_forward_noise_examples():
    eps = np.array([1.0, -2.0, 0.5])
    sched = make_schedule(1, "linear", 0.36, 0.36)
    np.testing.assert_allclose(forward_noise(np.zeros(3), 1, eps, sched), 0.6 * eps)
    sched = make_schedule(1, "linear", 0.75, 0.75)
    np.testing.assert_allclose(forward_noise(np.ones((2, 2)), 1, np.zeros((2, 2)), sched), np.full((2, 2), 0.5))
    with pytest.raises(ContractViolation):
        forward_noise(np.zeros(3), 0, eps, sched)


def test_forward_noise_accepts_per_sample_steps():
    sched = make_schedule(4, "linear", 0.1, 0.4)
    x_0 = np.ones((2, 3, 3))
    out = forward_noise(x_0, np.array([1, 4]), np.zeros((2, 3, 3)), sched)
    np.testing.assert_allclose(out[0], np.sqrt(0.9))
    np.testing.assert_allclose(out[1], np.sqrt(0.3024))


@pytest.mark.parametrize("t", [1, 10, 20])
def test_sequential_steps_match_marginal_moments(t):
    sched = make_schedule(20, "linear", 0.01, 0.2)
    rng = np.random.default_rng(t)
    x = np.full(100_000, 0.8)
    for step in range(1, t + 1):
        x = forward_noise_step(x, step, rng.standard_normal(x.shape), sched)
    alpha_bar = sched.alpha_bar(t)
    expected_mean = np.sqrt(alpha_bar) * 0.8
    standard_error = np.sqrt((1.0 - alpha_bar) / x.size)
    assert abs(x.mean() - expected_mean) < 4 * standard_error
    assert x.var() == pytest.approx(1.0 - alpha_bar, rel=0.05)


@pytest.mark.parametrize("args", [(200, "linear", 1e-4, 0.02), (20, "linear", 0.01, 0.2), (1, "linear", 0.3, 0.3)])
def test_schedule_algebra_holds_at_every_step(args):
    sched = make_schedule(*args)
    for t in range(1, sched.T + 1):
        assert abs(sched.alpha(t) - (1.0 - sched.beta(t))) <= 1e-12
        previous = sched.alpha_bar(t - 1) if t > 1 else 1.0
        assert abs(sched.alpha_bar(t) - previous * sched.alpha(t)) <= 1e-12


@pytest.mark.parametrize("t", [1, 7, 20])
def test_forward_noise_is_linear_in_image_and_noise(t):
    sched = make_schedule(20, "linear", 0.01, 0.2)
    rng = np.random.default_rng(t)
    x_a, x_b, eps_a, eps_b = rng.standard_normal((4, 5, 5))
    a, b = rng.uniform(-2.0, 2.0, size=2)
    combined = forward_noise(a * x_a + b * x_b, t, a * eps_a + b * eps_b, sched)
    separate = a * forward_noise(x_a, t, eps_a, sched) + b * forward_noise(x_b, t, eps_b, sched)
    np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-12)


def test_reverse_step_examples():
    sched = make_schedule(2, "linear", 0.36, 0.36)
    x_t = np.array([0.4, -1.6])
    np.testing.assert_allclose(reverse_step(x_t, 2, np.zeros(2), np.zeros(2), sched), x_t / 0.8)

    sched = make_schedule(1, "linear", 0.19, 0.19)
    x_0 = reverse_step(np.array(1.0), 1, np.array(1.0), np.array(0.0), sched)
    assert float(x_0) == pytest.approx((1.0 - 0.19 / np.sqrt(0.19)) / 0.9, abs=1e-9)
    assert float(x_0) == pytest.approx(0.62679, abs=1e-5)


def test_reverse_step_forbids_noise_at_last_step():
    sched = make_schedule(3)
    with pytest.raises(ContractViolation):
        reverse_step(np.zeros(2), 1, np.zeros(2), np.ones(2), sched)
    with pytest.raises(ShapeMismatch):
        reverse_step(np.zeros(2), 2, np.zeros(3), np.zeros(2), sched)


def test_zero_denoiser_closed_form():
    sched = make_schedule(50, "linear", 1e-3, 0.05)
    x_T = np.random.default_rng(1).standard_normal((4, 4))
    traj = sample_loop(ZeroDenoiser(), sched, 0, x_T=x_T, stochastic=False)
    np.testing.assert_allclose(traj.final, x_T / np.sqrt(sched.alpha_bar(50)), rtol=1e-8)
    assert traj.timesteps == list(range(50, -1, -1))
    np.testing.assert_array_equal(traj.at(50), x_T)


def test_sample_loop_is_deterministic_per_seed():
    sched = make_schedule(6, "linear", 1e-3, 0.1)
    den = _tiny_denoiser(6)
    a = sample_loop(den, sched, 1, seed=5, image_shape=(5, 5))
    b = sample_loop(den, sched, 1, seed=5, image_shape=(5, 5))
    c = sample_loop(den, sched, 1, seed=6, image_shape=(5, 5))
    for (ta, xa), (tb, xb) in zip(a.steps, b.steps):
        assert ta == tb
        np.testing.assert_array_equal(xa, xb)
    assert not np.array_equal(a.final, c.final)


def test_sample_loop_snapshots_and_errors():
    sched = make_schedule(6, "linear", 1e-3, 0.1)
    den = _tiny_denoiser(6)
    traj = sample_loop(den, sched, 0, seed=0, image_shape=(5, 5), snapshot_steps=[3])
    assert traj.timesteps == [6, 3, 0]
    with pytest.raises(ContractViolation):
        traj.at(4)
    with pytest.raises(ContractViolation):
        sample_loop(den, sched, 0)
    with pytest.raises(ShapeMismatch):
        sample_loop(den, sched, 0, x_T=np.zeros((4, 4)), image_shape=(5, 5))


def test_train_denoiser_is_deterministic():
    sched = make_schedule(5, "linear", 1e-3, 0.2)
    rng = np.random.default_rng(0)
    data = LabeledImages(rng.uniform(-1, 1, (6, 6, 6)), np.array([0, 1, 0, 1, 0, 1]))
    cfg = TrainConfig(epochs=2, batch_size=3, learning_rate=1e-2, seed=4, holdout_fraction=0.0)
    arch = DenoiserArch(num_timesteps=5, channels=3, depth=2, time_dim=4, embed_dim=4)
    a = train_denoiser(data, sched, cfg, arch)
    b = train_denoiser(data, sched, cfg, arch)
    assert a.parameters.equals(b.parameters)
    assert len(a.summary["epoch_losses"]) == 2
    assert np.isfinite(evaluate_epsilon_mse(a, data, sched, seed=0))


def test_train_denoiser_reduces_loss_on_one_image():
    sched = make_schedule(5, "linear", 1e-3, 0.2)
    image = np.where(np.add.outer(np.arange(6), np.arange(6)) < 6, 1.0, -1.0)
    data = LabeledImages(np.stack([image] * 16), np.zeros(16, dtype=np.int64))
    cfg = TrainConfig(epochs=60, batch_size=16, learning_rate=1e-2, seed=0, holdout_fraction=0.0)
    arch = DenoiserArch(num_timesteps=5, num_classes=1, channels=8, depth=3, time_dim=4, embed_dim=4)
    losses = train_denoiser(data, sched, cfg, arch).summary["epoch_losses"]
    assert np.mean(losses[-5:]) < np.mean(losses[:5])


def test_train_denoiser_rejects_mismatched_schedule():
    sched = make_schedule(5)
    data = LabeledImages(np.zeros((2, 4, 4)), np.array([0, 1]))
    with pytest.raises(ContractViolation):
        train_denoiser(data, sched, TrainConfig(epochs=1), DenoiserArch(num_timesteps=6))
    with pytest.raises(ContractViolation):
        train_denoiser(LabeledImages(np.zeros((0, 4, 4)), np.zeros(0)), sched, TrainConfig(epochs=1),
                       DenoiserArch(num_timesteps=5))
