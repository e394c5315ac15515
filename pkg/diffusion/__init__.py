from diffusion.process import forward_noise, forward_noise_step, reverse_step
from diffusion.sampling import EpsilonPredictor, Trajectory, sample_loop
from diffusion.schedule import NoiseSchedule, make_schedule
from diffusion.training import epsilon_loss, evaluate_epsilon_mse, train_denoiser

__all__ = [
    "EpsilonPredictor",
    "NoiseSchedule",
    "Trajectory",
    "epsilon_loss",
    "evaluate_epsilon_mse",
    "forward_noise",
    "forward_noise_step",
    "make_schedule",
    "reverse_step",
    "sample_loop",
    "train_denoiser",
]
