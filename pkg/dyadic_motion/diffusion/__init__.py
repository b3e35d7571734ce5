""" Diffusion over motion-latent windows """

from .normalize import LatentNormalizer
from .sampling import cfg_predict, ddim_step, ddim_timesteps, generate_window, split_windows, stream_generate
from .schedule import NoiseSchedule, forward_diffuse, make_schedule, sinusoidal_embed
