""" Noise schedule, closed-form forward diffusion, timestep embeddings """

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import torch

from ..tools.errors import ParameterError, ShapeError

Timestep = Union[int, torch.Tensor]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @classmethod
    def from_beta(cls, beta) -> "NoiseSchedule":
        beta = np.asarray(beta, dtype=np.float64)
        alpha = 1.0 - beta
        return cls(T=int(beta.shape[0]), beta=beta, alpha=alpha, alpha_bar=np.cumprod(alpha))

    @classmethod
    def from_alpha_bar(cls, alpha_bar) -> "NoiseSchedule":
        """ Schedule with prescribed cumulative products, for closed-form checks """
        alpha_bar = np.asarray(alpha_bar, dtype=np.float64)
        alpha = alpha_bar / np.concatenate([[1.0], alpha_bar[:-1]])
        return cls(T=int(alpha_bar.shape[0]), beta=1.0 - alpha, alpha=alpha, alpha_bar=alpha_bar)

    def check_t(self, t: int) -> None:
        if not 0 <= t < self.T:
            raise ParameterError(f"timestep {t} outside [0, {self.T})")

    def alpha_bar_at(self, t: int) -> float:
        """ alpha_bar_t, with alpha_bar_{-1} = 1 """
        if t == -1:
            return 1.0
        self.check_t(t)
        return float(self.alpha_bar[t])

    def alpha_bar_tensor(self, t: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
        table = torch.as_tensor(self.alpha_bar, dtype=like.dtype, device=like.device)
        return table[t.to(device=like.device, dtype=torch.long)]


def make_schedule(T: int = 1000, beta_min: float = 1e-4, beta_max: float = 0.02) -> NoiseSchedule:
    """ Linear beta schedule over T steps """
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_min < beta_max < 1.0:
        raise ParameterError(f"need 0 < beta_min < beta_max < 1, got {beta_min}, {beta_max}")
    return NoiseSchedule.from_beta(np.linspace(beta_min, beta_max, T))


def forward_diffuse(x0: torch.Tensor, t: Timestep, noise: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """
    x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * noise

    t is a python int, or a (B,) tensor for a batch of windows (B, N, D).
    """
    if noise.shape != x0.shape:
        raise ShapeError("noise", x0.shape, noise.shape)
    if isinstance(t, torch.Tensor) and t.dim() > 0:
        if int(t.min()) < 0 or int(t.max()) >= schedule.T:
            raise ParameterError(f"timesteps outside [0, {schedule.T})")
        alpha_bar = schedule.alpha_bar_tensor(t, x0).view(-1, *([1] * (x0.dim() - 1)))
        return alpha_bar.sqrt() * x0 + (1.0 - alpha_bar).sqrt() * noise
    t = int(t)
    schedule.check_t(t)
    alpha_bar = float(schedule.alpha_bar[t])
    return math.sqrt(alpha_bar) * x0 + math.sqrt(1.0 - alpha_bar) * noise


def sinusoidal_embed(t, dim: int) -> torch.Tensor:
    """
    Interleaved [sin(t w_0), cos(t w_0), sin(t w_1), ...] with
    w_i = 10000^(-2i/dim). t may be a scalar or any tensor of positions.
    """
    if dim < 2 or dim % 2:
        raise ParameterError(f"embedding dim must be even, got {dim}")
    positions = torch.as_tensor(t, dtype=torch.float64)
    frequencies = torch.exp(
        -math.log(10000.0) * torch.arange(0, dim, 2, dtype=torch.float64, device=positions.device) / dim
    )
    angles = positions.unsqueeze(-1) * frequencies
    return torch.stack([angles.sin(), angles.cos()], dim=-1).flatten(-2)
