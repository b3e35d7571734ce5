""" Dual classifier-free guidance, deterministic DDIM, sliding-window streaming """

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..tools.errors import ParameterError, ShapeError
from ..tools.seeding import derive_seed, torch_generator
from .schedule import NoiseSchedule, forward_diffuse

log = logging.getLogger(__name__)

# denoiser(x_t (N, D_m), t, f_m (N, d_f) | None, prev_tail (P, D_m) | None) -> eps (N, D_m)
DenoiserFn = Callable[[torch.Tensor, int, Optional[torch.Tensor], Optional[torch.Tensor]], torch.Tensor]
# guider(audio_self (N, D_a), audio_other (N, D_a)) -> f_m (N, d_f)
GuiderFn = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


def cfg_predict(denoiser: DenoiserFn, x_t: torch.Tensor, t: int,
                f_m: Optional[torch.Tensor], prev_tail: Optional[torch.Tensor],
                s_motion: float = 2.0, s_prev: float = 1.5) -> torch.Tensor:
    """
    e0 + s_motion * (e1 - e0) + s_prev * (e2 - e1), where e0 drops both
    conditions, e1 keeps f_m and e2 keeps f_m and the previous tail.
    Without a tail the last term is zero and e2 is never evaluated.
    """
    if s_motion < 0 or s_prev < 0:
        raise ParameterError(f"guidance scales must be >= 0, got {s_motion}, {s_prev}")
    e0 = denoiser(x_t, t, None, None)
    e1 = denoiser(x_t, t, f_m, None)
    guided = e0 + s_motion * (e1 - e0)
    if prev_tail is not None:
        e2 = denoiser(x_t, t, f_m, prev_tail)
        guided = guided + s_prev * (e2 - e1)
    return guided


def ddim_step(x_t: torch.Tensor, t: int, t_prev: int, eps_hat: torch.Tensor,
              schedule: NoiseSchedule) -> torch.Tensor:
    """ Deterministic (eta = 0) DDIM update from t to t_prev """
    if t_prev >= t:
        raise ParameterError(f"t_prev ({t_prev}) must be < t ({t})")
    if t_prev < -1:
        raise ParameterError(f"t_prev must be >= -1, got {t_prev}")
    alpha_bar = schedule.alpha_bar_at(t)
    alpha_bar_prev = schedule.alpha_bar_at(t_prev)
    x0_hat = (x_t - math.sqrt(1.0 - alpha_bar) * eps_hat) / math.sqrt(alpha_bar)
    return math.sqrt(alpha_bar_prev) * x0_hat + math.sqrt(1.0 - alpha_bar_prev) * eps_hat


def ddim_timesteps(start_t: int, steps: int) -> List[int]:
    """ steps uniformly spaced timesteps from start_t down to 0, then -1 """
    if steps < 1:
        raise ParameterError(f"need at least one DDIM step, got {steps}")
    steps = min(steps, start_t + 1)
    grid = np.floor(np.linspace(start_t, 0, steps) + 0.5).astype(int).tolist() if steps > 1 else [start_t]
    return grid + [-1]


def window_noise(shape: Tuple[int, ...], seed: int, like: torch.Tensor) -> torch.Tensor:
    noise = torch.randn(shape, generator=torch_generator(seed), dtype=torch.float64)
    return noise.to(dtype=like.dtype, device=like.device)


def generate_window(denoiser: DenoiserFn, f_m: Optional[torch.Tensor], prev_tail: Optional[torch.Tensor],
                    m_self: torch.Tensor, schedule: NoiseSchedule, n_frames: int, seed: int,
                    ddim_steps: int = 20, s_motion: float = 2.0, s_prev: float = 1.5,
                    start_t: Optional[int] = None) -> torch.Tensor:
    """
    Noise the self code replicated over the window up to start_t
    (default T - 1) and walk the DDIM timesteps down to -1.
    """
    if m_self.dim() != 1:
        raise ShapeError("m_self", ("D_m", ), m_self.shape)
    if f_m is not None and f_m.shape[0] != n_frames:
        raise ShapeError("interactive motion feature", (n_frames, f_m.shape[-1]), f_m.shape)
    start_t = schedule.T - 1 if start_t is None else start_t
    schedule.check_t(start_t)
    #
    x0 = m_self.unsqueeze(0).expand(n_frames, -1)
    x = forward_diffuse(x0, start_t, window_noise(tuple(x0.shape), seed, m_self), schedule)
    timesteps = ddim_timesteps(start_t, ddim_steps)
    for t, t_prev in zip(timesteps[:-1], timesteps[1:]):
        eps_hat = cfg_predict(denoiser, x, t, f_m, prev_tail, s_motion, s_prev)
        x = ddim_step(x, t, t_prev, eps_hat, schedule)
    return x


def stream_generate(denoiser: DenoiserFn, guider: GuiderFn,
                    audio_windows: Sequence[Tuple[torch.Tensor, torch.Tensor]],
                    m_self: torch.Tensor, schedule: NoiseSchedule, n_frames: int, seed: int,
                    prev_frames: int = 10, use_prev_tail: bool = True, **sampler) -> torch.Tensor:
    """
    Generate M consecutive windows; window k > 0 is conditioned on the
    last prev_frames latents of window k - 1. Window k draws its initial
    noise from derive_seed(seed, k), so earlier windows never depend on
    later audio.
    """
    if not audio_windows:
        raise ParameterError("stream_generate needs at least one window")
    windows = []
    prev_tail = None
    for index, (audio_self, audio_other) in enumerate(audio_windows):
        f_m = guider(audio_self, audio_other)
        window = generate_window(
            denoiser, f_m, prev_tail if use_prev_tail else None, m_self, schedule,
            n_frames, derive_seed(seed, index), **sampler,
        )
        windows.append(window)
        prev_tail = window[-prev_frames:]
        log.debug("Generated window %s/%s", index + 1, len(audio_windows))
    return torch.cat(windows, dim=0)


def split_windows(audio_self: torch.Tensor, audio_other: torch.Tensor,
                  n_frames: int) -> List[Tuple[torch.Tensor, torch.Tensor]]:
    """ Cut dyadic audio into full windows, dropping the remainder """
    if audio_self.shape != audio_other.shape:
        raise ShapeError("partner audio track", audio_self.shape, audio_other.shape)
    count = audio_self.shape[0] // n_frames
    if count < 1:
        raise ParameterError(
            f"audio has {audio_self.shape[0]} frames, need a multiple of the window length {n_frames}"
        )
    return [
        (audio_self[k * n_frames:(k + 1) * n_frames], audio_other[k * n_frames:(k + 1) * n_frames])
        for k in range(count)
    ]
