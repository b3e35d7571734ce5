""" Stage-2 network: motion guider feeding the denoiser """

from typing import Optional

import torch
from torch import nn

from .denoiser import Denoiser
from .guider import InteractiveMotionGuider
from .pd.config import RunConfig


class InteractiveGenerator(nn.Module):

    def __init__(self, guider: InteractiveMotionGuider, denoiser: Denoiser):
        super().__init__()
        self.guider = guider
        self.denoiser = denoiser

    @classmethod
    def from_config(cls, config: RunConfig) -> "InteractiveGenerator":
        guider = InteractiveMotionGuider(
            audio_dim=config.world.audio_dim,
            motion_dim=config.motion.motion_dim,
            bank_size=config.guider.bank_size,
            bank_dim=config.guider.bank_dim,
            feature_dim=config.guider.feature_dim,
            style_dim=config.guider.style_dim,
            ablate_banks=not config.ablation.memory_banks,
            style_mod=config.ablation.style_mod,
        )
        denoiser = Denoiser(
            motion_dim=config.diffusion.D_m,
            feature_dim=config.guider.feature_dim,
            width=config.diffusion.width,
            heads=config.diffusion.heads,
            blocks=config.diffusion.blocks,
        )
        return cls(guider, denoiser)

    def style(self, codes: Optional[torch.Tensor]) -> Optional[torch.Tensor]:
        return None if codes is None else self.guider.encode_style(codes)

    def forward(self, x_t: torch.Tensor, t: torch.Tensor,
                audio_self: torch.Tensor, audio_other: torch.Tensor,
                style_codes: torch.Tensor, prev_tail: torch.Tensor,
                style_keep: Optional[torch.Tensor] = None,
                motion_keep: Optional[torch.Tensor] = None,
                context_keep: Optional[torch.Tensor] = None) -> torch.Tensor:
        """ Batched training pass with per-sample condition dropout """
        f_m = self.guider(audio_self, audio_other, self.style(style_codes), style_keep)
        return self.denoiser(x_t, t, f_m, prev_tail, motion_keep, context_keep)
