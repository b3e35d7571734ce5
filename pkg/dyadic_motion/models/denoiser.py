#   Copyright 2026 The dyadic-motion Authors
#
#   Licensed under the Apache License, Version 2.0 (the "License");
#   you may not use this file except in compliance with the License.
#   You may obtain a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS,
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#   See the License for the specific language governing permissions and
#   limitations under the License.

""" Conditional diffusion transformer over motion-latent windows """

from typing import Optional

import torch
from torch import nn

from ..diffusion.schedule import sinusoidal_embed
from ..tools.errors import ShapeError


def _keep_where(keep: Optional[torch.Tensor], updated: torch.Tensor, original: torch.Tensor) -> torch.Tensor:
    if keep is None:
        return updated
    return torch.where(keep.view(-1, 1, 1), updated, original)


class DenoiserBlock(nn.Module):
    """
    Self-attention, motion-attention (K/V = f_m), temporal-attention
    (K/V = previous tail), feed-forward; post-norm residual sublayers.
    A NULL condition leaves the tokens untouched by its sublayer.
    """

    def __init__(self, width: int = 128, heads: int = 4, ff_mult: int = 4):
        super().__init__()
        self.self_attention = nn.MultiheadAttention(width, heads, batch_first=True)
        self.motion_attention = nn.MultiheadAttention(width, heads, batch_first=True)
        self.temporal_attention = nn.MultiheadAttention(width, heads, batch_first=True)
        self.feed_forward = nn.Sequential(
            nn.Linear(width, ff_mult * width), nn.SiLU(), nn.Linear(ff_mult * width, width),
        )
        self.norm_self = nn.LayerNorm(width)
        self.norm_motion = nn.LayerNorm(width)
        self.norm_temporal = nn.LayerNorm(width)
        self.norm_ff = nn.LayerNorm(width)

    def forward(self, tokens: torch.Tensor,
                motion: Optional[torch.Tensor] = None, motion_keep: Optional[torch.Tensor] = None,
                context: Optional[torch.Tensor] = None, context_keep: Optional[torch.Tensor] = None) -> torch.Tensor:
        attended, _ = self.self_attention(tokens, tokens, tokens, need_weights=False)
        tokens = self.norm_self(tokens + attended)
        if motion is not None:
            attended, _ = self.motion_attention(tokens, motion, motion, need_weights=False)
            tokens = _keep_where(motion_keep, self.norm_motion(tokens + attended), tokens)
        if context is not None:
            attended, _ = self.temporal_attention(tokens, context, context, need_weights=False)
            tokens = _keep_where(context_keep, self.norm_temporal(tokens + attended), tokens)
        return self.norm_ff(tokens + self.feed_forward(tokens))


class Denoiser(nn.Module):
    """
    eps-prediction network.

    Tokens are the projected noised latents plus one timestep token
    appended along the time axis; f_m and the previous tail are projected
    to the model width and read by the motion and temporal attentions.
    Positions are sinusoidal, tail frames sit at negative positions.
    """

    def __init__(self, motion_dim: int = 32, feature_dim: int = 128, width: int = 128,
                 heads: int = 4, blocks: int = 4):
        super().__init__()
        self.motion_dim = motion_dim
        self.feature_dim = feature_dim
        self.width = width
        self.input_proj = nn.Linear(motion_dim, width)
        self.time_mlp = nn.Sequential(nn.Linear(width, width), nn.SiLU(), nn.Linear(width, width))
        self.motion_proj = nn.Linear(feature_dim, width)
        self.context_proj = nn.Linear(motion_dim, width)
        self.blocks = nn.ModuleList([DenoiserBlock(width, heads) for _ in range(blocks)])
        self.output_head = nn.Linear(width, motion_dim)

    def _positions(self, start: int, count: int, like: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(start, start + count)
        return sinusoidal_embed(positions, self.width).to(dtype=like.dtype, device=like.device)

    def forward(self, x_t: torch.Tensor, t, f_m: Optional[torch.Tensor] = None,
                prev_tail: Optional[torch.Tensor] = None,
                motion_keep: Optional[torch.Tensor] = None,
                context_keep: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        x_t (B, N, D_m) or (N, D_m); t int or (B,); f_m (B, N, d_f);
        prev_tail (B, P, D_m). motion_keep / context_keep (B,) bool mark
        the batch rows whose condition is present.
        """
        unbatched = x_t.dim() == 2
        if unbatched:
            x_t = x_t.unsqueeze(0)
            f_m = None if f_m is None else f_m.unsqueeze(0)
            prev_tail = None if prev_tail is None else prev_tail.unsqueeze(0)
        if x_t.dim() != 3 or x_t.shape[-1] != self.motion_dim:
            raise ShapeError("noised window", ("B", "N", self.motion_dim), x_t.shape)
        batch, n_frames, _ = x_t.shape
        #
        t = torch.as_tensor(t, device=x_t.device).reshape(-1).expand(batch)
        time_token = self.time_mlp(sinusoidal_embed(t, self.width).to(x_t))
        tokens = self.input_proj(x_t) + self._positions(0, n_frames, x_t)
        tokens = torch.cat([tokens, time_token.unsqueeze(1)], dim=1)
        #
        motion = None
        if f_m is not None:
            if f_m.shape[:2] != (batch, n_frames) or f_m.shape[-1] != self.feature_dim:
                raise ShapeError("interactive motion feature", (batch, n_frames, self.feature_dim), f_m.shape)
            motion = self.motion_proj(f_m) + self._positions(0, n_frames, x_t)
        context = None
        if prev_tail is not None:
            if prev_tail.dim() != 3 or prev_tail.shape[0] != batch or prev_tail.shape[-1] != self.motion_dim:
                raise ShapeError("previous tail", (batch, "P", self.motion_dim), prev_tail.shape)
            context = self.context_proj(prev_tail) + self._positions(-prev_tail.shape[1], prev_tail.shape[1], x_t)
        #
        for block in self.blocks:
            tokens = block(tokens, motion, motion_keep, context, context_keep)
        eps = self.output_head(tokens[:, :n_frames])
        return eps[0] if unbatched else eps
