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

"""
Interactive motion guider

Style vectors are extracted from motion codes, modulate two memory banks
(verbal and non-verbal motion) and the banks are read by cross-attention
queried with the agent and partner audio tracks.
"""

import math
from typing import Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from ..tools.errors import ParameterError, ShapeError

DEMODULATION_EPS = 1e-8


class MotionStyleEncoder(nn.Module):
    """ Frame-wise MLP D_m -> 64 -> d_s, then temporal mean """

    def __init__(self, motion_dim: int = 32, style_dim: int = 64, hidden: int = 64):
        super().__init__()
        self.motion_dim = motion_dim
        self.fc1 = nn.Linear(motion_dim, hidden)
        self.fc2 = nn.Linear(hidden, style_dim)

    def forward(self, codes: torch.Tensor) -> torch.Tensor:
        """ (T, D_m) -> (d_s,) or (B, T, D_m) -> (B, d_s) """
        if codes.shape[-1] != self.motion_dim:
            raise ShapeError("motion codes", ("T", self.motion_dim), codes.shape)
        if codes.shape[-2] < 1:
            raise ParameterError("style needs at least one motion code")
        return self.fc2(F.silu(self.fc1(codes))).mean(dim=-2)


class MemoryBank(nn.Module):
    """ K learnable d-dimensional embeddings with key/value projections """

    def __init__(self, size: int = 16, dim: int = 128):
        super().__init__()
        if size < 2:
            raise ParameterError(f"memory bank needs K >= 2, got {size}")
        self.embeddings = nn.Parameter(torch.randn(size, dim) / math.sqrt(dim))
        self.key_proj = nn.Linear(dim, dim, bias=False)
        self.value_proj = nn.Linear(dim, dim, bias=False)

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


class StyleModulation(nn.Module):
    """
    Row-wise weight modulation and demodulation of bank embeddings.

    scale = affine(s); e'_k = e_k * scale; e''_k = e'_k / sqrt(mean(e'_k^2) + eps).
    The affine starts at zero weights and unit bias so scale(0) = 1.
    """

    def __init__(self, style_dim: int = 64, dim: int = 128):
        super().__init__()
        self.affine = nn.Linear(style_dim, dim)
        nn.init.zeros_(self.affine.weight)
        nn.init.ones_(self.affine.bias)

    def forward(self, embeddings: torch.Tensor, style: Optional[torch.Tensor]) -> torch.Tensor:
        if style is None:
            return embeddings
        scale = self.affine(style)
        if scale.dim() == 1:
            modulated = embeddings * scale
        else:
            modulated = embeddings.unsqueeze(0) * scale.unsqueeze(-2)
        return modulated * torch.rsqrt(modulated.pow(2).mean(dim=-1, keepdim=True) + DEMODULATION_EPS)


def modulate_bank(bank: MemoryBank, style: Optional[torch.Tensor], modulation: StyleModulation) -> torch.Tensor:
    """ Modulated K x d matrix, the raw embeddings when style is NULL """
    return modulation(bank.embeddings, style)


class BankAttention(nn.Module):
    """ Single-head cross-attention from frame queries into a memory bank """

    def __init__(self, feature_dim: int = 128, dim: int = 128):
        super().__init__()
        self.feature_dim = feature_dim
        self.dim = dim
        self.query_proj = nn.Linear(feature_dim, dim, bias=False)
        self.out_proj = nn.Linear(dim, feature_dim, bias=False)

    def weights(self, queries: torch.Tensor, keys: torch.Tensor) -> torch.Tensor:
        logits = self.query_proj(queries) @ keys.transpose(-1, -2) / math.sqrt(self.dim)
        return torch.softmax(logits, dim=-1)

    def forward(self, queries: torch.Tensor, bank_matrix: torch.Tensor,
                bank: MemoryBank, return_weights: bool = False):
        """ queries (..., N, d_f), bank_matrix (..., K, d) -> (..., N, d_f) """
        if queries.shape[-1] != self.feature_dim:
            raise ShapeError("attention queries", ("N", self.feature_dim), queries.shape)
        if bank_matrix.shape[-1] != self.dim:
            raise ShapeError("bank matrix", ("K", self.dim), bank_matrix.shape)
        keys = bank.key_proj(bank_matrix)
        values = bank.value_proj(bank_matrix)
        attention = self.weights(queries, keys)
        output = self.out_proj(attention @ values)
        if return_weights:
            return output, attention
        return output


def cross_attend(queries: torch.Tensor, bank_matrix: torch.Tensor, bank: MemoryBank,
                 attention: BankAttention) -> torch.Tensor:
    return attention(queries, bank_matrix, bank)


def _mlp(in_dim: int, hidden: int, out_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(in_dim, hidden), nn.SiLU(),
        nn.Linear(hidden, hidden), nn.SiLU(),
        nn.Linear(hidden, out_dim),
    )


class FeatureFusion(nn.Module):
    """ Element-wise sum, then a frame-wise MLP with 2 hidden layers """

    def __init__(self, feature_dim: int = 128):
        super().__init__()
        self.mlp = _mlp(feature_dim, feature_dim, feature_dim)

    def forward(self, verbal: torch.Tensor, nonverbal: torch.Tensor) -> torch.Tensor:
        if verbal.shape != nonverbal.shape:
            raise ShapeError("nonverbal feature", verbal.shape, nonverbal.shape)
        return self.mlp(verbal + nonverbal)


def fuse_features(verbal: torch.Tensor, nonverbal: torch.Tensor, fusion: FeatureFusion) -> torch.Tensor:
    return fusion(verbal, nonverbal)


class TrackProjection(nn.Module):
    """ D_a -> d_f, 2 layers """

    def __init__(self, audio_dim: int = 24, feature_dim: int = 128):
        super().__init__()
        self.audio_dim = audio_dim
        self.net = nn.Sequential(
            nn.Linear(audio_dim, feature_dim), nn.SiLU(),
            nn.Linear(feature_dim, feature_dim),
        )

    def forward(self, track: torch.Tensor) -> torch.Tensor:
        if track.shape[-1] != self.audio_dim:
            raise ShapeError("audio track", ("N", self.audio_dim), track.shape)
        return self.net(track)


class InteractiveMotionGuider(nn.Module):
    """ (A_self, A_other, style) -> interactive motion feature f_m """

    def __init__(self, audio_dim: int = 24, motion_dim: int = 32, bank_size: int = 16, bank_dim: int = 128,
                 feature_dim: int = 128, style_dim: int = 64,
                 ablate_banks: bool = False, style_mod: bool = True):
        super().__init__()
        self.ablate_banks = ablate_banks
        self.style_mod = style_mod
        self.feature_dim = feature_dim
        self.style_encoder = MotionStyleEncoder(motion_dim, style_dim)
        self.project_self = TrackProjection(audio_dim, feature_dim)
        self.project_other = TrackProjection(audio_dim, feature_dim)
        if ablate_banks:
            self.direct = _mlp(2 * feature_dim, feature_dim, feature_dim)
        else:
            self.verbal_bank = MemoryBank(bank_size, bank_dim)
            self.nonverbal_bank = MemoryBank(bank_size, bank_dim)
            self.verbal_modulation = StyleModulation(style_dim, bank_dim)
            self.nonverbal_modulation = StyleModulation(style_dim, bank_dim)
            self.verbal_attention = BankAttention(feature_dim, bank_dim)
            self.nonverbal_attention = BankAttention(feature_dim, bank_dim)
            self.fusion = FeatureFusion(feature_dim)

    def encode_style(self, codes: torch.Tensor) -> torch.Tensor:
        return self.style_encoder(codes)

    def banks(self, style: Optional[torch.Tensor],
              style_keep: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Verbal and non-verbal bank matrices under the given style.
        style_keep (B,) marks batch rows whose style is present, the others get raw banks.
        """
        if not self.style_mod:
            style = None
        matrices = []
        for bank, modulation in (
                (self.verbal_bank, self.verbal_modulation),
                (self.nonverbal_bank, self.nonverbal_modulation),
        ):
            matrix = modulate_bank(bank, style, modulation)
            if style is not None and style_keep is not None:
                matrix = torch.where(style_keep.view(-1, 1, 1), matrix, bank.embeddings.expand_as(matrix))
            matrices.append(matrix)
        return matrices[0], matrices[1]

    def forward(self, audio_self: torch.Tensor, audio_other: torch.Tensor,
                style: Optional[torch.Tensor] = None, style_keep: Optional[torch.Tensor] = None) -> torch.Tensor:
        """ audio tracks (..., N, D_a), style (..., d_s) or None -> (..., N, d_f) """
        if audio_self.shape != audio_other.shape:
            raise ShapeError("partner audio track", audio_self.shape, audio_other.shape)
        query_self = self.project_self(audio_self)
        query_other = self.project_other(audio_other)
        if self.ablate_banks:
            return self.direct(torch.cat([query_self, query_other], dim=-1))
        verbal_matrix, nonverbal_matrix = self.banks(style, style_keep)
        verbal = self.verbal_attention(query_self, verbal_matrix, self.verbal_bank)
        nonverbal = self.nonverbal_attention(query_other, nonverbal_matrix, self.nonverbal_bank)
        return self.fusion(verbal, nonverbal)


def guider_forward(audio_self: torch.Tensor, audio_other: torch.Tensor, style: Optional[torch.Tensor],
                   guider: InteractiveMotionGuider) -> torch.Tensor:
    return guider(audio_self, audio_other, style)
