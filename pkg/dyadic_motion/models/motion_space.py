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

""" Stage 1: hybrid facial representation, motion codes, flow-warped appearance """

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..tools.errors import ShapeError, check_shape
from ..world.render import (
    CONTOUR_INDEX_SET, EYE_LEFT, EYE_RIGHT, MOUTH_INDEX_SET, N_LANDMARKS, RenderedFrame,
)
from .pd.config import InputMode

BOX_DILATION = 4
FALLBACK_BOX = 8
MAX_FLOW = 2.0


@dataclass(frozen=True, eq=False)
class HybridFacialRep:
    masked_pixels: np.ndarray
    contour_channel: np.ndarray
    fallback_boxes: Tuple[str, ...] = ()

    def stack(self) -> np.ndarray:
        """ H x W x 4: masked pixels then the contour channel """
        return np.concatenate([self.masked_pixels, self.contour_channel[..., None]], axis=-1)


def landmark_box(points: np.ndarray, size: int, dilation: int = BOX_DILATION) -> Optional[Tuple[int, int, int, int]]:
    """ (y0, y1, x0, x1) half-open pixel box around points, None when empty """
    x0 = max(0, int(math.floor(points[:, 0].min() * size)) - dilation)
    x1 = min(size, int(math.ceil(points[:, 0].max() * size)) + dilation)
    y0 = max(0, int(math.floor(points[:, 1].min() * size)) - dilation)
    y1 = min(size, int(math.ceil(points[:, 1].max() * size)) + dilation)
    if x1 <= x0 or y1 <= y0:
        return None
    return y0, y1, x0, x1


def _fallback_box(points: np.ndarray, size: int) -> Tuple[int, int, int, int]:
    centroid = np.clip(points.mean(axis=0), 0.0, 1.0)
    cx = min(max(int(round(centroid[0] * size)), FALLBACK_BOX // 2), size - FALLBACK_BOX // 2)
    cy = min(max(int(round(centroid[1] * size)), FALLBACK_BOX // 2), size - FALLBACK_BOX // 2)
    half = FALLBACK_BOX // 2
    return cy - half, cy + half, cx - half, cx + half


def rasterize_points(points: np.ndarray, size: int) -> np.ndarray:
    """ Binary H x W mask, each point drawn as a 3x3 square """
    mask = np.zeros((size, size), dtype=np.float32)
    columns = np.clip(np.floor(points[:, 0] * size).astype(int), 0, size - 1)
    rows = np.clip(np.floor(points[:, 1] * size).astype(int), 0, size - 1)
    for row, column in zip(rows.tolist(), columns.tolist()):
        mask[max(0, row - 1):row + 2, max(0, column - 1):column + 2] = 1.0
    return mask


def region_mask(landmarks: np.ndarray, size: int) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """ Union of the eye and lip boxes, plus names of boxes that fell back """
    mask = np.zeros((size, size), dtype=bool)
    fallback = []
    for name, index in (("eye_left", EYE_LEFT), ("eye_right", EYE_RIGHT), ("lips", MOUTH_INDEX_SET)):
        points = landmarks[list(index)]
        box = landmark_box(points, size)
        if box is None:
            box = _fallback_box(points, size)
            fallback.append(name)
        y0, y1, x0, x1 = box
        mask[y0:y1, x0:x1] = True
    return mask, tuple(fallback)


def build_hybrid_rep(frame: RenderedFrame, mode: InputMode = InputMode.HYBRID) -> HybridFacialRep:
    """ Motion-encoder input for one frame """
    pixels = np.asarray(frame.pixels, dtype=np.float32)
    landmarks = np.asarray(frame.landmarks, dtype=np.float64)
    check_shape("landmarks", landmarks, (N_LANDMARKS, 2))
    size = pixels.shape[0]
    mode = InputMode(mode)
    #
    if mode == InputMode.INTACT_IMAGE:
        return HybridFacialRep(pixels.copy(), np.zeros((size, size), dtype=np.float32))
    if mode == InputMode.LANDMARKS_MAP:
        return HybridFacialRep(np.zeros_like(pixels), rasterize_points(landmarks, size))
    #
    mask, fallback = region_mask(landmarks, size)
    masked = np.where(mask[..., None], pixels, 0.0).astype(np.float32)
    contour = rasterize_points(landmarks[list(CONTOUR_INDEX_SET)], size)
    return HybridFacialRep(masked, contour, fallback)


def build_hybrid_batch(pixels: np.ndarray, landmarks: np.ndarray,
                       mode: InputMode = InputMode.HYBRID) -> np.ndarray:
    """ (n, 4, H, W) float32 encoder inputs for a clip """
    reps = [
        build_hybrid_rep(RenderedFrame(pixels=pixels[index], landmarks=landmarks[index]), mode).stack()
        for index in range(pixels.shape[0])
    ]
    return np.ascontiguousarray(np.stack(reps).transpose(0, 3, 1, 2))


def to_chw(frames: np.ndarray) -> torch.Tensor:
    """ (..., H, W, 3) numpy -> (..., 3, H, W) tensor """
    return torch.from_numpy(np.ascontiguousarray(np.moveaxis(frames, -1, -3)))


def to_hwc(frames: torch.Tensor) -> np.ndarray:
    return np.moveaxis(frames.detach().cpu().numpy(), -3, -1)


class MotionEncoder(nn.Module):
    """ 4 stride-2 conv stages, spatial mean pool, 2 fully connected layers """

    def __init__(self, motion_dim: int = 32, in_channels: int = 4,
                 channels: Sequence[int] = (16, 32, 64, 64), hidden: int = 128):
        super().__init__()
        self.in_channels = in_channels
        stages = []
        previous = in_channels
        for width in channels:
            stages += [nn.Conv2d(previous, width, 3, stride=2, padding=1), nn.SiLU()]
            previous = width
        self.features = nn.Sequential(*stages)
        self.fc1 = nn.Linear(previous, hidden)
        self.fc2 = nn.Linear(hidden, motion_dim)
        for module in self.modules():
            if isinstance(module, (nn.Conv2d, nn.Linear)):
                nn.init.zeros_(module.bias)

    def forward(self, reps: torch.Tensor) -> torch.Tensor:
        check_shape("hybrid representation", reps, (None, self.in_channels, None, None))
        pooled = self.features(reps).mean(dim=(2, 3))
        return self.fc2(F.silu(self.fc1(pooled)))


class FlowEstimator(nn.Module):
    """ (m_src, m_dri) -> D x H' x W' x 3 displacement, tanh-scaled to [-2, 2] """

    def __init__(self, motion_dim: int = 32, volume_shape: Tuple[int, int, int] = (4, 16, 16), hidden: int = 256):
        super().__init__()
        self.motion_dim = motion_dim
        self.volume_shape = tuple(volume_shape)
        self.fc1 = nn.Linear(2 * motion_dim, hidden)
        self.fc2 = nn.Linear(hidden, hidden)
        self.head = nn.Linear(hidden, int(np.prod(self.volume_shape)) * 3)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, m_src: torch.Tensor, m_dri: torch.Tensor) -> torch.Tensor:
        check_shape("m_src", m_src, (None, self.motion_dim))
        check_shape("m_dri", m_dri, (m_src.shape[0], self.motion_dim))
        hidden = F.silu(self.fc1(torch.cat([m_src, m_dri], dim=-1)))
        hidden = F.silu(self.fc2(hidden))
        flow = MAX_FLOW * torch.tanh(self.head(hidden))
        return flow.view(m_src.shape[0], *self.volume_shape, 3)


class AppearanceEncoder(nn.Module):
    """ Stem conv plus 2 stride-2 convs, channels folded into (C, D) """

    def __init__(self, channels: int = 16, depth: int = 4):
        super().__init__()
        self.channels = channels
        self.depth = depth
        self.net = nn.Sequential(
            nn.Conv2d(3, 32, 3, stride=1, padding=1), nn.SiLU(),
            nn.Conv2d(32, 64, 4, stride=2, padding=1), nn.SiLU(),
            nn.Conv2d(64, channels * depth, 4, stride=2, padding=1),
        )

    def forward(self, pixels: torch.Tensor) -> torch.Tensor:
        check_shape("frame pixels", pixels, (None, 3, None, None))
        features = self.net(pixels)
        batch, _, height, width = features.shape
        return features.view(batch, self.channels, self.depth, height, width)


def identity_grid(depth: int, height: int, width: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """ (D, H, W, 3) sampling grid in grid_sample's (x, y, z) order """
    axes = [torch.linspace(-1.0, 1.0, steps, dtype=dtype, device=device) for steps in (depth, height, width)]
    z, y, x = torch.meshgrid(*axes, indexing="ij")
    return torch.stack([x, y, z], dim=-1)


def warp_volume(volume: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """
    Backward warp: output voxel (d, h, w) samples the input at
    (d, h, w) + displacement with trilinear interpolation, border clamped.
    Displacement is (d, h, w)-ordered, in normalized [-1, 1] volume units.
    """
    if volume.dim() != 5:
        raise ShapeError("appearance volume", ("B", "C", "D", "H", "W"), volume.shape)
    batch, _, depth, height, width = volume.shape
    check_shape("motion flow", flow, (batch, depth, height, width, 3))
    grid = identity_grid(depth, height, width, dtype=volume.dtype, device=volume.device)
    grid = grid.unsqueeze(0) + flow.flip(-1)
    return F.grid_sample(volume, grid, mode="bilinear", padding_mode="border", align_corners=True)


class FaceDecoder(nn.Module):
    """ Depth folded into channels, 2 stride-2 transposed convs and a final stage, sigmoid """

    def __init__(self, channels: int = 16, depth: int = 4):
        super().__init__()
        self.channels = channels
        self.depth = depth
        self.net = nn.Sequential(
            nn.ConvTranspose2d(channels * depth, 64, 4, stride=2, padding=1), nn.SiLU(),
            nn.ConvTranspose2d(64, 32, 4, stride=2, padding=1), nn.SiLU(),
        )
        self.out = nn.ConvTranspose2d(32, 3, 3, stride=1, padding=1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, volume: torch.Tensor) -> torch.Tensor:
        check_shape("appearance volume", volume, (None, self.channels, self.depth, None, None))
        batch, _, _, height, width = volume.shape
        folded = volume.reshape(batch, self.channels * self.depth, height, width)
        return torch.sigmoid(self.out(self.net(folded)))


class ImitationModel(nn.Module):
    """ Motion encoder, flow estimator, face encoder and face decoder """

    def __init__(self, motion_dim: int = 32, image_size: int = 64, channels: int = 16, depth: int = 4):
        super().__init__()
        self.image_size = image_size
        self.volume_shape = (depth, image_size // 4, image_size // 4)
        self.motion_encoder = MotionEncoder(motion_dim)
        self.flow_estimator = FlowEstimator(motion_dim, self.volume_shape)
        self.appearance_encoder = AppearanceEncoder(channels, depth)
        self.face_decoder = FaceDecoder(channels, depth)

    @property
    def motion_dim(self) -> int:
        return self.flow_estimator.motion_dim

    def forward(self, source_pixels: torch.Tensor, source_reps: torch.Tensor,
                driving_reps: torch.Tensor) -> torch.Tensor:
        """ Batched reconstruction: one driving frame per source frame """
        m_src = self.motion_encoder(source_reps)
        m_dri = self.motion_encoder(driving_reps)
        flow = self.flow_estimator(m_src, m_dri)
        volume = self.appearance_encoder(source_pixels)
        return self.face_decoder(warp_volume(volume, flow))

    def animate(self, source_pixels: torch.Tensor, m_src: torch.Tensor, m_dri: torch.Tensor) -> torch.Tensor:
        """ One source (3, H, W), N driving codes -> N frames; appearance encoded once """
        volume = self.appearance_encoder(source_pixels.unsqueeze(0))
        n = m_dri.shape[0]
        flow = self.flow_estimator(m_src.expand(n, -1), m_dri)
        return self.face_decoder(warp_volume(volume.expand(n, *volume.shape[1:]), flow))


def encode_motion(rep: HybridFacialRep, encoder: MotionEncoder) -> torch.Tensor:
    """ MotionCode of one representation """
    stacked = torch.from_numpy(rep.stack()).permute(2, 0, 1).unsqueeze(0)
    parameter = next(encoder.parameters())
    with torch.no_grad():
        return encoder(stacked.to(dtype=parameter.dtype, device=parameter.device))[0]


@torch.no_grad()
def encode_clip_motion(encoder: MotionEncoder, pixels: np.ndarray, landmarks: np.ndarray,
                       mode: InputMode = InputMode.HYBRID, batch_size: int = 256) -> np.ndarray:
    """ (n, D_m) float32 motion codes of a clip """
    reps = build_hybrid_batch(pixels, landmarks, mode)
    parameter = next(encoder.parameters())
    codes = []
    for start in range(0, reps.shape[0], batch_size):
        chunk = torch.from_numpy(reps[start:start + batch_size]).to(dtype=parameter.dtype, device=parameter.device)
        codes.append(encoder(chunk).float().cpu())
    return torch.cat(codes).numpy()


@torch.no_grad()
def imitate(model: ImitationModel, source: RenderedFrame, driving: Sequence[RenderedFrame],
            mode: InputMode = InputMode.HYBRID) -> np.ndarray:
    """ Animate the source portrait with the driving frames' motion, (N, H, W, 3) """
    sizes = {frame.pixels.shape for frame in driving} | {source.pixels.shape}
    if len(sizes) != 1:
        raise ShapeError("frames", [source.pixels.shape], sorted(sizes))
    parameter = next(model.parameters())
    source_rep = build_hybrid_rep(source, mode).stack()
    driving_reps = np.stack([build_hybrid_rep(frame, mode).stack() for frame in driving])
    m_src = model.motion_encoder(torch.from_numpy(source_rep).permute(2, 0, 1)[None].to(parameter))
    m_dri = model.motion_encoder(torch.from_numpy(driving_reps).permute(0, 3, 1, 2).to(parameter))
    source_pixels = to_chw(np.asarray(source.pixels, dtype=np.float32)).to(parameter)
    return to_hwc(model.animate(source_pixels, m_src, m_dri))


def stage1_loss(pred: torch.Tensor, target: torch.Tensor, grad_weight: float = 0.5) -> Tuple[torch.Tensor, Dict[str, float]]:
    """
    L1(pred, target) + grad_weight * L1 of forward-difference image gradients,
    the gradient term summing the x and y mean absolute differences.
    """
    if pred.shape != target.shape:
        raise ShapeError("stage-1 prediction", target.shape, pred.shape)
    l1 = (pred - target).abs().mean()
    grad_x = (pred[..., :, 1:] - pred[..., :, :-1]) - (target[..., :, 1:] - target[..., :, :-1])
    grad_y = (pred[..., 1:, :] - pred[..., :-1, :]) - (target[..., 1:, :] - target[..., :-1, :])
    grad = grad_x.abs().mean() + grad_y.abs().mean()
    total = l1 + grad_weight * grad
    return total, {"l1": float(l1.detach()), "grad": float(grad.detach())}
