""" Per-dimension standardization of motion latents """

from dataclasses import dataclass

import numpy as np
import torch

from ..tools.errors import ParameterError

MIN_STD = 1e-6


@dataclass(frozen=True, eq=False)
class LatentNormalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, codes: np.ndarray) -> "LatentNormalizer":
        """ codes (n, D_m) from the training clips """
        codes = np.asarray(codes, dtype=np.float64)
        if codes.ndim != 2 or codes.shape[0] < 2:
            raise ParameterError("latent statistics need at least two codes")
        std = codes.std(axis=0)
        # constant dimensions pass through unscaled
        std[std < MIN_STD] = 1.0
        return cls(mean=codes.mean(axis=0).astype(np.float32), std=std.astype(np.float32))

    @classmethod
    def identity(cls, dim: int) -> "LatentNormalizer":
        return cls(mean=np.zeros(dim, dtype=np.float32), std=np.ones(dim, dtype=np.float32))

    def _pair(self, like: torch.Tensor):
        return (
            torch.as_tensor(self.mean, dtype=like.dtype, device=like.device),
            torch.as_tensor(self.std, dtype=like.dtype, device=like.device),
        )

    def normalize(self, codes: torch.Tensor) -> torch.Tensor:
        mean, std = self._pair(codes)
        return (codes - mean) / std

    def denormalize(self, codes: torch.Tensor) -> torch.Tensor:
        mean, std = self._pair(codes)
        return codes * std + mean
