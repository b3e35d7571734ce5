""" Image fidelity: PSNR and windowed SSIM """

import numpy as np
from skimage.util import view_as_windows

from ..tools.errors import ParameterError, ShapeError
from .registry import MetricRegistry

PSNR_CAP = 99.0
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def _pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError("prediction", target.shape, pred.shape)
    return pred, target


@MetricRegistry.register("psnr", "fidelity", needs_ground_truth=True, higher_is_better=True)
def psnr(pred, target) -> float:
    """ 10 log10(1 / MSE) on unit range, capped at 99 dB """
    pred, target = _pair(pred, target)
    mse = float(np.mean((pred - target) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def grayscale(image: np.ndarray) -> np.ndarray:
    return image.mean(axis=-1) if image.ndim == 3 else image


@MetricRegistry.register("ssim", "fidelity", needs_ground_truth=True, higher_is_better=True)
def ssim(pred, target, window: int = 8, stride: int = 4) -> float:
    """ Mean SSIM over window x window patches at the given stride, on the channel mean """
    pred, target = _pair(pred, target)
    x, y = grayscale(pred), grayscale(target)
    if x.ndim != 2:
        raise ShapeError("image", ("H", "W", "C"), pred.shape)
    if min(x.shape) < window:
        raise ParameterError(f"image {x.shape} is smaller than the {window}x{window} window")
    #
    patches_x = view_as_windows(x, (window, window), step=stride).reshape(-1, window * window)
    patches_y = view_as_windows(y, (window, window), step=stride).reshape(-1, window * window)
    mu_x = patches_x.mean(axis=1)
    mu_y = patches_y.mean(axis=1)
    var_x = ((patches_x - mu_x[:, None]) ** 2).mean(axis=1)
    var_y = ((patches_y - mu_y[:, None]) ** 2).mean(axis=1)
    cov = ((patches_x - mu_x[:, None]) * (patches_y - mu_y[:, None])).mean(axis=1)
    numerator = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    denominator = (mu_x ** 2 + mu_y ** 2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(numerator / denominator))


def sequence_mean(metric, pred: np.ndarray, target: np.ndarray, **kwargs) -> float:
    """ Frame-averaged metric over (n, H, W, C) sequences """
    pred, target = _pair(pred, target)
    if pred.shape[0] == 0:
        raise ParameterError("empty frame sequence")
    return float(np.mean([metric(p, t, **kwargs) for p, t in zip(pred, target)]))
