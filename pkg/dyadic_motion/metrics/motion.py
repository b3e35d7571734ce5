""" Motion diversity (Var, SID), distances and streaming continuity """

import logging

import numpy as np
from scipy import linalg
from scipy.cluster.vq import kmeans2
from scipy.stats import entropy

from ..tools.errors import ParameterError, ShapeError
from .registry import MetricRegistry

log = logging.getLogger(__name__)

KMEANS_ITERATIONS = 20


def _sequence(codes, minimum: int, what: str) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.float64)
    if codes.ndim == 1:
        codes = codes[:, None]
    if codes.ndim != 2:
        raise ShapeError(what, ("T", "D"), codes.shape)
    if codes.shape[0] < minimum:
        raise ParameterError(f"{what} needs at least {minimum} frames, got {codes.shape[0]}")
    return codes


@MetricRegistry.register("motion_var", "diversity", higher_is_better=True)
def motion_var(codes) -> float:
    """ Mean over dimensions of the population temporal variance """
    return float(_sequence(codes, 2, "motion_var").var(axis=0).mean())


@MetricRegistry.register("motion_sid", "diversity", higher_is_better=True)
def motion_sid(codes, k: int = 8, seed: int = 0) -> float:
    """
    Shannon index -sum p_i ln p_i of cluster occupancy after seeded
    k-means++ (20 iterations). k is reduced to the number of distinct frames.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    codes = _sequence(codes, k, "motion_sid")
    distinct = np.unique(codes, axis=0).shape[0]
    k_eff = min(k, distinct)
    if k_eff == 1:
        return 0.0
    _, labels = kmeans2(codes, k_eff, iter=KMEANS_ITERATIONS, minit="++", seed=seed)
    occupancy = np.bincount(labels, minlength=k_eff) / labels.shape[0]
    return float(entropy(occupancy))


def frechet_distance(a, b, eps: float = 1e-6) -> float:
    """ Frechet distance between Gaussian fits of two feature sets """
    a = _sequence(a, 2, "frechet_distance")
    b = _sequence(b, 2, "frechet_distance")
    if a.shape[1] != b.shape[1]:
        raise ShapeError("frechet_distance features", ("*", a.shape[1]), b.shape)
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))
    covmean, _ = linalg.sqrtm(cov_a @ cov_b, disp=False)
    if not np.isfinite(covmean).all():
        log.warning("Singular product in frechet_distance, adding %s to diagonals", eps)
        offset = np.eye(cov_a.shape[0]) * eps
        covmean = linalg.sqrtm((cov_a + offset) @ (cov_b + offset))
    covmean = np.real(covmean)
    value = float(((mu_a - mu_b) ** 2).sum() + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(covmean))
    return max(value, 0.0)


def motion_mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError("motion_mse", a.shape, b.shape)
    return float(np.mean((a - b) ** 2))


@MetricRegistry.register("continuity_ratio", "continuity", higher_is_better=False)
def window_continuity(latents, window: int) -> float:
    """
    Mean L2 step across window boundaries divided by the mean L2 step
    inside windows.
    """
    latents = _sequence(latents, 2 * window, "window_continuity")
    steps = np.linalg.norm(np.diff(latents, axis=0), axis=1)
    boundary = np.zeros(steps.shape[0], dtype=bool)
    boundary[window - 1::window] = True
    interior = steps[~boundary].mean()
    if interior == 0:
        raise ParameterError("window_continuity undefined for constant windows")
    return float(steps[boundary].mean() / interior)
