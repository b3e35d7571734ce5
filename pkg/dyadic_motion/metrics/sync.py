""" Audio-lip synchronization proxy """

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import pearsonr

from ..tools.errors import ParameterError
from .registry import MetricRegistry

log = logging.getLogger(__name__)

MIN_FRAMES = 50


@dataclass(frozen=True)
class SyncResult:
    value: float
    lag: int
    defined: bool = True


def _correlation(a: np.ndarray, b: np.ndarray) -> float:
    if a.std() == 0 or b.std() == 0:
        return float("nan")
    return float(pearsonr(a, b)[0])


@MetricRegistry.register("av_sync_corr", "sync", higher_is_better=True)
def av_sync_corr(mouth_open, energy_self, max_lag: int = 5) -> SyncResult:
    """
    Maximum Pearson correlation between mouth[t] and energy[t - lag]
    over lag in [-max_lag, max_lag]. Constant input gives 0, not defined.
    """
    mouth = np.asarray(mouth_open, dtype=np.float64)
    energy = np.asarray(energy_self, dtype=np.float64)
    if mouth.shape != energy.shape or mouth.ndim != 1:
        raise ParameterError(f"sequences must be 1-D of equal length, got {mouth.shape} and {energy.shape}")
    if mouth.shape[0] < MIN_FRAMES:
        raise ParameterError(f"av_sync_corr needs at least {MIN_FRAMES} frames, got {mouth.shape[0]}")
    if max_lag < 0 or max_lag >= mouth.shape[0] - 1:
        raise ParameterError(f"invalid max_lag {max_lag}")
    if mouth.std() == 0 or energy.std() == 0:
        log.warning("Constant sequence, correlation undefined")
        return SyncResult(value=0.0, lag=0, defined=False)
    #
    n = mouth.shape[0]
    best = None
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            value = _correlation(mouth[lag:], energy[:n - lag])
        else:
            value = _correlation(mouth[:n + lag], energy[-lag:])
        if np.isfinite(value) and (best is None or value > best.value):
            best = SyncResult(value=value, lag=lag)
    if best is None:
        return SyncResult(value=0.0, lag=0, defined=False)
    return best


MetricRegistry.declare("av_sync_lag", "sync")
