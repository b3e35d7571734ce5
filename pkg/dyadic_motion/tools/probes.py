""" Linear probes from motion codes to face parameters """

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
from sklearn.linear_model import Ridge
from sklearn.metrics import r2_score

from .errors import ParameterError, ShapeError

log = logging.getLogger(__name__)


@dataclass
class MotionProbe:
    """ Ridge regression MotionCode -> named targets """
    fields: Tuple[str, ...]
    model: Ridge

    def predict(self, codes: np.ndarray) -> np.ndarray:
        prediction = self.model.predict(np.asarray(codes, dtype=np.float64))
        return prediction.reshape(len(codes), len(self.fields))

    def column(self, codes: np.ndarray, field: str) -> np.ndarray:
        return self.predict(codes)[:, self.fields.index(field)]

    def columns(self, codes: np.ndarray, fields: Sequence[str]) -> np.ndarray:
        prediction = self.predict(codes)
        return prediction[:, [self.fields.index(field) for field in fields]]

    def score(self, codes: np.ndarray, targets: np.ndarray) -> Dict[str, float]:
        """ Held-out R^2 per field """
        targets = np.asarray(targets, dtype=np.float64).reshape(len(codes), len(self.fields))
        values = r2_score(targets, self.predict(codes), multioutput="raw_values")
        return dict(zip(self.fields, (float(value) for value in values)))


def fit_probe(codes: np.ndarray, targets: np.ndarray, fields: Sequence[str], alpha: float = 1.0) -> MotionProbe:
    codes = np.asarray(codes, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if codes.ndim != 2 or codes.shape[0] < 2:
        raise ParameterError("a probe needs at least two codes")
    if targets.ndim == 1:
        targets = targets[:, None]
    if targets.shape != (codes.shape[0], len(fields)):
        raise ShapeError("probe targets", (codes.shape[0], len(fields)), targets.shape)
    model = Ridge(alpha=alpha)
    model.fit(codes, targets)
    return MotionProbe(fields=tuple(fields), model=model)


def split_fit_score(codes: np.ndarray, targets: np.ndarray, fields: Sequence[str],
                    alpha: float = 1.0, train_fraction: float = 0.75) -> Dict[str, float]:
    """ Fit on the first share of rows, score R^2 on the rest """
    cut = int(len(codes) * train_fraction)
    if cut < 2 or cut >= len(codes):
        raise ParameterError(f"cannot split {len(codes)} rows for a held-out probe")
    probe = fit_probe(codes[:cut], targets[:cut], fields, alpha)
    scores = probe.score(codes[cut:], targets[cut:])
    log.info("Probe R2: %s", scores)
    return scores
