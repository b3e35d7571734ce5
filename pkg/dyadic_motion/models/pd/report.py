""" Evaluation report """

import math
from typing import Dict, List, Union

from pydantic import validator

from .config import StrictModel

UNAVAILABLE = "unavailable"

MetricValue = Union[float, str]


def _check_block(block: Dict[str, MetricValue]) -> None:
    from ...metrics import MetricRegistry  # pylint: disable=C0415
    for name, item in block.items():
        assert MetricRegistry.is_registered(name), f"unknown metric {name}"
        if isinstance(item, str):
            assert item == UNAVAILABLE, f"{name}: only '{UNAVAILABLE}' is allowed as text"
        else:
            assert math.isfinite(item), f"{name}: non-finite value"


class EvalReport(StrictModel):
    metrics: Dict[str, MetricValue]
    per_clip: Dict[str, Dict[str, MetricValue]] = {}
    flags: List[str] = []
    config_hash: str

    @validator("metrics")
    def metrics_known_and_finite(cls, value):  # pylint: disable=E0213
        _check_block(value)
        return value

    @validator("per_clip")
    def per_clip_known_and_finite(cls, value):  # pylint: disable=E0213
        for block in value.values():
            _check_block(block)
        return value
