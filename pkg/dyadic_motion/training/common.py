""" Shared training helpers """

import json
import logging
import math
from typing import Dict, Iterable

import torch
from tqdm import tqdm

from ..models.pd.config import RunConfig
from ..tools.config import Settings
from ..tools.errors import NumericalAbort
from ..tools.logs import progress_enabled

log = logging.getLogger(__name__)


def resolve_device() -> torch.device:
    return torch.device(Settings().DME_DEVICE)


def progress(iterable: Iterable, desc: str, total: int = None):
    return tqdm(iterable, desc=desc, total=total, leave=False, disable=not progress_enabled())


def check_finite(loss: torch.Tensor, components: Dict[str, float], step: int, stage: str) -> None:
    """ NumericalAbort with diagnostics when the loss is not finite """
    values = {"loss": float(loss.detach()), **components}
    if not all(math.isfinite(value) for value in values.values()):
        log.error("%s: non-finite loss at step %s: %s", stage, step, values)
        raise NumericalAbort(step, values, stage=stage)


def config_payload(config: RunConfig) -> dict:
    return json.loads(config.json())


def adamw(parameters, config) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        parameters, lr=config.lr, betas=(config.beta1, config.beta2), weight_decay=config.weight_decay,
    )
