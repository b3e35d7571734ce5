from dataclasses import asdict, is_dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any

import json

import numpy as np
import torch


def formatted_value(obj: Any):
    if isinstance(obj, datetime):
        return obj.isoformat(timespec='seconds') + 'Z'
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, torch.Tensor):
        return obj.detach().cpu().tolist()
    if isinstance(obj, Path):
        return str(obj)
    if is_dataclass(obj) and not isinstance(obj, type):
        return asdict(obj)
    return str(obj)


def serialize(obj: Any) -> Any:
    """ Turn pydantic models, dataclasses, arrays and friends into plain JSON data """
    if isinstance(obj, (list, set, tuple)):
        return [serialize(i) for i in obj]
    try:
        j = obj.json()
    except AttributeError:
        j = json.dumps(obj, ensure_ascii=False, default=formatted_value)
    return json.loads(j)


def dumps_sorted(obj: Any) -> str:
    """ Stable, diffable JSON text """
    return json.dumps(serialize(obj), ensure_ascii=False, sort_keys=True, indent=2)
