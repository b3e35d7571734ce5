""" Fixed registry of metric names """

import logging
from typing import Callable, Dict, List, Optional

from ..tools.errors import ParameterError

log = logging.getLogger(__name__)

GROUPS = ("fidelity", "diversity", "distance", "sync", "interactivity", "continuity", "reserved")
# need pretrained networks, always reported as unavailable
RESERVED = ("fid", "lpips", "csim", "sync_score")


class MetricRegistry:
    _registry: Dict[str, dict] = {}

    @classmethod
    def declare(cls, name: str, group: str, needs_ground_truth: bool = False,
                higher_is_better: Optional[bool] = None, func: Optional[Callable] = None) -> None:
        if group not in GROUPS:
            raise ParameterError(f"Unknown metric group {group} for {name}")
        if name in cls._registry and cls._registry[name]["func"] is not func:
            raise ParameterError(f"Metric {name} is already registered")
        structure = {
            "name": name,
            "group": group,
            "needs_ground_truth": needs_ground_truth,
            "higher_is_better": higher_is_better,
            "func": func,
        }
        log.debug("Registering metric <%s>", structure)
        cls._registry[name] = structure

    @classmethod
    def register(cls, name: str, group: str, needs_ground_truth: bool = False,
                 higher_is_better: Optional[bool] = None):
        """ Decorator form of declare for metric functions """
        def _decorator(func):
            cls.declare(name, group, needs_ground_truth, higher_is_better, func)
            return func
        return _decorator

    @classmethod
    def is_registered(cls, name: str) -> bool:
        return name in cls._registry

    @classmethod
    def get(cls, name: str) -> dict:
        try:
            return cls._registry[name]
        except KeyError:
            raise KeyError(f"Metric {name} is not registered") from None

    @classmethod
    def names(cls, group: Optional[str] = None) -> List[str]:
        return sorted(
            name for name, item in cls._registry.items() if group is None or item["group"] == group
        )


for _name in RESERVED:
    MetricRegistry.declare(_name, "reserved")
