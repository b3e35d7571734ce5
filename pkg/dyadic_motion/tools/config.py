# pylint: disable=E1101,C0103
#
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

""" Config """

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Mapping, Optional

from pydantic import ValidationError

from ..models.pd.config import RunConfig
from ..patterns import SingletonABC
from .errors import ParameterError, StorageError

log = logging.getLogger(__name__)


class Settings(metaclass=SingletonABC):  # pylint: disable=R0903
    """ Process-wide settings taken from the environment """

    def __init__(self, environ: Optional[Mapping[str, str]] = None):
        self.load_settings(
            os.environ if environ is None else environ,
            (
                # Worker cap for dataset generation and torch intra-op threads
                ("DME_THREADS", "int", os.cpu_count() or 1),
                # Torch device for training and sampling
                ("DME_DEVICE", "str", "cpu"),
                ("DME_LOG_LEVEL", "str", "INFO"),
                # tqdm progress bars
                ("DME_PROGRESS", "bool", True),
            )
        )
        #
        if self.DME_THREADS < 1:
            raise ParameterError(f"DME_THREADS must be >= 1, got {self.DME_THREADS}")
        #
        log.debug("Initialized settings %s", vars(self))

    def load_settings(self, settings, schema):
        """ Load and set config vars """
        processors = {
            "str": lambda item: item if isinstance(item, str) else str(item),
            "int": lambda item: item if isinstance(item, int) else int(item),
            "bool": lambda item: item if isinstance(item, bool) else item.lower() in ["true", "yes", "on", "1"],  # pylint: disable=C0301
        }
        #
        for item in schema:
            if len(item) == 3:
                key, kind, default = item
            elif len(item) == 2:
                key, kind = item
                default = ...
            else:
                raise RuntimeError(f"Invalid config schema: {item}")
            #
            data = ...
            for variant in [key, key.lower(), key.upper()]:
                if variant in settings:
                    data = settings[variant]
            #
            if data is ... and default is ...:
                raise ParameterError(f"Required config value is not set: {key}")
            #
            if data is ...:
                data = default
            elif kind in processors:
                try:
                    data = processors[kind](data)
                except ValueError as exc:
                    raise ParameterError(f"Invalid value for {key}: {data!r}") from exc
            #
            setattr(self, key, data)


def load_run_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """ Read a JSON run config, apply overrides, validate """
    data = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as file:
                data = json.load(file)
        except FileNotFoundError as exc:
            raise StorageError(f"Config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ParameterError(f"Config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ParameterError(f"Config file {path} must hold a JSON object")
    #
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        target = data
        *parents, leaf = key.split(".")
        for parent in parents:
            target = target.setdefault(parent, {})
        target[leaf] = value
    #
    try:
        config = RunConfig.parse_obj(data)
    except ValidationError as exc:
        for error in exc.errors():
            log.error("Config validation error: %s", error)
        raise ParameterError(f"Invalid run config: {exc}") from exc
    #
    log.info("Loaded run config (hash %s)", config_hash(config)[:12])
    return config


def config_hash(config: RunConfig) -> str:
    """ SHA-256 of the canonical sorted-key JSON """
    canonical = json.dumps(json.loads(config.json()), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def ensure_dir(path: str, what: str) -> Path:
    """ Create path if needed, StorageError when impossible """
    target = Path(path)
    try:
        target.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"Cannot create {what} directory {path}: {exc}") from exc
    if not os.access(target, os.W_OK):
        raise StorageError(f"{what} directory {path} is not writable")
    return target
