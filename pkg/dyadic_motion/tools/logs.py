""" Logging setup for command-line runs """

import logging
import sys

from .config import Settings

_FORMAT = "%(asctime)s - %(levelname)8s - %(name)s - %(message)s"


def setup_logging(level=None) -> None:
    """ Configure the root handler once """
    if level is None:
        level = Settings().DME_LOG_LEVEL
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    logging.basicConfig(level=level, format=_FORMAT, stream=sys.stderr, force=True)
    # matplotlib/PIL chatter through imageio
    logging.getLogger("PIL").setLevel(logging.INFO)


def progress_enabled() -> bool:
    return bool(Settings().DME_PROGRESS) and sys.stderr.isatty()
