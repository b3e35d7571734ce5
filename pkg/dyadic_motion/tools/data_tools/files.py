import logging
import os
from pathlib import Path
from typing import List

import imageio.v2 as imageio
import numpy as np
from skimage import img_as_ubyte

from ..errors import StorageError, wrap_exceptions

log = logging.getLogger(__name__)


@wrap_exceptions(StorageError)
def write_frames(frames: np.ndarray, directory, prefix: str = "") -> List[str]:
    """ Numbered lossless PNG files, returns the file names """
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    names = []
    for index, frame in enumerate(frames):
        name = f"{prefix}{index:06d}.png"
        imageio.imwrite(directory / name, img_as_ubyte(np.clip(frame, 0.0, 1.0)))
        names.append(name)
    log.info("Wrote %s frames to %s", len(names), directory)
    return names


@wrap_exceptions(StorageError)
def read_frames(directory, names: List[str]) -> np.ndarray:
    directory = Path(directory)
    frames = [imageio.imread(directory / name) for name in names]
    if not frames:
        return np.zeros((0, 0, 0, 3), dtype=np.float32)
    return np.stack(frames).astype(np.float32) / 255.0


def quantize(frames: np.ndarray) -> np.ndarray:
    """ The values frames take after a PNG round trip """
    return img_as_ubyte(np.clip(frames, 0.0, 1.0)).astype(np.float32) / 255.0
