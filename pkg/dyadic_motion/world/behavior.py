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

""" Face parameters and the ground-truth behavior model """

from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np

from ..tools.data_tools.arrays import moving_average
from ..tools.errors import ParameterError
from ..tools.seeding import derive_seed
from .script import ConversationScript, ConversationState

POSE_FIELDS = ("yaw", "pitch", "roll")
EXPRESSION_FIELDS = ("eye_open_l", "eye_open_r", "mouth_open", "mouth_width", "brow_raise")
MOTION_FIELDS = POSE_FIELDS + EXPRESSION_FIELDS

RANGES = {
    "yaw": (-0.5, 0.5),
    "pitch": (-0.5, 0.5),
    "roll": (-0.5, 0.5),
    "eye_open_l": (0.0, 1.0),
    "eye_open_r": (0.0, 1.0),
    "mouth_open": (0.0, 1.0),
    "mouth_width": (0.0, 1.0),
    "brow_raise": (-1.0, 1.0),
    "head_aspect": (0.7, 1.3),
    "eye_spacing": (0.2, 0.4),
    "hue": (0.0, 1.0),
}

JITTER = 0.1
NOD_AMPLITUDE = 0.15
NOD_DELAY = 10
NOD_PROB = 0.5
BLINK_RATE = 0.3


def _check_range(name: str, value: float) -> None:
    low, high = RANGES[name]
    if not low <= value <= high:
        raise ParameterError(f"{name}={value} outside [{low}, {high}]")


@dataclass(frozen=True)
class Identity:
    head_aspect: float
    eye_spacing: float
    hue: float

    def validate(self) -> None:
        for item in fields(self):
            _check_range(item.name, getattr(self, item.name))

    def motion_style(self) -> Tuple[float, float]:
        """ Identity-bound (head motion gain, brow gain) """
        head_gain = 0.6 + 0.8 * (self.eye_spacing - 0.2) / 0.2
        brow_gain = 0.5 + (self.head_aspect - 0.7) / 0.6
        return head_gain, brow_gain


def sample_identity(seed: int) -> Identity:
    rng = np.random.default_rng(seed)
    return Identity(
        head_aspect=float(rng.uniform(0.8, 1.2)),
        eye_spacing=float(rng.uniform(0.22, 0.38)),
        hue=float(rng.uniform(0.0, 1.0)),
    )


@dataclass(frozen=True)
class FaceParams:
    yaw: float
    pitch: float
    roll: float
    eye_open_l: float
    eye_open_r: float
    mouth_open: float
    mouth_width: float
    brow_raise: float
    identity: Identity

    def validate(self) -> None:
        for name in MOTION_FIELDS:
            _check_range(name, getattr(self, name))
        self.identity.validate()


@dataclass(frozen=True, eq=False)
class FaceTrack:
    """ A clip's FaceParams stored column-wise, MOTION_FIELDS order """
    motion: np.ndarray
    identity: Identity

    def __len__(self) -> int:
        return int(self.motion.shape[0])

    def __getitem__(self, index: int) -> FaceParams:
        row = self.motion[index]
        return FaceParams(*(float(value) for value in row), identity=self.identity)

    def column(self, name: str) -> np.ndarray:
        return self.motion[:, MOTION_FIELDS.index(name)]

    def columns(self, names) -> np.ndarray:
        return self.motion[:, [MOTION_FIELDS.index(name) for name in names]]


def _smooth_noise(rng: np.random.Generator, n_frames: int, width: int) -> np.ndarray:
    """ Unit-variance low-pass noise """
    return moving_average(rng.standard_normal(n_frames), width) * np.sqrt(width)


def _damped_nod(length: int) -> np.ndarray:
    k = np.arange(length)
    shape = np.exp(-k / 10.0) * np.sin(2.0 * np.pi * k / 12.0)
    # peak deflection is exactly NOD_AMPLITUDE
    return NOD_AMPLITUDE * shape / np.abs(shape).max()


def behavior_model(script: ConversationScript, seed: int,
                   identity: Optional[Identity] = None) -> FaceTrack:
    """
    Ground-truth facial behavior for a conversation script.

    mouth_open follows the agent's own speech energy (0.8 * energy + jitter),
    listening phases get damped nods after the partner's phrase boundaries,
    and blinks arrive as a Poisson process. Head motion and brow amplitude
    are scaled by the identity's motion style.
    """
    if identity is None:
        identity = sample_identity(derive_seed(seed, 1))
    identity.validate()
    rng = np.random.default_rng(seed)
    n = script.n_frames
    fps = script.fps
    time = np.arange(n) / fps
    energy = np.asarray(script.energy_self, dtype=np.float64)
    head_gain, brow_gain = identity.motion_style()
    #
    jitter = np.clip(moving_average(rng.uniform(-JITTER, JITTER, n), 3), -JITTER, JITTER)
    mouth_open = np.clip(0.8 * energy + jitter, 0.0, 1.0)
    mouth_width = np.clip(0.45 + 0.25 * energy + 0.5 * jitter, 0.0, 1.0)
    #
    talk_phase = rng.uniform(0.0, 2.0 * np.pi)
    yaw = head_gain * (0.10 * _smooth_noise(rng, n, fps) + 0.05 * energy * np.sin(2.0 * np.pi * 0.7 * time + talk_phase))
    pitch = head_gain * (0.04 * _smooth_noise(rng, n, fps) + 0.03 * energy * np.sin(2.0 * np.pi * 2.0 * time))
    roll = head_gain * 0.04 * _smooth_noise(rng, n, fps)
    #
    nods = np.zeros(n)
    nod = _damped_nod(3 * fps)
    for boundary in script.phrase_boundaries_other.tolist():
        fire = rng.random() < NOD_PROB
        delay = int(rng.integers(0, NOD_DELAY + 1))
        if not fire or boundary < 1 or script.state[boundary - 1] != ConversationState.OTHER_SPEAK:
            continue
        start = boundary + delay
        stop = min(n, start + nod.shape[0])
        if start < n:
            nods[start:stop] += nod[:stop - start]
    pitch = pitch + nods
    #
    brow_raise = brow_gain * (0.3 * energy * _smooth_noise(rng, n, fps // 2 or 1) + 2.0 * np.abs(nods))
    #
    eye_open = np.clip(0.85 + 0.05 * _smooth_noise(rng, n, fps), 0.0, 1.0)
    blink_starts = np.flatnonzero(rng.random(n) < BLINK_RATE / fps)
    durations = rng.integers(2, 4, size=blink_starts.shape[0])
    reopened = 0
    for start, duration in zip(blink_starts.tolist(), durations.tolist()):
        # blinks never overlap and never run past the clip end
        if start < reopened or start + duration > n:
            continue
        eye_open[start:start + duration] = 0.0
        reopened = start + duration + 1
    #
    columns = {
        "yaw": yaw, "pitch": pitch, "roll": roll,
        "eye_open_l": eye_open, "eye_open_r": eye_open.copy(),
        "mouth_open": mouth_open, "mouth_width": mouth_width, "brow_raise": brow_raise,
    }
    motion = np.stack([np.clip(columns[name], *RANGES[name]) for name in MOTION_FIELDS], axis=1)
    return FaceTrack(motion=motion, identity=identity)
