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

""" Conversation scripts: who speaks when, and how loud """

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Tuple

import numpy as np

from ..tools.data_tools.arrays import moving_average, run_lengths, strictly_increasing
from ..tools.errors import ParameterError

DEFAULT_FPS = 25
SPEAKING_FLOOR = 0.3
SILENCE_CEILING = 0.05
MAX_OVERLAP_PROB = 0.3
PAUSE_PROB = 0.25


class ConversationState(IntEnum):
    SELF_SPEAK = 0
    OTHER_SPEAK = 1
    BOTH = 2
    NEITHER = 3


SELF_ACTIVE = (ConversationState.SELF_SPEAK, ConversationState.BOTH)
OTHER_ACTIVE = (ConversationState.OTHER_SPEAK, ConversationState.BOTH)


def min_run_length(fps: int) -> int:
    return math.ceil(fps / 2)


@dataclass(frozen=True, eq=False)
class ConversationScript:
    fps: int
    state: np.ndarray
    energy_self: np.ndarray
    energy_other: np.ndarray
    phrase_boundaries_other: np.ndarray

    @property
    def n_frames(self) -> int:
        return int(self.state.shape[0])

    @property
    def single_sided(self) -> bool:
        return bool(np.all(self.state == self.state[0]))

    def self_active(self) -> np.ndarray:
        return np.isin(self.state, SELF_ACTIVE)

    def other_active(self) -> np.ndarray:
        return np.isin(self.state, OTHER_ACTIVE)

    def validate(self) -> None:
        """ Raise ParameterError when an invariant does not hold """
        n = self.n_frames
        for name in ("energy_self", "energy_other"):
            if getattr(self, name).shape != (n, ):
                raise ParameterError(f"{name} must have {n} frames")
        for name, active in (("energy_self", self.self_active()), ("energy_other", self.other_active())):
            energy = getattr(self, name)
            if np.any(energy < 0) or np.any(energy > 1):
                raise ParameterError(f"{name} outside [0, 1]")
            if np.any(energy[active] < SPEAKING_FLOOR):
                raise ParameterError(f"{name} below {SPEAKING_FLOOR} while speaking")
            if np.any(energy[~active] > SILENCE_CEILING):
                raise ParameterError(f"{name} above {SILENCE_CEILING} while silent")
        if min(run_lengths(self.state)) < min_run_length(self.fps):
            raise ParameterError(f"state run shorter than {min_run_length(self.fps)} frames")
        if not strictly_increasing(self.phrase_boundaries_other.tolist()):
            raise ParameterError("phrase_boundaries_other must be sorted and unique")


def _segments(n_frames: int, rng: np.random.Generator, fps: int,
              turn_len_mean_s: float, overlap_prob: float) -> List[Tuple[int, int]]:
    min_run = min_run_length(fps)
    mean_frames = turn_len_mean_s * fps
    speaker = ConversationState.SELF_SPEAK if rng.random() < 0.5 else ConversationState.OTHER_SPEAK
    segments = []
    total = 0
    while total < n_frames:
        length = max(min_run, int(round(rng.gamma(4.0, mean_frames / 4.0))))
        segments.append((speaker, length))
        total += length
        if rng.random() < overlap_prob:
            gap = (ConversationState.BOTH, min_run + int(rng.integers(0, min_run)))
        elif rng.random() < PAUSE_PROB:
            gap = (ConversationState.NEITHER, min_run + int(rng.integers(0, min_run)))
        else:
            gap = None
        if gap is not None:
            segments.append(gap)
            total += gap[1]
        speaker = ConversationState.OTHER_SPEAK \
            if speaker == ConversationState.SELF_SPEAK else ConversationState.SELF_SPEAK
    #
    result = []
    remaining = n_frames
    for state, length in segments:
        if remaining <= 0:
            break
        result.append((state, min(length, remaining)))
        remaining -= length
    # a clipped tail shorter than half a second joins the previous run
    if len(result) > 1 and result[-1][1] < min_run:
        state, length = result.pop()
        previous_state, previous_length = result.pop()
        result.append((previous_state, previous_length + length))
    return result


def _phrases(active: np.ndarray, rng: np.random.Generator, fps: int) -> List[Tuple[int, int]]:
    """ Split every active run into phrases of 1-2 s, as (start, end) pairs """
    phrases = []
    min_run = min_run_length(fps)
    index = 0
    for length in run_lengths(active):
        if active[index]:
            start, end = index, index + length
            cursor = start
            while cursor < end:
                size = int(rng.integers(fps, 2 * fps + 1))
                stop = min(end, cursor + size)
                if end - stop < min_run:
                    stop = end
                phrases.append((cursor, stop))
                cursor = stop
        index += length
    return phrases


def _speech_energy(n_frames: int, active: np.ndarray, rng: np.random.Generator,
                   fps: int) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    silence = SILENCE_CEILING * np.clip(moving_average(rng.random(n_frames), 3), 0.0, 1.0)
    energy = silence
    phrases = _phrases(active, rng, fps)
    for start, end in phrases:
        length = end - start
        progress = (np.arange(length) + 0.5) / length
        envelope = np.sqrt(np.sin(np.pi * progress))
        syllable_rate = rng.uniform(3.0, 5.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        syllables = 0.65 + 0.35 * np.sin(2.0 * np.pi * syllable_rate * np.arange(length) / fps + phase)
        energy[start:end] = SPEAKING_FLOOR + (1.0 - SPEAKING_FLOOR) * envelope * syllables
    return energy, phrases


def gen_script(n_frames: int, seed: int, turn_len_mean_s: float = 2.0, overlap_prob: float = 0.1,
               fps: int = DEFAULT_FPS, fixed_state: Optional[ConversationState] = None) -> ConversationScript:
    """
    Seeded dyadic conversation script.

    Turns alternate between the agent and the partner with gamma-distributed
    lengths around turn_len_mean_s; a turn change is an overlap (BOTH) with
    probability overlap_prob, otherwise sometimes a pause (NEITHER). Every run
    lasts at least half a second. fixed_state gives a single-sided script.
    """
    if fps < 2:
        raise ParameterError(f"fps must be >= 2, got {fps}")
    if n_frames < fps:
        raise ParameterError(f"n_frames must be >= fps ({fps}), got {n_frames}")
    if not 0.0 <= overlap_prob <= MAX_OVERLAP_PROB:
        raise ParameterError(f"overlap_prob must be in [0, {MAX_OVERLAP_PROB}], got {overlap_prob}")
    if turn_len_mean_s <= 0:
        raise ParameterError(f"turn_len_mean_s must be > 0, got {turn_len_mean_s}")
    if fixed_state is not None:
        try:
            fixed_state = ConversationState(fixed_state)
        except ValueError as exc:
            raise ParameterError(f"unknown fixed_state {fixed_state}") from exc
    #
    rng = np.random.default_rng(seed)
    if fixed_state is None:
        segments = _segments(n_frames, rng, fps, turn_len_mean_s, overlap_prob)
    else:
        segments = [(fixed_state, n_frames)]
    state = np.concatenate([np.full(length, int(item), dtype=np.uint8) for item, length in segments])
    #
    self_active = np.isin(state, SELF_ACTIVE)
    other_active = np.isin(state, OTHER_ACTIVE)
    energy_self, _ = _speech_energy(n_frames, self_active, rng, fps)
    energy_other, other_phrases = _speech_energy(n_frames, other_active, rng, fps)
    boundaries = sorted({end for _, end in other_phrases if end < n_frames})
    #
    return ConversationScript(
        fps=fps,
        state=state,
        energy_self=energy_self,
        energy_other=energy_other,
        phrase_boundaries_other=np.asarray(boundaries, dtype=np.int64),
    )
