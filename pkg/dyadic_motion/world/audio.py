""" Per-frame dyadic audio features """

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..tools.errors import ParameterError
from .script import ConversationScript

DEFAULT_AUDIO_DIM = 24
# oscillation band in Hz, kept below the 25 fps Nyquist limit
BAND = (0.5, 8.0)


@dataclass(frozen=True, eq=False)
class DyadicAudioFeatures:
    self_track: np.ndarray
    other_track: np.ndarray

    @property
    def n_frames(self) -> int:
        return int(self.self_track.shape[0])

    @property
    def dim(self) -> int:
        return int(self.self_track.shape[1])

    def window(self, start: int, stop: int) -> "DyadicAudioFeatures":
        return DyadicAudioFeatures(self.self_track[start:stop], self.other_track[start:stop])

    def silenced(self, track: str) -> "DyadicAudioFeatures":
        """ Copy with one track zeroed, for talking/listening-only driving """
        if track == "self":
            return DyadicAudioFeatures(np.zeros_like(self.self_track), self.other_track)
        if track == "other":
            return DyadicAudioFeatures(self.self_track, np.zeros_like(self.other_track))
        raise ParameterError(f"unknown track {track!r}")


class AudioFeatureExtractor(ABC):
    """ Front end turning a conversation into per-frame feature tracks """

    @abstractmethod
    def extract(self, script: ConversationScript, seed: int, dim: int) -> DyadicAudioFeatures:
        raise NotImplementedError


class SyntheticFeatureExtractor(AudioFeatureExtractor):
    """
    Component 0 is the track energy itself; the other components are seeded
    band-limited sinusoids amplitude-modulated by that energy.
    """

    @staticmethod
    def _track(energy: np.ndarray, fps: int, dim: int, rng: np.random.Generator) -> np.ndarray:
        n_frames = energy.shape[0]
        freqs = rng.uniform(*BAND, size=dim - 1)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=dim - 1)
        time = np.arange(n_frames)[:, None] / fps
        features = np.empty((n_frames, dim), dtype=np.float64)
        features[:, 0] = energy
        features[:, 1:] = energy[:, None] * np.sin(2.0 * np.pi * freqs[None, :] * time + phases[None, :])
        return features

    def extract(self, script: ConversationScript, seed: int, dim: int = DEFAULT_AUDIO_DIM) -> DyadicAudioFeatures:
        if dim < 2:
            raise ParameterError(f"audio feature dim must be >= 2, got {dim}")
        rng = np.random.default_rng(seed)
        self_track = self._track(np.asarray(script.energy_self, dtype=np.float64), script.fps, dim, rng)
        other_track = self._track(np.asarray(script.energy_other, dtype=np.float64), script.fps, dim, rng)
        return DyadicAudioFeatures(self_track=self_track, other_track=other_track)


def synth_audio_features(script: ConversationScript, seed: int,
                         dim: int = DEFAULT_AUDIO_DIM) -> DyadicAudioFeatures:
    return SyntheticFeatureExtractor().extract(script, seed, dim)
