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

""" Synthetic dyadic conversation clips and their on-disk container """

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..models.pd.config import WorldConfig
from ..models.pd.manifest import CONTAINER_VERSION, ClipEntry, DatasetManifest, IdentityRecord
from ..tools.config import Settings
from ..tools.errors import FormatError, ParameterError
from ..tools.seeding import derive_seed, numpy_rng
from ..tools.storage_engines import ContainerEngine
from .audio import DyadicAudioFeatures, synth_audio_features
from .behavior import MOTION_FIELDS, FaceTrack, Identity, behavior_model, sample_identity
from .render import CONTOUR_INDEX_SET, N_LANDMARKS, render_track
from .script import ConversationScript, ConversationState, gen_script

log = logging.getLogger(__name__)

ARRAY_FIELDS = (
    "state", "energy_self", "energy_other", "audio_self", "audio_other",
    "motion", "pixels", "landmarks",
)


@dataclass(eq=False)
class Clip:
    clip_id: str
    identity_id: int
    seed: int
    script: ConversationScript
    audio: DyadicAudioFeatures
    track: FaceTrack
    pixels: np.ndarray
    landmarks: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.script.n_frames

    @property
    def identity(self) -> Identity:
        return self.track.identity


def generate_clip(clip_id: str, seed: int, identity_id: int, identity: Identity,
                  config: WorldConfig, fixed_state: Optional[ConversationState] = None) -> Clip:
    """ gen_script -> synth_audio_features -> behavior_model -> render_face """
    script = gen_script(
        config.n_frames, derive_seed(seed, 0),
        turn_len_mean_s=config.turn_len_mean_s, overlap_prob=config.overlap_prob,
        fps=config.fps, fixed_state=fixed_state,
    )
    audio = synth_audio_features(script, derive_seed(seed, 1), config.audio_dim)
    track = behavior_model(script, derive_seed(seed, 2), identity=identity)
    pixels, landmarks = render_track(track, config.image_size)
    # the clip holds exactly what the container stores
    script = replace(
        script,
        energy_self=script.energy_self.astype(np.float32),
        energy_other=script.energy_other.astype(np.float32),
    )
    return Clip(
        clip_id=clip_id, identity_id=identity_id, seed=seed, script=script,
        audio=DyadicAudioFeatures(audio.self_track.astype(np.float32), audio.other_track.astype(np.float32)),
        track=FaceTrack(motion=track.motion.astype(np.float32), identity=track.identity),
        pixels=pixels, landmarks=landmarks.astype(np.float32),
    )


def dataset_identities(config: WorldConfig, seed: int) -> List[Identity]:
    return [sample_identity(derive_seed(seed, 1000, index)) for index in range(config.n_identities)]


def generate_dataset(config: WorldConfig, seed: int, workers: Optional[int] = None) -> List[Clip]:
    """ All clips of a dataset, clip i seeded with derive_seed(seed, i) """
    identities = dataset_identities(config, seed)
    n_single = int(round(config.n_clips * config.single_sided_fraction))
    single = set(numpy_rng(seed, 2000).permutation(config.n_clips)[:n_single].tolist())
    #
    jobs = []
    for index in range(config.n_clips):
        fixed_state = None
        if index in single:
            fixed_state = ConversationState.SELF_SPEAK if index % 2 == 0 else ConversationState.OTHER_SPEAK
        identity_id = index % config.n_identities
        jobs.append((f"clip{index:04d}", derive_seed(seed, index), identity_id, identities[identity_id], fixed_state))
    #
    workers = workers or Settings().DME_THREADS
    log.info("Generating %s clips with %s workers", len(jobs), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        clips = list(pool.map(lambda job: generate_clip(*job[:4], config, fixed_state=job[4]), jobs))
    return clips


def _clip_arrays(clip: Clip) -> Dict[str, np.ndarray]:
    return {
        "state": clip.script.state.astype(np.uint8),
        "energy_self": clip.script.energy_self,
        "energy_other": clip.script.energy_other,
        "audio_self": clip.audio.self_track,
        "audio_other": clip.audio.other_track,
        "motion": clip.track.motion,
        "pixels": clip.pixels,
        "landmarks": clip.landmarks,
    }


def write_dataset(clips: Sequence[Clip], path, seed: int = 0, generator: Optional[dict] = None) -> DatasetManifest:
    """ Write clips as a container; arrays are stored as float32 (state as uint8) """
    if not clips:
        raise ParameterError("write_dataset needs at least one clip")
    first = clips[0]
    engine = ContainerEngine(path)
    entries = []
    with engine.writer():
        files = []
        for clip in clips:
            arrays = {}
            for field, array in _clip_arrays(clip).items():
                dtype = "uint8" if field == "state" else "float32"
                arrays[field] = engine.write_array(clip.clip_id, field, array, dtype=dtype)
                files.append(arrays[field]["file"])
            identity = clip.identity
            entries.append(ClipEntry(
                clip_id=clip.clip_id,
                identity_id=clip.identity_id,
                seed=clip.seed,
                n_frames=clip.n_frames,
                single_sided=clip.script.single_sided,
                identity=IdentityRecord(
                    head_aspect=identity.head_aspect, eye_spacing=identity.eye_spacing, hue=identity.hue,
                ),
                phrase_boundaries_other=clip.script.phrase_boundaries_other.tolist(),
                arrays=arrays,
            ))
        manifest = DatasetManifest(
            version=CONTAINER_VERSION,
            fps=first.script.fps,
            n_clips=len(clips),
            image_size=int(first.pixels.shape[1]),
            audio_dim=first.audio.dim,
            n_landmarks=N_LANDMARKS,
            contour_index_set=list(CONTOUR_INDEX_SET),
            state_enum={state.name: int(state) for state in ConversationState},
            seed=seed,
            generator=generator or {},
            clips=entries,
            checksum=engine.checksum(files),
        )
        engine.remove_stale(files)
        engine.save_manifest(manifest)
    log.info("Wrote %s clips (%s frames) to %s", len(clips), sum(c.n_frames for c in clips), path)
    return manifest


def _expected_shapes(manifest: DatasetManifest, n_frames: int) -> Dict[str, tuple]:
    size = manifest.image_size
    return {
        "state": (n_frames, ),
        "energy_self": (n_frames, ),
        "energy_other": (n_frames, ),
        "audio_self": (n_frames, manifest.audio_dim),
        "audio_other": (n_frames, manifest.audio_dim),
        "motion": (n_frames, len(MOTION_FIELDS)),
        "pixels": (n_frames, size, size, 3),
        "landmarks": (n_frames, manifest.n_landmarks, 2),
    }


def read_manifest(path) -> DatasetManifest:
    manifest = ContainerEngine(path).load_manifest(DatasetManifest)
    if manifest.n_clips != len(manifest.clips):
        raise FormatError("n_clips", f"manifest declares {manifest.n_clips}, lists {len(manifest.clips)}")
    return manifest


def read_clip(engine: ContainerEngine, manifest: DatasetManifest, entry: ClipEntry) -> Clip:
    expected = _expected_shapes(manifest, entry.n_frames)
    missing = set(ARRAY_FIELDS) - set(entry.arrays)
    if missing:
        raise FormatError("arrays", f"{entry.clip_id} lacks {sorted(missing)}")
    arrays = {}
    for field in ARRAY_FIELDS:
        spec = entry.arrays[field]
        if spec.shape and spec.shape[0] != entry.n_frames:
            raise FormatError(
                "n_frames", f"{entry.clip_id} declares {entry.n_frames} frames, {field} has {spec.shape[0]}"
            )
        arrays[field] = engine.read_array(spec, leading_field="n_frames")
        if arrays[field].shape[1:] != expected[field][1:]:
            name = {"audio_self": "audio_dim", "audio_other": "audio_dim", "pixels": "image_size",
                    "landmarks": "n_landmarks"}.get(field, field)
            raise FormatError(name, f"{entry.clip_id}.{field} shape {arrays[field].shape}, expected {expected[field]}")
    #
    script = ConversationScript(
        fps=manifest.fps,
        state=arrays["state"],
        energy_self=arrays["energy_self"],
        energy_other=arrays["energy_other"],
        phrase_boundaries_other=np.asarray(entry.phrase_boundaries_other, dtype=np.int64),
    )
    identity = Identity(**entry.identity.dict())
    return Clip(
        clip_id=entry.clip_id,
        identity_id=entry.identity_id,
        seed=entry.seed,
        script=script,
        audio=DyadicAudioFeatures(arrays["audio_self"], arrays["audio_other"]),
        track=FaceTrack(motion=arrays["motion"], identity=identity),
        pixels=arrays["pixels"],
        landmarks=arrays["landmarks"],
    )


def read_dataset(path, verify_checksum: bool = True) -> List[Clip]:
    engine = ContainerEngine(path)
    manifest = read_manifest(path)
    clips = [read_clip(engine, manifest, entry) for entry in manifest.clips]
    if verify_checksum and manifest.checksum:
        files = [spec.file for entry in manifest.clips for spec in (entry.arrays[f] for f in ARRAY_FIELDS)]
        if engine.checksum(files) != manifest.checksum:
            raise FormatError("checksum", "array contents do not match the manifest checksum")
    return clips
