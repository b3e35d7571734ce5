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

""" Container manifests """

from typing import Dict, List, Literal, Optional

from pydantic import conint, validator

from .config import StrictModel

CONTAINER_VERSION = 1
SUPPORTED_VERSIONS = (1, )


class ArraySpec(StrictModel):
    file: str
    shape: List[conint(ge=0)]
    dtype: Literal["float32", "uint8"]


class VersionedManifest(StrictModel):
    version: int

    @validator("version")
    def supported_version(cls, value):  # pylint: disable=E0213
        assert value in SUPPORTED_VERSIONS, \
            f"unsupported version {value}, supported: {list(SUPPORTED_VERSIONS)}"
        return value


class IdentityRecord(StrictModel):
    head_aspect: float
    eye_spacing: float
    hue: float


class ClipEntry(StrictModel):
    clip_id: str
    identity_id: conint(ge=0)
    seed: conint(ge=0)
    n_frames: conint(ge=1)
    single_sided: bool
    identity: IdentityRecord
    phrase_boundaries_other: List[conint(ge=0)]
    arrays: Dict[str, ArraySpec]


class DatasetManifest(VersionedManifest):
    kind: Literal["dataset"] = "dataset"
    fps: conint(ge=1)
    n_clips: conint(ge=1)
    image_size: conint(ge=1)
    audio_dim: conint(ge=2)
    n_landmarks: conint(ge=1)
    contour_index_set: List[conint(ge=0)]
    state_enum: Dict[str, int]
    seed: conint(ge=0)
    generator: dict
    clips: List[ClipEntry]
    checksum: str = ""


class LossRecord(StrictModel):
    epoch: conint(ge=0)
    loss: float
    components: Dict[str, float] = {}


class LayerRecord(StrictModel):
    name: str
    array: ArraySpec


class OptimizerRecord(StrictModel):
    hyper: Dict[str, float]
    steps: Dict[str, int]
    slots: List[LayerRecord]


class CheckpointManifest(VersionedManifest):
    kind: Literal["stage1", "stage2"]
    init_seed: conint(ge=0)
    epoch: conint(ge=0)
    layers: List[LayerRecord]
    buffers: List[LayerRecord] = []
    optimizer: Optional[OptimizerRecord] = None
    loss_trace: List[LossRecord] = []
    config: dict
    frozen_checksum: Optional[str] = None
    checksum: str = ""

    @validator("loss_trace")
    def monotone_epochs(cls, value):  # pylint: disable=E0213
        epochs = [record.epoch for record in value]
        assert all(x < y for x, y in zip(epochs, epochs[1:])), "loss trace epochs must increase"
        return value


class RunManifest(VersionedManifest):
    kind: Literal["run"] = "run"
    mode: Literal["interactive", "talking", "listening", "ground_truth"]
    portrait_clip_id: str
    audio_clip_id: str
    ground_truth_clip_id: Optional[str] = None
    seed: conint(ge=0)
    fps: conint(ge=1)
    n_frames: conint(ge=0)
    frame_files: List[str]
    latents: ArraySpec
    throughput_fps: float
    config_hash: str
    stage1_checksum: Optional[str] = None
    stage2_checksum: Optional[str] = None
    checksum: str = ""
