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

""" Run configuration models """

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Extra, confloat, conint, root_validator, validator


class InputMode(str, Enum):
    HYBRID = "HYBRID"
    INTACT_IMAGE = "INTACT_IMAGE"
    LANDMARKS_MAP = "LANDMARKS_MAP"


class StrictModel(BaseModel):
    """ Unknown keys are rejected everywhere """

    class Config:
        extra = Extra.forbid
        validate_assignment = True
        anystr_strip_whitespace = True


class WorldConfig(StrictModel):
    n_clips: conint(ge=1) = 64
    n_frames: conint(ge=1) = 250
    fps: conint(ge=2) = 25
    image_size: conint(ge=16) = 64
    audio_dim: conint(ge=2) = 24
    turn_len_mean_s: confloat(gt=0) = 2.0
    overlap_prob: confloat(ge=0, le=0.3) = 0.1
    n_identities: conint(ge=1) = 8
    single_sided_fraction: confloat(ge=0, le=1) = 0.25

    @validator("image_size")
    def image_size_divisible(cls, value):  # pylint: disable=E0213
        assert value % 4 == 0, "image_size must be divisible by 4"
        return value

    @root_validator(skip_on_failure=True)
    def clip_covers_one_second(cls, values):  # pylint: disable=E0213
        assert values["n_frames"] >= values["fps"], "n_frames must be >= fps"
        return values


class MotionConfig(StrictModel):
    motion_dim: conint(ge=1) = 32
    volume_channels: conint(ge=1) = 16
    volume_depth: conint(ge=1) = 4


class TrainConfig(StrictModel):
    epochs: conint(ge=1) = 20
    steps_per_epoch: conint(ge=1) = 50
    batch_size: conint(ge=1) = 16
    lr: confloat(gt=0) = 1e-4
    beta1: confloat(ge=0, lt=1) = 0.9
    beta2: confloat(ge=0, lt=1) = 0.999
    weight_decay: confloat(ge=0) = 1e-2


class Stage1Config(TrainConfig):
    grad_weight: confloat(ge=0) = 0.5


class GuiderConfig(StrictModel):
    bank_size: conint(ge=2) = 16
    bank_dim: conint(ge=1) = 128
    feature_dim: conint(ge=1) = 128
    style_dim: conint(ge=1) = 64


class DiffusionConfig(TrainConfig):
    """ Denoiser, schedule, sampler and stage-2 training keys """
    T: conint(ge=1) = 1000
    beta_min: confloat(gt=0, lt=1) = 1e-4
    beta_max: confloat(gt=0, lt=1) = 0.02
    blocks: int = 4
    heads: conint(ge=1) = 4
    width: conint(ge=2) = 128
    N: conint(ge=1) = 40
    D_m: conint(ge=1) = 32
    prev_frames: conint(ge=1) = 10
    ddim_steps: conint(ge=1) = 20
    cfg_motion: confloat(ge=0) = 2.0
    cfg_prev: confloat(ge=0) = 1.5
    p_null_style: confloat(ge=0, le=1) = 0.3
    p_drop_cond: confloat(ge=0, le=1) = 0.5
    joint_cond_drop: bool = False
    warmup_epochs: conint(ge=0) = 2
    init_t: Optional[conint(ge=0)] = None
    steps_per_epoch: conint(ge=1) = 100

    @validator("blocks")
    def four_blocks(cls, value):  # pylint: disable=E0213
        assert value == 4, "the denoiser has exactly 4 blocks"
        return value

    @root_validator(skip_on_failure=True)
    def check_consistency(cls, values):  # pylint: disable=E0213
        assert values["beta_min"] < values["beta_max"], "beta_min must be < beta_max"
        assert values["width"] % values["heads"] == 0, "width must be divisible by heads"
        assert values["width"] % 2 == 0, "width must be even"
        assert values["prev_frames"] <= values["N"], "prev_frames must be <= N"
        assert values["ddim_steps"] <= values["T"], "ddim_steps must be <= T"
        if values.get("init_t") is not None:
            assert values["init_t"] < values["T"], "init_t must be < T"
        return values

    @property
    def start_t(self) -> int:
        return self.T - 1 if self.init_t is None else self.init_t


class MetricsConfig(StrictModel):
    sid_k: conint(ge=1) = 8
    sync_max_lag: conint(ge=0) = 5
    probe_clips: conint(ge=1) = 16
    probe_alpha: confloat(gt=0) = 1.0
    ssim_window: conint(ge=2) = 8
    ssim_stride: conint(ge=1) = 4


class AblationConfig(StrictModel):
    memory_banks: bool = True
    style_mod: bool = True
    input_mode: InputMode = InputMode.HYBRID

    @validator("memory_banks", "style_mod", pre=True)
    def on_off(cls, value):  # pylint: disable=E0213
        if isinstance(value, str):
            return value.strip().lower() in ("on", "true", "yes", "1")
        return value


class RunConfig(StrictModel):
    seed: conint(ge=0) = 0
    dataset_path: str = "runs/dataset"
    checkpoint_dir: str = "runs/checkpoints"
    output_dir: str = "runs/output"
    world: WorldConfig = WorldConfig()
    motion: MotionConfig = MotionConfig()
    stage1: Stage1Config = Stage1Config()
    guider: GuiderConfig = GuiderConfig()
    diffusion: DiffusionConfig = DiffusionConfig()
    metrics: MetricsConfig = MetricsConfig()
    ablation: AblationConfig = AblationConfig()

    @root_validator(skip_on_failure=True)
    def motion_dims_agree(cls, values):  # pylint: disable=E0213
        motion, diffusion = values["motion"], values["diffusion"]
        assert motion.motion_dim == diffusion.D_m, \
            f"diffusion.D_m ({diffusion.D_m}) must equal motion.motion_dim ({motion.motion_dim})"
        return values
