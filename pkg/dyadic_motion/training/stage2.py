""" Stage 2: guider + denoiser training on frozen stage-1 motion codes """

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..diffusion.normalize import LatentNormalizer
from ..diffusion.schedule import NoiseSchedule, forward_diffuse, make_schedule
from ..models.interactive import InteractiveGenerator
from ..models.motion_space import ImitationModel, encode_clip_motion
from ..models.pd.config import InputMode, RunConfig
from ..models.pd.manifest import LossRecord
from ..tools.errors import DyadicMotionError, ParameterError
from ..tools.seeding import derive_seed, numpy_rng
from ..world.dataset import Clip
from .checkpoints import Checkpoint, load_checkpoint, restore_optimizer, save_checkpoint, state_checksum
from .common import adamw, check_finite, config_payload, progress, resolve_device

log = logging.getLogger(__name__)

STAGE = "stage2"
STAGE_SEED = 2


@dataclass(eq=False)
class ClipLatents:
    """ Normalized motion codes and dyadic audio of one training clip """
    clip_id: str
    identity_id: int
    single_sided: bool
    codes: np.ndarray
    audio_self: np.ndarray
    audio_other: np.ndarray

    @property
    def n_frames(self) -> int:
        return int(self.codes.shape[0])


@dataclass(eq=False)
class WindowBatch:
    x0: np.ndarray
    audio_self: np.ndarray
    audio_other: np.ndarray
    prev_tail: np.ndarray
    style_codes: np.ndarray
    style_keep: np.ndarray
    motion_keep: np.ndarray
    context_keep: np.ndarray
    has_tail: np.ndarray
    clip_index: np.ndarray
    single_sided: np.ndarray

    def tensors(self, device) -> dict:
        return {
            "audio_self": torch.from_numpy(self.audio_self).to(device),
            "audio_other": torch.from_numpy(self.audio_other).to(device),
            "style_codes": torch.from_numpy(self.style_codes).to(device),
            "prev_tail": torch.from_numpy(self.prev_tail).to(device),
            "style_keep": torch.from_numpy(self.style_keep).to(device),
            "motion_keep": torch.from_numpy(self.motion_keep).to(device),
            "context_keep": torch.from_numpy(self.context_keep).to(device),
        }


def condition_masks(rng: np.random.Generator, batch_size: int, p_null_style: float = 0.3,
                    p_drop_cond: float = 0.5, joint: bool = False) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ (style_keep, motion_keep, context_keep) boolean masks for one batch """
    style_keep = rng.random(batch_size) >= p_null_style
    motion_keep = rng.random(batch_size) >= p_drop_cond
    if joint:
        context_keep = motion_keep.copy()
    else:
        context_keep = rng.random(batch_size) >= p_drop_cond
    return style_keep, motion_keep, context_keep


class WindowSampler:
    """
    Random training windows. Style codes come from a different clip of
    the same identity when one exists; the previous tail is the ground
    truth of the frames just before the window.
    """

    def __init__(self, clips: Sequence[ClipLatents], n_frames: int = 40, prev_frames: int = 10,
                 p_null_style: float = 0.3, p_drop_cond: float = 0.5, joint_cond_drop: bool = False):
        if not clips:
            raise ParameterError("stage-2 training needs a non-empty dataset")
        short = [clip.clip_id for clip in clips if clip.n_frames < n_frames + 1]
        if short:
            raise ParameterError(f"clips shorter than one window of {n_frames} frames: {short}")
        self.clips = list(clips)
        self.n_frames = n_frames
        self.prev_frames = prev_frames
        self.p_null_style = p_null_style
        self.p_drop_cond = p_drop_cond
        self.joint_cond_drop = joint_cond_drop
        self.single_sided = [index for index, clip in enumerate(self.clips) if clip.single_sided]
        self.style_sources = []
        for index, clip in enumerate(self.clips):
            others = [
                other for other, item in enumerate(self.clips)
                if item.identity_id == clip.identity_id and other != index
            ]
            self.style_sources.append(others or [index])

    def _window(self, codes: np.ndarray, start: int) -> np.ndarray:
        return codes[start:start + self.n_frames]

    def sample(self, rng: np.random.Generator, batch_size: int, warmup: bool = False) -> WindowBatch:
        pool = self.single_sided if warmup else list(range(len(self.clips)))
        if not pool:
            raise ParameterError("warm-up needs single-sided clips in the dataset")
        clip_index = np.asarray(pool)[rng.integers(0, len(pool), size=batch_size)]
        x0, audio_self, audio_other, prev_tail, style_codes, has_tail = [], [], [], [], [], []
        for index in clip_index.tolist():
            clip = self.clips[index]
            start = int(rng.integers(0, clip.n_frames - self.n_frames + 1))
            x0.append(self._window(clip.codes, start))
            audio_self.append(self._window(clip.audio_self, start))
            audio_other.append(self._window(clip.audio_other, start))
            tail = np.zeros((self.prev_frames, clip.codes.shape[1]), dtype=np.float32)
            if start >= self.prev_frames:
                tail = clip.codes[start - self.prev_frames:start]
            prev_tail.append(tail)
            has_tail.append(start >= self.prev_frames)
            #
            sources = self.style_sources[index]
            source = self.clips[sources[int(rng.integers(0, len(sources)))]]
            style_start = int(rng.integers(0, source.n_frames - self.n_frames + 1))
            style_codes.append(self._window(source.codes, style_start))
        #
        style_keep, motion_keep, context_keep = condition_masks(
            rng, batch_size, self.p_null_style, self.p_drop_cond, self.joint_cond_drop,
        )
        return WindowBatch(
            x0=np.stack(x0).astype(np.float32),
            audio_self=np.stack(audio_self).astype(np.float32),
            audio_other=np.stack(audio_other).astype(np.float32),
            prev_tail=np.stack(prev_tail).astype(np.float32),
            style_codes=np.stack(style_codes).astype(np.float32),
            style_keep=style_keep,
            motion_keep=motion_keep,
            context_keep=context_keep & np.asarray(has_tail),
            has_tail=np.asarray(has_tail),
            clip_index=clip_index,
            single_sided=np.asarray([self.clips[index].single_sided for index in clip_index.tolist()]),
        )


@dataclass
class Stage2Result:
    model: InteractiveGenerator
    normalizer: LatentNormalizer
    schedule: NoiseSchedule
    loss_trace: List[LossRecord]
    checksum: Optional[str] = None
    frozen_checksum: Optional[str] = None


def clip_latents(clips: Sequence[Clip], imitation: ImitationModel,
                 mode: InputMode = InputMode.HYBRID) -> List[np.ndarray]:
    """ Raw motion codes of every clip from the frozen stage-1 encoder """
    imitation.eval()
    return [
        encode_clip_motion(imitation.motion_encoder, clip.pixels, clip.landmarks, mode)
        for clip in progress(clips, desc="encoding clips")
    ]


def build_latent_dataset(clips: Sequence[Clip], codes: Sequence[np.ndarray],
                         normalizer: LatentNormalizer) -> List[ClipLatents]:
    result = []
    for clip, clip_codes in zip(clips, codes):
        normalized = normalizer.normalize(torch.from_numpy(clip_codes)).numpy().astype(np.float32)
        result.append(ClipLatents(
            clip_id=clip.clip_id,
            identity_id=clip.identity_id,
            single_sided=clip.script.single_sided,
            codes=normalized,
            audio_self=clip.audio.self_track.astype(np.float32),
            audio_other=clip.audio.other_track.astype(np.float32),
        ))
    return result


def build_generator(config: RunConfig) -> Tuple[InteractiveGenerator, int]:
    init_seed = derive_seed(config.seed, STAGE_SEED)
    torch.manual_seed(init_seed)
    return InteractiveGenerator.from_config(config), init_seed


def normalizer_from(checkpoint: Checkpoint) -> LatentNormalizer:
    return LatentNormalizer(mean=checkpoint.buffers["latent_mean"], std=checkpoint.buffers["latent_std"])


def generator_from(checkpoint: Checkpoint, config: RunConfig) -> InteractiveGenerator:
    model, _ = build_generator(config)
    model.load_state_dict(checkpoint.weights)
    model.eval()
    return model


def diffusion_step(model: InteractiveGenerator, batch: WindowBatch, schedule: NoiseSchedule,
                   rng: np.random.Generator, device) -> Tuple[torch.Tensor, dict]:
    """ MSE between true and predicted noise at uniformly drawn timesteps """
    x0 = torch.from_numpy(batch.x0).to(device)
    t = torch.from_numpy(rng.integers(0, schedule.T, size=x0.shape[0])).to(device)
    noise = torch.from_numpy(rng.standard_normal(x0.shape).astype(np.float32)).to(device)
    x_t = forward_diffuse(x0, t, noise, schedule)
    eps = model(x_t, t, **batch.tensors(device))
    loss = (eps - noise).pow(2).mean()
    return loss, {"mse": float(loss.detach()), "noise_power": float(noise.pow(2).mean())}


@torch.no_grad()
def held_out_loss(model: InteractiveGenerator, sampler: WindowSampler, schedule: NoiseSchedule,
                  seed: int, batches: int = 8, batch_size: int = 16) -> Tuple[float, float]:
    """
    (model MSE, zero-predictor MSE) with every condition present. Windows
    at the start of a clip have no previous tail and keep it dropped.
    """
    model.eval()
    device = next(model.parameters()).device
    rng = numpy_rng(seed, STAGE_SEED, 10 ** 6)
    model_loss, baseline = 0.0, 0.0
    for _ in range(batches):
        batch = sampler.sample(rng, batch_size)
        batch.style_keep[:] = True
        batch.motion_keep[:] = True
        batch.context_keep[:] = batch.has_tail
        loss, components = diffusion_step(model, batch, schedule, rng, device)
        model_loss += float(loss)
        baseline += components["noise_power"]
    return model_loss / batches, baseline / batches


def train_stage2(clips: Sequence[Clip], imitation: ImitationModel, config: RunConfig,
                 checkpoint_path=None, resume: bool = False,
                 stage1_checksum: Optional[str] = None) -> Stage2Result:
    """
    Noise-prediction training of guider and denoiser. The stage-1 model
    is only read: its codes become the (standardized) diffusion targets.
    The first warmup_epochs epochs sample single-sided clips only.
    """
    train = config.diffusion
    device = resolve_device()
    frozen_before = state_checksum(imitation)
    codes = clip_latents(clips, imitation, config.ablation.input_mode)
    normalizer = LatentNormalizer.fit(np.concatenate(codes))
    sampler = WindowSampler(
        build_latent_dataset(clips, codes, normalizer), train.N, train.prev_frames,
        train.p_null_style, train.p_drop_cond, train.joint_cond_drop,
    )
    schedule = make_schedule(train.T, train.beta_min, train.beta_max)
    #
    model, init_seed = build_generator(config)
    model.to(device)
    optimizer = adamw(model.parameters(), train)
    loss_trace: List[LossRecord] = []
    start_epoch = 0
    manifest = None
    if resume and checkpoint_path is not None and (Path(checkpoint_path) / "manifest.json").is_file():
        checkpoint = load_checkpoint(checkpoint_path, kind=STAGE)
        model.load_state_dict(checkpoint.weights)
        restore_optimizer(optimizer, model, checkpoint)
        loss_trace = checkpoint.loss_trace
        start_epoch = checkpoint.epoch + 1
        manifest = checkpoint.manifest
        log.info("Resuming stage 2 after epoch %s", checkpoint.epoch)
    #
    frozen_checksum = stage1_checksum or frozen_before
    step = start_epoch * train.steps_per_epoch
    for epoch in range(start_epoch, train.epochs):
        model.train()
        warmup = epoch < train.warmup_epochs
        rng = numpy_rng(config.seed, STAGE_SEED, epoch)
        total = 0.0
        for _ in progress(range(train.steps_per_epoch), desc=f"stage2 epoch {epoch}"):
            batch = sampler.sample(rng, train.batch_size, warmup=warmup)
            loss, components = diffusion_step(model, batch, schedule, rng, device)
            check_finite(loss, components, step, STAGE)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            step += 1
        loss_trace.append(LossRecord(epoch=epoch, loss=total / train.steps_per_epoch, components={}))
        log.info("Stage 2 epoch %s%s: loss %.5f", epoch, " (warm-up)" if warmup else "", loss_trace[-1].loss)
        if checkpoint_path is not None:
            manifest = save_checkpoint(
                checkpoint_path, STAGE, model, init_seed, epoch, loss_trace, config_payload(config),
                optimizer=optimizer,
                buffers={"latent_mean": normalizer.mean, "latent_std": normalizer.std},
                frozen_checksum=frozen_checksum,
            )
    #
    if state_checksum(imitation) != frozen_before:
        raise DyadicMotionError("stage-1 weights changed during stage-2 training")
    model.eval()
    return Stage2Result(
        model=model, normalizer=normalizer, schedule=schedule, loss_trace=loss_trace,
        checksum=manifest.checksum if manifest else None, frozen_checksum=frozen_checksum,
    )
