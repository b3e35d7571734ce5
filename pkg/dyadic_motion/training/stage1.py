""" Stage 1: self-driven reconstruction training of the imitation model """

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..models.motion_space import ImitationModel, build_hybrid_rep, stage1_loss
from ..models.pd.config import InputMode, RunConfig
from ..models.pd.manifest import LossRecord
from ..tools.errors import ParameterError
from ..tools.seeding import derive_seed, numpy_rng
from ..world.dataset import Clip
from ..world.render import RenderedFrame
from .checkpoints import Checkpoint, load_checkpoint, restore_optimizer, save_checkpoint
from .common import adamw, check_finite, config_payload, progress, resolve_device

log = logging.getLogger(__name__)

STAGE = "stage1"
STAGE_SEED = 1


@dataclass
class Stage1Result:
    model: ImitationModel
    loss_trace: List[LossRecord]
    checksum: Optional[str] = None


def build_imitation_model(config: RunConfig) -> Tuple[ImitationModel, int]:
    """ Freshly initialized model and its initializer seed """
    init_seed = derive_seed(config.seed, STAGE_SEED)
    torch.manual_seed(init_seed)
    model = ImitationModel(
        motion_dim=config.motion.motion_dim,
        image_size=config.world.image_size,
        channels=config.motion.volume_channels,
        depth=config.motion.volume_depth,
    )
    return model, init_seed


def imitation_model_from(checkpoint: Checkpoint, config: RunConfig) -> ImitationModel:
    model, _ = build_imitation_model(config)
    model.load_state_dict(checkpoint.weights)
    model.eval()
    return model


def frame_batch(clips: Sequence[Clip], clip_index: np.ndarray, frame_index: np.ndarray,
                mode: InputMode) -> Tuple[np.ndarray, np.ndarray]:
    """ (B, 3, H, W) pixels and (B, 4, H, W) hybrid reps """
    pixels = []
    reps = []
    for clip_id, frame_id in zip(clip_index.tolist(), frame_index.tolist()):
        clip = clips[clip_id]
        frame = RenderedFrame(pixels=clip.pixels[frame_id], landmarks=clip.landmarks[frame_id])
        pixels.append(frame.pixels.transpose(2, 0, 1))
        reps.append(build_hybrid_rep(frame, mode).stack().transpose(2, 0, 1))
    return np.ascontiguousarray(np.stack(pixels)), np.ascontiguousarray(np.stack(reps))


def sample_pairs(clips: Sequence[Clip], rng: np.random.Generator, batch_size: int):
    """ Source and driving frames drawn from the same clip """
    clip_index = rng.integers(0, len(clips), size=batch_size)
    lengths = np.array([clips[index].n_frames for index in clip_index.tolist()])
    source = (rng.random(batch_size) * lengths).astype(int)
    driving = (rng.random(batch_size) * lengths).astype(int)
    return clip_index, source, driving


def _check_dataset(clips: Sequence[Clip]) -> None:
    if not clips:
        raise ParameterError("stage-1 training needs a non-empty dataset")
    if len({clip.identity_id for clip in clips}) < 2:
        raise ParameterError("stage-1 training needs at least 2 identities")


def train_stage1(clips: Sequence[Clip], config: RunConfig, checkpoint_path=None,
                 resume: bool = False) -> Stage1Result:
    """
    AdamW on stage1_loss over random (source, driving) pairs.
    The batch draws of epoch e come from derive_seed(seed, 1, e), so a
    resumed run continues exactly where the saved one stopped.
    """
    _check_dataset(clips)
    train = config.stage1
    mode = config.ablation.input_mode
    device = resolve_device()
    model, init_seed = build_imitation_model(config)
    model.to(device)
    optimizer = adamw(model.parameters(), train)
    #
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
        log.info("Resuming stage 1 after epoch %s", checkpoint.epoch)
    #
    step = start_epoch * train.steps_per_epoch
    for epoch in range(start_epoch, train.epochs):
        model.train()
        rng = numpy_rng(config.seed, STAGE_SEED, epoch)
        totals = {"loss": 0.0, "l1": 0.0, "grad": 0.0}
        for _ in progress(range(train.steps_per_epoch), desc=f"stage1 epoch {epoch}"):
            clip_index, source, driving = sample_pairs(clips, rng, train.batch_size)
            source_pixels, source_reps = frame_batch(clips, clip_index, source, mode)
            target, driving_reps = frame_batch(clips, clip_index, driving, mode)
            #
            pred = model(
                torch.from_numpy(source_pixels).to(device),
                torch.from_numpy(source_reps).to(device),
                torch.from_numpy(driving_reps).to(device),
            )
            loss, components = stage1_loss(pred, torch.from_numpy(target).to(device), train.grad_weight)
            check_finite(loss, components, step, STAGE)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            #
            totals["loss"] += float(loss.detach())
            for name, value in components.items():
                totals[name] += value
            step += 1
        #
        means = {name: value / train.steps_per_epoch for name, value in totals.items()}
        loss_trace.append(LossRecord(
            epoch=epoch, loss=means.pop("loss"), components=means,
        ))
        log.info("Stage 1 epoch %s: loss %.5f (%s)", epoch, loss_trace[-1].loss, means)
        if checkpoint_path is not None:
            manifest = save_checkpoint(
                checkpoint_path, STAGE, model, init_seed, epoch, loss_trace,
                config_payload(config), optimizer=optimizer,
            )
    #
    model.eval()
    return Stage1Result(model=model, loss_trace=loss_trace, checksum=manifest.checksum if manifest else None)
