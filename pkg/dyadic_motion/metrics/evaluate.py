""" Evaluation report assembly """

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..models.pd.report import UNAVAILABLE, EvalReport, MetricValue
from ..world.behavior import EXPRESSION_FIELDS, MOTION_FIELDS, POSE_FIELDS
from ..world.script import ConversationScript, ConversationState
from .image import psnr, sequence_mean, ssim
from .motion import frechet_distance, motion_mse, motion_sid, motion_var, window_continuity
from .registry import RESERVED, MetricRegistry
from .sync import av_sync_corr

log = logging.getLogger(__name__)

FEATURE_SPLITS = {"exp": EXPRESSION_FIELDS, "pose": POSE_FIELDS}

for _split in FEATURE_SPLITS:
    MetricRegistry.declare(f"motion_var_{_split}", "diversity", higher_is_better=True)
    MetricRegistry.declare(f"motion_sid_{_split}", "diversity", higher_is_better=True)
    MetricRegistry.declare(f"fd_{_split}", "distance", needs_ground_truth=True, higher_is_better=False)
    MetricRegistry.declare(f"mse_{_split}", "distance", needs_ground_truth=True, higher_is_better=False)
MetricRegistry.declare("fd_motion", "distance", needs_ground_truth=True, higher_is_better=False)
MetricRegistry.declare("mouth_open_speaking", "interactivity")
MetricRegistry.declare("mouth_open_listening", "interactivity")
MetricRegistry.declare("listening_ratio", "interactivity", higher_is_better=False)


@dataclass(eq=False)
class GroundTruth:
    """ Reference frames, encoded codes and their decoded face features for one clip

    decoded must come from the same readout as RunOutputs.decoded so both sides share one feature space.
    """
    pixels: np.ndarray
    codes: np.ndarray
    decoded: np.ndarray


@dataclass(eq=False)
class RunOutputs:
    frames: np.ndarray
    latents: np.ndarray
    decoded: np.ndarray
    script: ConversationScript
    window: int


def _columns(motion: np.ndarray, fields) -> np.ndarray:
    return motion[:, [MOTION_FIELDS.index(field) for field in fields]]


def _interactivity(mouth: np.ndarray, state: np.ndarray) -> Dict[str, MetricValue]:
    speaking = state == ConversationState.SELF_SPEAK
    listening = state == ConversationState.OTHER_SPEAK
    block: Dict[str, MetricValue] = {
        "mouth_open_speaking": float(mouth[speaking].mean()) if speaking.any() else UNAVAILABLE,
        "mouth_open_listening": float(mouth[listening].mean()) if listening.any() else UNAVAILABLE,
        "listening_ratio": UNAVAILABLE,
    }
    if speaking.any() and listening.any() and block["mouth_open_speaking"] > 0:
        block["listening_ratio"] = block["mouth_open_listening"] / block["mouth_open_speaking"]
    return block


def compute_metrics(run: RunOutputs, ground_truth: Optional[GroundTruth],
                    sid_k: int = 8, sync_max_lag: int = 5, ssim_window: int = 8,
                    ssim_stride: int = 4) -> Tuple[Dict[str, MetricValue], List[str]]:
    """ Metric block for one run plus the flags raised on the way """
    n = run.latents.shape[0]
    metrics: Dict[str, MetricValue] = {name: UNAVAILABLE for name in RESERVED}
    flags = []
    #
    metrics["motion_var"] = motion_var(run.latents)
    metrics["motion_sid"] = motion_sid(run.latents, k=min(sid_k, n))
    for split, fields in FEATURE_SPLITS.items():
        features = _columns(run.decoded, fields)
        metrics[f"motion_var_{split}"] = motion_var(features)
        metrics[f"motion_sid_{split}"] = motion_sid(features, k=min(sid_k, n))
    #
    mouth = run.decoded[:, MOTION_FIELDS.index("mouth_open")]
    energy = run.script.energy_self[:n]
    if n >= 50:
        sync = av_sync_corr(mouth, energy, sync_max_lag)
        metrics["av_sync_corr"] = sync.value
        metrics["av_sync_lag"] = float(sync.lag)
        if not sync.defined:
            flags.append("av_sync_undefined")
    else:
        metrics["av_sync_corr"] = metrics["av_sync_lag"] = UNAVAILABLE
        flags.append("too_short_for_sync")
    metrics.update(_interactivity(mouth, run.script.state[:n]))
    #
    if n >= 2 * run.window:
        metrics["continuity_ratio"] = window_continuity(run.latents, run.window)
    else:
        metrics["continuity_ratio"] = UNAVAILABLE
        flags.append("single_window")
    #
    fidelity = ("psnr", "ssim", "fd_motion") + tuple(
        f"{kind}_{split}" for kind in ("fd", "mse") for split in FEATURE_SPLITS
    )
    if ground_truth is None:
        flags.append("no_ground_truth")
        metrics.update({name: UNAVAILABLE for name in fidelity})
    else:
        reference = ground_truth.pixels[:n]
        metrics["psnr"] = sequence_mean(psnr, run.frames, reference)
        metrics["ssim"] = sequence_mean(ssim, run.frames, reference, window=ssim_window, stride=ssim_stride)
        metrics["fd_motion"] = frechet_distance(run.latents, ground_truth.codes[:n])
        for split, fields in FEATURE_SPLITS.items():
            generated = _columns(run.decoded, fields)
            true = _columns(ground_truth.decoded[:n], fields)
            metrics[f"fd_{split}"] = frechet_distance(generated, true)
            metrics[f"mse_{split}"] = motion_mse(generated, true)
    return metrics, flags


def build_report(per_clip: Dict[str, Dict[str, MetricValue]], flags, config_hash: str) -> EvalReport:
    """ Average numeric metrics over clips; a metric unavailable anywhere stays unavailable """
    names = sorted({name for block in per_clip.values() for name in block})
    metrics: Dict[str, MetricValue] = {}
    for name in names:
        values = [block.get(name, UNAVAILABLE) for block in per_clip.values()]
        if any(isinstance(value, str) for value in values):
            metrics[name] = UNAVAILABLE
        else:
            metrics[name] = float(np.mean(values))
    return EvalReport(metrics=metrics, per_clip=per_clip, flags=sorted(set(flags)), config_hash=config_hash)
