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

""" Module """

import logging
import time
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import torch

from .models.pd.config import RunConfig
from .models.pd.manifest import CONTAINER_VERSION, ArraySpec, DatasetManifest, RunManifest
from .models.pd.report import EvalReport
from .tools.config import Settings, config_hash, ensure_dir
from .tools.errors import ParameterError, StorageError
from .tools.seeding import derive_seed
from .tools.storage_engines import ContainerEngine

log = logging.getLogger(__name__)

MODES = ("interactive", "talking", "listening")
SAMPLING_SEED = 3
FRAME_DIR = "frames"
REPORT_FILE = "report.json"


class Module:
    """ Dyadic motion pipeline: one method per command """

    def __init__(self, config: RunConfig):
        self.config = config
        self.settings = Settings()
        self.config_hash = config_hash(config)
        self._clips = None

    def init(self):
        """ Init module """
        log.info("Initializing module dyadic_motion (config %s)", self.config_hash[:12])
        torch.set_num_threads(self.settings.DME_THREADS)
        torch.use_deterministic_algorithms(True, warn_only=True)

    def deinit(self):  # pylint: disable=R0201
        """ De-init module """
        log.info("De-initializing module dyadic_motion")

    #
    # Paths
    #

    @property
    def dataset_path(self) -> Path:
        return Path(self.config.dataset_path)

    @property
    def stage1_path(self) -> Path:
        return Path(self.config.checkpoint_dir) / "stage1"

    @property
    def stage2_path(self) -> Path:
        return Path(self.config.checkpoint_dir) / "stage2"

    def run_path(self, out: Optional[str] = None) -> Path:
        return Path(out) if out else Path(self.config.output_dir) / "run"

    #
    # Loading
    #

    def clips(self):
        if self._clips is None:
            from .world.dataset import read_dataset
            if not ContainerEngine(self.dataset_path).exists():
                raise StorageError(f"No dataset at {self.dataset_path}, run gen-data first")
            self._clips = read_dataset(self.dataset_path)
        return self._clips

    def clip(self, clip_id: Optional[str]):
        clips = self.clips()
        if clip_id is None:
            return clips[0]
        for item in clips:
            if item.clip_id == clip_id:
                return item
        raise ParameterError(f"Unknown clip {clip_id}")

    def _checkpoint(self, path: Path, kind: str):
        from .training.checkpoints import load_checkpoint
        if not ContainerEngine(path).exists():
            raise StorageError(f"Missing {kind} checkpoint at {path}")
        return load_checkpoint(path, kind=kind)

    def imitation_model(self):
        from .training.stage1 import imitation_model_from
        checkpoint = self._checkpoint(self.stage1_path, "stage1")
        return imitation_model_from(checkpoint, self.config), checkpoint

    def generator(self):
        from .training.stage2 import generator_from, normalizer_from
        checkpoint = self._checkpoint(self.stage2_path, "stage2")
        return generator_from(checkpoint, self.config), normalizer_from(checkpoint), checkpoint

    #
    # Commands
    #

    def cmd_gen_data(self) -> DatasetManifest:
        """ Generate and write the synthetic dataset """
        from .world.dataset import generate_dataset, write_dataset
        ensure_dir(self.dataset_path, "dataset")
        world = self.config.world
        clips = generate_dataset(world, self.config.seed)
        manifest = write_dataset(
            clips, self.dataset_path, seed=self.config.seed,
            generator={"world": world.dict(), "config_hash": self.config_hash},
        )
        self._clips = clips
        return manifest

    def cmd_train(self, stage: int, resume: bool = False):
        """ Train stage 1, or stage 2 on top of the frozen stage-1 checkpoint """
        ensure_dir(self.config.checkpoint_dir, "checkpoint")
        if stage == 1:
            from .training.stage1 import train_stage1
            return train_stage1(self.clips(), self.config, self.stage1_path, resume=resume)
        if stage == 2:
            from .training.stage2 import train_stage2
            imitation, checkpoint = self.imitation_model()
            result = train_stage2(
                self.clips(), imitation, self.config, self.stage2_path, resume=resume,
                stage1_checksum=checkpoint.checksum,
            )
            if self._checkpoint(self.stage1_path, "stage1").checksum != checkpoint.checksum:
                raise StorageError(f"Stage-1 checkpoint at {self.stage1_path} changed during stage 2")
            return result
        raise ParameterError(f"Unknown stage {stage}, expected 1 or 2")

    def _driving_audio(self, audio_clip, mode: str) -> Tuple[np.ndarray, np.ndarray]:
        audio = audio_clip.audio
        if mode == "talking":
            audio = audio.silenced("other")
        elif mode == "listening":
            audio = audio.silenced("self")
        return audio.self_track.astype(np.float32), audio.other_track.astype(np.float32)

    @torch.no_grad()
    def synthesize(self, portrait, audio_clip, mode: str = "interactive",
                   use_prev_tail: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """ Latents and frames for the portrait driven by the audio clip """
        from .diffusion import make_schedule, split_windows, stream_generate
        from .models.motion_space import encode_clip_motion, to_chw, to_hwc
        diffusion = self.config.diffusion
        imitation, _ = self.imitation_model()
        generator, normalizer, _ = self.generator()
        schedule = make_schedule(diffusion.T, diffusion.beta_min, diffusion.beta_max)
        mode_input = self.config.ablation.input_mode
        #
        portrait_codes = torch.from_numpy(
            encode_clip_motion(imitation.motion_encoder, portrait.pixels, portrait.landmarks, mode_input)
        )
        m_self = normalizer.normalize(portrait_codes[0])
        style = generator.style(normalizer.normalize(portrait_codes))
        audio_self, audio_other = self._driving_audio(audio_clip, mode)
        windows = split_windows(torch.from_numpy(audio_self), torch.from_numpy(audio_other), diffusion.N)
        #
        latents = stream_generate(
            lambda x, t, f_m, tail: generator.denoiser(x, t, f_m, tail),
            lambda a_self, a_other: generator.guider(a_self, a_other, style),
            windows, m_self, schedule, diffusion.N, derive_seed(self.config.seed, SAMPLING_SEED),
            prev_frames=diffusion.prev_frames, use_prev_tail=use_prev_tail, ddim_steps=diffusion.ddim_steps,
            s_motion=diffusion.cfg_motion, s_prev=diffusion.cfg_prev, start_t=diffusion.start_t,
        )
        latents = normalizer.denormalize(latents)
        #
        source = to_chw(portrait.pixels[0])
        frames = []
        for start in range(0, latents.shape[0], diffusion.N):
            chunk = latents[start:start + diffusion.N]
            frames.append(to_hwc(imitation.animate(source, portrait_codes[0:1], chunk)))
        return latents.numpy().astype(np.float32), np.concatenate(frames)

    def _ground_truth_run(self, audio_clip) -> Tuple[np.ndarray, np.ndarray]:
        from .models.motion_space import encode_clip_motion
        imitation, _ = self.imitation_model()
        n = (audio_clip.n_frames // self.config.diffusion.N) * self.config.diffusion.N
        if n < 1:
            raise ParameterError(
                f"clip {audio_clip.clip_id} is shorter than the window length {self.config.diffusion.N}"
            )
        codes = encode_clip_motion(
            imitation.motion_encoder, audio_clip.pixels, audio_clip.landmarks, self.config.ablation.input_mode,
        )
        return codes[:n], audio_clip.pixels[:n]

    def cmd_generate(self, portrait_clip_id: Optional[str] = None, audio_clip_id: Optional[str] = None,
                     mode: str = "interactive", ground_truth: bool = False,
                     out: Optional[str] = None) -> RunManifest:
        """ Frames + latents for a portrait driven by a clip's dyadic audio """
        from .tools.data_tools.files import write_frames
        if mode not in MODES:
            raise ParameterError(f"Unknown mode {mode}, expected one of {MODES}")
        portrait = self.clip(portrait_clip_id)
        audio_clip = self.clip(audio_clip_id or portrait.clip_id)
        run_dir = ensure_dir(self.run_path(out), "output")
        #
        started = time.perf_counter()
        stage2_checksum = None
        if ground_truth:
            latents, frames = self._ground_truth_run(audio_clip)
            mode = "ground_truth"
        else:
            latents, frames = self.synthesize(portrait, audio_clip, mode)
            stage2_checksum = self._checkpoint(self.stage2_path, "stage2").checksum
        elapsed = max(time.perf_counter() - started, 1e-9)
        throughput = frames.shape[0] / elapsed
        #
        engine = ContainerEngine(run_dir)
        with engine.writer():
            latents_spec = engine.write_array("run", "latents", latents)
            frame_files = write_frames(frames, run_dir / FRAME_DIR)
            same_identity = portrait.identity_id == audio_clip.identity_id
            manifest = RunManifest(
                version=CONTAINER_VERSION,
                mode=mode,
                portrait_clip_id=portrait.clip_id,
                audio_clip_id=audio_clip.clip_id,
                ground_truth_clip_id=audio_clip.clip_id if same_identity else None,
                seed=self.config.seed,
                fps=audio_clip.script.fps,
                n_frames=int(frames.shape[0]),
                frame_files=[f"{FRAME_DIR}/{name}" for name in frame_files],
                latents=ArraySpec(**latents_spec),
                throughput_fps=throughput,
                config_hash=self.config_hash,
                stage1_checksum=self._checkpoint(self.stage1_path, "stage1").checksum,
                stage2_checksum=stage2_checksum,
                checksum=engine.checksum([latents_spec["file"]]),
            )
            engine.save_manifest(manifest)
        log.info("Generated %s frames at %.1f frames/s into %s", manifest.n_frames, throughput, run_dir)
        return manifest

    def _probe(self, imitation):
        from .models.motion_space import encode_clip_motion
        from .tools.probes import fit_probe
        from .world.behavior import MOTION_FIELDS
        clips = self.clips()[:self.config.metrics.probe_clips]
        codes = [
            encode_clip_motion(imitation.motion_encoder, clip.pixels, clip.landmarks, self.config.ablation.input_mode)
            for clip in clips
        ]
        targets = [clip.track.motion for clip in clips]
        return fit_probe(np.concatenate(codes), np.concatenate(targets), MOTION_FIELDS, self.config.metrics.probe_alpha)

    def cmd_evaluate(self, run_dir: Optional[str] = None) -> EvalReport:
        """ Metrics of a generated run, written as sorted-key JSON next to it """
        from .metrics import GroundTruth, RunOutputs, build_report, compute_metrics
        from .models.motion_space import encode_clip_motion
        from .tools.data_tools.files import quantize, read_frames
        from .tools.serialize import dumps_sorted
        run_dir = self.run_path(run_dir)
        engine = ContainerEngine(run_dir)
        if not engine.exists():
            raise StorageError(f"No generated run at {run_dir}")
        manifest = engine.load_manifest(RunManifest)
        frames = read_frames(run_dir, manifest.frame_files)
        latents = engine.read_array(manifest.latents, leading_field="n_frames")
        if frames.shape[0] != latents.shape[0]:
            raise ParameterError(f"run has {frames.shape[0]} frames but {latents.shape[0]} latents")
        #
        imitation, _ = self.imitation_model()
        probe = self._probe(imitation)
        audio_clip = self.clip(manifest.audio_clip_id)
        run = RunOutputs(
            frames=frames, latents=latents, decoded=probe.predict(latents),
            script=audio_clip.script, window=self.config.diffusion.N,
        )
        ground_truth = None
        if manifest.ground_truth_clip_id is not None:
            reference = self.clip(manifest.ground_truth_clip_id)
            codes = encode_clip_motion(
                imitation.motion_encoder, reference.pixels, reference.landmarks, self.config.ablation.input_mode,
            )
            ground_truth = GroundTruth(pixels=quantize(reference.pixels), codes=codes, decoded=probe.predict(codes))
        metrics = self.config.metrics
        block, flags = compute_metrics(
            run, ground_truth, sid_k=metrics.sid_k, sync_max_lag=metrics.sync_max_lag,
            ssim_window=metrics.ssim_window, ssim_stride=metrics.ssim_stride,
        )
        report = build_report({manifest.audio_clip_id: block}, flags, self.config_hash)
        target = run_dir / REPORT_FILE
        try:
            target.write_text(dumps_sorted(report), encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"Cannot write report {target}: {exc}") from exc
        log.info("Wrote evaluation report to %s", target)
        return report
