""" Two-stage training """

from .checkpoints import Checkpoint, load_checkpoint, save_checkpoint, state_checksum
from .stage1 import Stage1Result, build_imitation_model, imitation_model_from, train_stage1
from .stage2 import (
    ClipLatents, Stage2Result, WindowSampler, condition_masks, generator_from, held_out_loss, normalizer_from,
    train_stage2,
)
