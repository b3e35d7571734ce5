""" Checkpoints in the shared container format """

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch
from torch import nn

from ..models.pd.manifest import (
    CONTAINER_VERSION, ArraySpec, CheckpointManifest, LayerRecord, LossRecord, OptimizerRecord,
)
from ..tools.errors import FormatError, StorageError
from ..tools.storage_engines import ContainerEngine

log = logging.getLogger(__name__)

OPTIMIZER_SLOTS = ("exp_avg", "exp_avg_sq")


@dataclass
class Checkpoint:
    """ Loaded checkpoint: weights, extra buffers, optimizer state, manifest """
    manifest: CheckpointManifest
    weights: Dict[str, torch.Tensor]
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)
    optimizer_state: Optional[dict] = None

    @property
    def epoch(self) -> int:
        return self.manifest.epoch

    @property
    def loss_trace(self) -> List[LossRecord]:
        return list(self.manifest.loss_trace)

    @property
    def checksum(self) -> str:
        return self.manifest.checksum


def state_checksum(module: nn.Module) -> str:
    """ SHA-256 over float32 parameter bytes in state_dict order """
    digest = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        digest.update(name.encode("utf-8"))
        digest.update(tensor.detach().cpu().to(torch.float32).contiguous().numpy().tobytes())
    return digest.hexdigest()


def _optimizer_record(engine: ContainerEngine, model: nn.Module, optimizer: torch.optim.Optimizer) -> OptimizerRecord:
    group = optimizer.param_groups[0]
    hyper = {
        "lr": float(group["lr"]), "beta1": float(group["betas"][0]), "beta2": float(group["betas"][1]),
        "weight_decay": float(group["weight_decay"]), "eps": float(group["eps"]),
    }
    steps = {}
    slots = []
    for name, parameter in model.named_parameters():
        state = optimizer.state.get(parameter)
        if not state:
            continue
        steps[name] = int(state["step"])
        for slot in OPTIMIZER_SLOTS:
            spec = engine.write_array("optim", f"{name}.{slot}", state[slot].detach().cpu().numpy())
            slots.append(LayerRecord(name=f"{name}.{slot}", array=ArraySpec(**spec)))
    return OptimizerRecord(hyper=hyper, steps=steps, slots=slots)


def save_checkpoint(path, kind: str, model: nn.Module, init_seed: int, epoch: int,
                    loss_trace: List[LossRecord], config: dict,
                    optimizer: Optional[torch.optim.Optimizer] = None,
                    buffers: Optional[Dict[str, np.ndarray]] = None,
                    frozen_checksum: Optional[str] = None) -> CheckpointManifest:
    """ Write weights.<param>.f32 (+ optim.*, buffer.*) and the manifest last """
    engine = ContainerEngine(path)
    with engine.writer():
        layers = []
        for name, tensor in model.state_dict().items():
            spec = engine.write_array("weights", name, tensor.detach().cpu().numpy())
            layers.append(LayerRecord(name=name, array=ArraySpec(**spec)))
        extra = []
        for name, array in (buffers or {}).items():
            spec = engine.write_array("buffer", name, array)
            extra.append(LayerRecord(name=name, array=ArraySpec(**spec)))
        optimizer_record = None if optimizer is None else _optimizer_record(engine, model, optimizer)
        #
        files = [record.array.file for record in layers + extra]
        keep = files + ([record.array.file for record in optimizer_record.slots] if optimizer_record else [])
        manifest = CheckpointManifest(
            version=CONTAINER_VERSION,
            kind=kind,
            init_seed=init_seed,
            epoch=epoch,
            layers=layers,
            buffers=extra,
            optimizer=optimizer_record,
            loss_trace=loss_trace,
            config=config,
            frozen_checksum=frozen_checksum,
            checksum=engine.checksum(files),
        )
        engine.remove_stale(keep)
        engine.save_manifest(manifest)
    log.info("Saved %s checkpoint (epoch %s) to %s", kind, epoch, path)
    return manifest


def _optimizer_state(engine: ContainerEngine, record: OptimizerRecord, names: List[str]) -> dict:
    slots = {item.name: item.array for item in record.slots}
    state = {}
    for index, name in enumerate(names):
        if name not in record.steps:
            continue
        state[index] = {
            "step": torch.tensor(float(record.steps[name])),
            **{
                slot: torch.from_numpy(engine.read_array(slots[f"{name}.{slot}"]).copy())
                for slot in OPTIMIZER_SLOTS
            },
        }
    return state


def load_checkpoint(path, kind: Optional[str] = None, verify_checksum: bool = True) -> Checkpoint:
    engine = ContainerEngine(path)
    if not engine.exists():
        raise StorageError(f"No checkpoint at {Path(path)}")
    manifest = engine.load_manifest(CheckpointManifest)
    if kind is not None and manifest.kind != kind:
        raise FormatError("kind", f"expected a {kind} checkpoint, found {manifest.kind}")
    #
    weights = {
        record.name: torch.from_numpy(engine.read_array(record.array).copy())
        for record in manifest.layers
    }
    buffers = {record.name: engine.read_array(record.array) for record in manifest.buffers}
    if verify_checksum:
        files = [record.array.file for record in manifest.layers + manifest.buffers]
        if engine.checksum(files) != manifest.checksum:
            raise FormatError("checksum", f"checkpoint {path} does not match its checksum")
    optimizer_state = None
    if manifest.optimizer is not None:
        optimizer_state = _optimizer_state(engine, manifest.optimizer, [record.name for record in manifest.layers])
    return Checkpoint(manifest=manifest, weights=weights, buffers=buffers, optimizer_state=optimizer_state)


def restore_optimizer(optimizer: torch.optim.Optimizer, model: nn.Module, checkpoint: Checkpoint) -> None:
    """ Load saved AdamW moments and step counters into optimizer """
    if checkpoint.optimizer_state is None:
        return
    layer_names = [record.name for record in checkpoint.manifest.layers]
    parameter_names = [name for name, _ in model.named_parameters()]
    state = {}
    for index, name in enumerate(parameter_names):
        saved = checkpoint.optimizer_state.get(layer_names.index(name)) if name in layer_names else None
        if saved is not None:
            state[index] = saved
    payload = optimizer.state_dict()
    payload["state"] = state
    optimizer.load_state_dict(payload)
