""" Shared fixtures: tiny configs, small datasets, float64 network factories """

import numpy as np
import pytest
import torch
from torch.autograd import gradcheck
from torch.func import functional_call

from dyadic_motion.models.pd.config import RunConfig, WorldConfig
from dyadic_motion.tools.config import Settings
from dyadic_motion.world.dataset import generate_dataset

TINY_WORLD = {
    "n_clips": 6,
    "n_frames": 60,
    "image_size": 32,
    "audio_dim": 8,
    "n_identities": 2,
    "single_sided_fraction": 0.34,
}

GRADCHECK = {"eps": 1e-4, "atol": 1e-5, "rtol": 1e-3}
GRADCHECK_SEEDS = range(5)

TINY = {
    "world": TINY_WORLD,
    "motion": {"motion_dim": 8, "volume_channels": 4, "volume_depth": 2},
    "stage1": {"epochs": 2, "steps_per_epoch": 2, "batch_size": 4},
    "guider": {"bank_size": 4, "bank_dim": 16, "feature_dim": 16, "style_dim": 8},
    "diffusion": {
        "T": 50, "width": 16, "heads": 2, "N": 20, "D_m": 8, "prev_frames": 5, "ddim_steps": 5,
        "epochs": 2, "steps_per_epoch": 2, "batch_size": 4, "warmup_epochs": 1,
    },
    "metrics": {"probe_clips": 3, "sid_k": 4},
}


@pytest.fixture(autouse=True)
def quiet_settings(monkeypatch):
    monkeypatch.setenv("DME_PROGRESS", "0")
    monkeypatch.setenv("DME_THREADS", "2")
    monkeypatch.setenv("DME_DEVICE", "cpu")
    Settings.reset()
    yield
    Settings.reset()


def tiny_payload(tmp_path, **sections) -> dict:
    payload = {key: dict(value) for key, value in TINY.items()}
    payload.update({
        "dataset_path": str(tmp_path / "dataset"),
        "checkpoint_dir": str(tmp_path / "checkpoints"),
        "output_dir": str(tmp_path / "output"),
    })
    for key, value in sections.items():
        if isinstance(value, dict):
            payload.setdefault(key, {}).update(value)
        else:
            payload[key] = value
    return payload


@pytest.fixture
def tiny_config(tmp_path) -> RunConfig:
    return RunConfig.parse_obj(tiny_payload(tmp_path))


@pytest.fixture(scope="session")
def tiny_world() -> WorldConfig:
    return WorldConfig(**TINY_WORLD)


@pytest.fixture(scope="session")
def tiny_clips(tiny_world):
    return generate_dataset(tiny_world, seed=0, workers=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64_factory():
    """ Build a module under a fixed seed and cast it to float64 """
    def _factory(cls, *args, seed: int = 0, **kwargs):
        torch.manual_seed(seed)
        return cls(*args, **kwargs).double()
    return _factory


def parameter_gradcheck(module, *inputs) -> bool:
    """ gradcheck of the module output against every parameter, inputs held fixed """
    names = [name for name, _ in module.named_parameters()]
    params = tuple(param.detach().clone().requires_grad_(True) for param in module.parameters())

    def _call(*flat):
        return functional_call(module, dict(zip(names, flat)), inputs)

    return gradcheck(_call, params, **GRADCHECK)
