import json

import numpy as np
import pytest

from dyadic_motion.tools.config import Settings, config_hash, load_run_config
from dyadic_motion.tools.errors import FormatError, ParameterError, StorageError
from dyadic_motion.tools.seeding import derive_seed
from dyadic_motion.tools.storage_engines import ContainerEngine
from dyadic_motion.world.dataset import read_dataset, read_manifest, write_dataset


@pytest.fixture
def written(tmp_path, tiny_clips):
    path = tmp_path / "dataset"
    manifest = write_dataset(tiny_clips, path, seed=0)
    return path, manifest


def test_dataset_round_trip_is_exact(written, tiny_clips):
    path, _ = written
    restored = read_dataset(path)
    assert [clip.clip_id for clip in restored] == [clip.clip_id for clip in tiny_clips]
    for original, clip in zip(tiny_clips, restored):
        assert clip.identity_id == original.identity_id
        assert clip.identity == original.identity
        np.testing.assert_array_equal(clip.script.state, original.script.state)
        np.testing.assert_array_equal(clip.script.energy_self, original.script.energy_self)
        np.testing.assert_array_equal(clip.audio.other_track, original.audio.other_track)
        np.testing.assert_array_equal(clip.track.motion, original.track.motion)
        np.testing.assert_array_equal(clip.pixels, original.pixels)
        np.testing.assert_array_equal(clip.landmarks, original.landmarks)
        np.testing.assert_array_equal(
            clip.script.phrase_boundaries_other, original.script.phrase_boundaries_other
        )


def test_manifest_checksum_is_deterministic(tmp_path, tiny_clips, written):
    _, manifest = written
    again = write_dataset(tiny_clips, tmp_path / "again", seed=0)
    assert again.checksum == manifest.checksum
    assert read_manifest(tmp_path / "again").checksum == manifest.checksum


def test_tampered_frame_count_is_a_format_error(written):
    path, _ = written
    target = path / ContainerEngine.MANIFEST
    data = json.loads(target.read_text(encoding="utf-8"))
    data["clips"][0]["n_frames"] += 1
    target.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(FormatError) as info:
        read_dataset(path)
    assert info.value.field == "n_frames"


def test_truncated_array_file_is_a_format_error(written):
    path, manifest = written
    name = manifest.clips[0].arrays["motion"].file
    raw = (path / name).read_bytes()
    (path / name).write_bytes(raw[:len(raw) // 2])
    with pytest.raises(FormatError):
        read_dataset(path)


def test_corrupt_manifest_is_a_format_error(written):
    path, _ = written
    (path / ContainerEngine.MANIFEST).write_text("{ not json", encoding="utf-8")
    with pytest.raises(FormatError):
        read_dataset(path)


def test_flipped_byte_fails_checksum(written):
    path, manifest = written
    name = manifest.clips[1].arrays["energy_self"].file
    raw = bytearray((path / name).read_bytes())
    raw[0] ^= 0xFF
    (path / name).write_bytes(bytes(raw))
    with pytest.raises(FormatError) as info:
        read_dataset(path)
    assert info.value.field == "checksum"
    assert len(read_dataset(path, verify_checksum=False)) == len(manifest.clips)


def test_missing_container_is_a_storage_error(tmp_path):
    with pytest.raises(StorageError):
        read_dataset(tmp_path / "nowhere")


def test_concurrent_writer_is_rejected(tmp_path, tiny_clips):
    engine = ContainerEngine(tmp_path / "dataset")
    with engine.writer():
        with pytest.raises(StorageError):
            write_dataset(tiny_clips, tmp_path / "dataset")


def test_write_array_layout(tmp_path):
    engine = ContainerEngine(tmp_path)
    data = np.arange(12, dtype=np.float32).reshape(3, 4)
    with engine.writer():
        spec = engine.write_array("clip", "values", data)
    assert spec == {"file": "clip.values.f32", "shape": [3, 4], "dtype": "float32"}
    assert (tmp_path / "clip.values.f32").read_bytes() == data.astype("<f4").tobytes()
    np.testing.assert_array_equal(engine.read_array(spec), data)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1) == derive_seed(0, 1)
    seeds = {derive_seed(7, index) for index in range(100)}
    assert len(seeds) == 100
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert all(0 <= seed < 2 ** 63 for seed in seeds)


def test_run_config_defaults_and_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 3, "diffusion": {"N": 20}}), encoding="utf-8")
    config = load_run_config(str(path), {"seed": 5, "world.n_clips": 4, "motion.motion_dim": None})
    assert config.seed == 5
    assert config.world.n_clips == 4
    assert config.diffusion.N == 20
    assert config.motion.motion_dim == 32


@pytest.mark.parametrize("overrides", [
    {"unknown_key": 1},
    {"world.unknown_key": 1},
    {"diffusion.D_m": 16},
    {"world.n_clips": 0},
    {"diffusion.blocks": 3},
    {"diffusion.beta_min": 0.5},
    {"world.image_size": 30},
])
def test_invalid_run_config_is_a_parameter_error(overrides):
    with pytest.raises(ParameterError):
        load_run_config(None, overrides)


def test_missing_config_file_is_a_storage_error(tmp_path):
    with pytest.raises(StorageError):
        load_run_config(str(tmp_path / "absent.json"))


def test_config_hash_ignores_key_order():
    first = load_run_config(None, {"seed": 1, "world.n_clips": 3})
    second = load_run_config(None, {"world.n_clips": 3, "seed": 1})
    assert config_hash(first) == config_hash(second)
    assert config_hash(first) != config_hash(load_run_config(None, {"seed": 2}))


def test_settings_read_environment():
    Settings.reset()
    settings = Settings({"dme_threads": "3", "DME_PROGRESS": "off", "DME_DEVICE": "cpu"})
    assert settings.DME_THREADS == 3
    assert settings.DME_PROGRESS is False
    assert Settings() is settings


@pytest.mark.parametrize("environ", [{"DME_THREADS": "many"}, {"DME_THREADS": "0"}])
def test_invalid_settings_are_parameter_errors(environ):
    Settings.reset()
    with pytest.raises(ParameterError):
        Settings(environ)
