from dataclasses import replace

import numpy as np
import pytest

from dyadic_motion.tools.data_tools.arrays import count_switches, run_lengths
from dyadic_motion.tools.errors import ParameterError
from dyadic_motion.world import (
    MOTION_FIELDS, ConversationState, FaceParams, behavior_model, face_landmarks, gen_script, render_face,
    sample_identity, synth_audio_features,
)
from dyadic_motion.world.behavior import BLINK_RATE, NOD_AMPLITUDE, NOD_DELAY, NOD_PROB, RANGES, _damped_nod
from dyadic_motion.world.dataset import dataset_identities
from dyadic_motion.world.render import CONTOUR_INDEX_SET, MOUTH_INDEX_SET, N_LANDMARKS
from dyadic_motion.world.script import SILENCE_CEILING, SPEAKING_FLOOR, ConversationScript, min_run_length


def test_default_script_has_role_switches():
    script = gen_script(250, seed=7, turn_len_mean_s=2.0, overlap_prob=0.1)
    assert count_switches(script.state) >= 2


def test_long_turns_give_constant_state():
    script = gen_script(25, seed=0, turn_len_mean_s=100.0, overlap_prob=0.0)
    assert len(set(script.state.tolist())) == 1
    assert script.single_sided


def test_script_is_deterministic():
    first = gen_script(250, seed=3)
    second = gen_script(250, seed=3)
    np.testing.assert_array_equal(first.state, second.state)
    np.testing.assert_array_equal(first.energy_self, second.energy_self)
    np.testing.assert_array_equal(first.energy_other, second.energy_other)
    np.testing.assert_array_equal(first.phrase_boundaries_other, second.phrase_boundaries_other)


@pytest.mark.parametrize("overlap_prob", [0.0, 0.1, 0.3])
def test_script_invariants(overlap_prob):
    for seed in range(100):
        script = gen_script(250, seed=seed, overlap_prob=overlap_prob)
        script.validate()
        assert min(run_lengths(script.state)) >= min_run_length(25)
        self_active, other_active = script.self_active(), script.other_active()
        assert np.all(script.energy_self[self_active] >= SPEAKING_FLOOR)
        assert np.all(script.energy_self[~self_active] <= SILENCE_CEILING)
        assert np.all(script.energy_other[other_active] >= SPEAKING_FLOOR)
        assert np.all(script.energy_other[~other_active] <= SILENCE_CEILING)
        boundaries = script.phrase_boundaries_other
        assert np.all(np.diff(boundaries) > 0) and np.all(boundaries < 250)
        # phrases end inside partner speech and every partner turn end is one
        assert np.all(other_active[boundaries - 1])
        turn_ends = np.flatnonzero(other_active[:-1] & ~other_active[1:]) + 1
        assert set(turn_ends.tolist()) <= set(boundaries.tolist())


@pytest.mark.parametrize("kwargs", [
    {"n_frames": 10},
    {"overlap_prob": 0.5},
    {"overlap_prob": -0.1},
    {"turn_len_mean_s": 0.0},
])
def test_script_rejects_invalid_ranges(kwargs):
    arguments = {"n_frames": 250, "seed": 0, **kwargs}
    with pytest.raises(ParameterError):
        gen_script(**arguments)


@pytest.mark.parametrize("state", [ConversationState.SELF_SPEAK, ConversationState.OTHER_SPEAK])
def test_fixed_state_script_is_single_sided(state):
    script = gen_script(100, seed=1, fixed_state=state)
    assert script.single_sided
    assert np.all(script.state == int(state))
    script.validate()


def test_audio_first_component_is_energy():
    script = gen_script(100, seed=2)
    audio = synth_audio_features(script, seed=5, dim=24)
    assert audio.self_track.shape == (100, 24)
    np.testing.assert_array_equal(audio.self_track[:, 0], script.energy_self)
    np.testing.assert_array_equal(audio.other_track[:, 0], script.energy_other)
    assert np.isfinite(audio.self_track).all() and np.isfinite(audio.other_track).all()


def test_audio_silenced_track():
    audio = synth_audio_features(gen_script(50, seed=2), seed=5, dim=4)
    quiet = audio.silenced("other")
    assert not quiet.other_track.any()
    np.testing.assert_array_equal(quiet.self_track, audio.self_track)
    with pytest.raises(ParameterError):
        audio.silenced("both")


def test_silent_frames_have_small_features():
    script = gen_script(200, seed=3, fixed_state=ConversationState.NEITHER)
    audio = synth_audio_features(script, seed=1)
    assert np.abs(audio.self_track).max() <= SILENCE_CEILING
    assert np.abs(audio.other_track).max() <= SILENCE_CEILING
    for seed in range(5):
        script = gen_script(500, seed=seed, overlap_prob=0.0)
        audio = synth_audio_features(script, seed=seed)
        pause = script.state == ConversationState.NEITHER
        assert np.abs(audio.self_track[pause]).max(initial=0.0) <= SILENCE_CEILING
        assert np.abs(audio.other_track[pause]).max(initial=0.0) <= SILENCE_CEILING


def test_zero_energy_gives_zero_features():
    script = gen_script(100, seed=2)
    script = replace(script, energy_self=np.zeros(100))
    audio = synth_audio_features(script, seed=5, dim=8)
    assert not audio.self_track.any()
    assert audio.other_track.any()


def test_audio_seed_changes_only_the_oscillations():
    script = gen_script(100, seed=2)
    first, second = synth_audio_features(script, seed=5), synth_audio_features(script, seed=6)
    np.testing.assert_array_equal(first.self_track[:, 0], second.self_track[:, 0])
    np.testing.assert_array_equal(first.other_track[:, 0], second.other_track[:, 0])
    assert not np.allclose(first.self_track[:, 1:], second.self_track[:, 1:])
    assert not np.allclose(first.other_track[:, 1:], second.other_track[:, 1:])


def test_behavior_fields_in_range_and_mouth_follows_energy():
    script = gen_script(1000, seed=11)
    track = behavior_model(script, seed=4)
    assert track.motion.shape == (1000, len(MOTION_FIELDS))
    for index, name in enumerate(MOTION_FIELDS):
        low, high = RANGES[name]
        assert track.motion[:, index].min() >= low and track.motion[:, index].max() <= high
    mouth = track.column("mouth_open")
    assert np.corrcoef(mouth, script.energy_self)[0, 1] >= 0.85
    track[0].validate()


def test_behavior_is_deterministic():
    script = gen_script(120, seed=11)
    np.testing.assert_array_equal(behavior_model(script, seed=4).motion, behavior_model(script, seed=4).motion)


def _constant_script(n_frames: int, state: ConversationState, boundaries=()) -> ConversationScript:
    """ One state throughout, zero own energy, partner speaking at 0.5 when active """
    other = 0.5 if state in (ConversationState.OTHER_SPEAK, ConversationState.BOTH) else 0.0
    return ConversationScript(
        fps=25,
        state=np.full(n_frames, int(state), dtype=np.uint8),
        energy_self=np.zeros(n_frames),
        energy_other=np.full(n_frames, other),
        phrase_boundaries_other=np.asarray(boundaries, dtype=np.int64),
    )


def test_silence_keeps_the_mouth_nearly_closed():
    for seed in range(5):
        track = behavior_model(_constant_script(500, ConversationState.NEITHER), seed=seed)
        assert track.column("mouth_open").max() <= 0.1


def test_nod_kernel_peaks_at_the_nod_amplitude():
    assert np.abs(_damped_nod(75)).max() == pytest.approx(NOD_AMPLITUDE)
    assert _damped_nod(75)[0] == 0.0


def test_listener_nods_follow_partner_phrase_boundaries():
    spacing = 100
    boundaries = spacing * np.arange(1, 40)
    n_frames = spacing * 40
    fired, total = 0, 0
    for seed in range(5):
        with_nods = behavior_model(_constant_script(n_frames, ConversationState.OTHER_SPEAK, boundaries), seed)
        without = behavior_model(_constant_script(n_frames, ConversationState.OTHER_SPEAK), seed)
        # pitch noise is drawn before the nods, so the difference is the nods alone
        nods = with_nods.column("pitch") - without.column("pitch")
        assert not nods[:spacing].any()
        for boundary in boundaries.tolist():
            moving = np.flatnonzero(np.abs(nods[boundary:boundary + spacing]) > 1e-12)
            total += 1
            if moving.size == 0:
                continue
            fired += 1
            # the kernel is zero at its first frame
            assert 1 <= moving[0] <= NOD_DELAY + 1
            assert np.abs(nods[boundary:boundary + spacing]).max() == pytest.approx(NOD_AMPLITUDE, abs=1e-9)
    assert fired / total == pytest.approx(NOD_PROB, abs=0.12)


def test_no_nods_while_the_agent_speaks():
    boundaries = [100, 200, 300]
    speaking = _constant_script(400, ConversationState.SELF_SPEAK, boundaries)
    quiet = _constant_script(400, ConversationState.SELF_SPEAK)
    np.testing.assert_array_equal(
        behavior_model(speaking, seed=2).column("pitch"), behavior_model(quiet, seed=2).column("pitch"),
    )


def test_blinks_are_short_and_poisson_rate():
    n_frames = 20000
    lengths = []
    for seed in range(2):
        eye = behavior_model(_constant_script(n_frames, ConversationState.NEITHER), seed=seed).column("eye_open_l")
        edges = np.diff(np.concatenate([[0], (eye == 0.0).astype(np.int8), [0]]))
        lengths.extend((np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)).tolist())
    assert set(lengths) == {2, 3}
    rate = len(lengths) / (2 * n_frames / 25)
    assert rate == pytest.approx(BLINK_RATE, abs=0.06)


def _params(**overrides) -> FaceParams:
    values = {
        "yaw": 0.0, "pitch": 0.0, "roll": 0.0, "eye_open_l": 0.8, "eye_open_r": 0.8,
        "mouth_open": 0.3, "mouth_width": 0.5, "brow_raise": 0.0, "identity": sample_identity(0),
    }
    values.update(overrides)
    return FaceParams(**values)


def test_render_shapes_and_range():
    frame = render_face(_params(), size=64)
    assert frame.pixels.shape == (64, 64, 3)
    assert frame.pixels.min() >= 0.0 and frame.pixels.max() <= 1.0
    assert frame.landmarks.shape == (N_LANDMARKS, 2)
    assert tuple(frame.contour_index_set) == tuple(CONTOUR_INDEX_SET)
    assert len(CONTOUR_INDEX_SET) == 16


def test_landmarks_are_analytic():
    params = _params(yaw=0.2, mouth_open=0.7)
    np.testing.assert_array_equal(render_face(params).landmarks, face_landmarks(params))


def test_mouth_landmarks_open_with_mouth_open():
    closed = face_landmarks(_params(mouth_open=0.0))
    opened = face_landmarks(_params(mouth_open=1.0))
    # top and bottom lip points
    assert opened[27, 1] - opened[26, 1] > closed[27, 1] - closed[26, 1]


def test_identity_hue_changes_pixels_not_landmarks():
    first = _params(identity=sample_identity(0))
    second = _params(identity=replace(first.identity, hue=(first.identity.hue + 0.5) % 1.0))
    np.testing.assert_array_equal(face_landmarks(first), face_landmarks(second))
    assert not np.array_equal(render_face(first).pixels, render_face(second).pixels)


def test_closed_mouth_lips_coincide():
    landmarks = face_landmarks(_params(mouth_open=0.0, mouth_width=0.9))
    top, bottom = MOUTH_INDEX_SET[2], MOUTH_INDEX_SET[3]
    assert np.abs(landmarks[bottom] - landmarks[top]).max() < 1.0 / 64


@pytest.mark.parametrize("seed", range(4))
def test_frontal_head_boundary_is_symmetric(seed):
    landmarks = face_landmarks(_params(identity=sample_identity(seed), brow_raise=0.5))
    offsets = np.sort(landmarks[list(CONTOUR_INDEX_SET), 0] - 0.5)
    np.testing.assert_allclose(offsets, -offsets[::-1], atol=1.0 / 64)


@pytest.mark.parametrize("overrides", [
    {"mouth_open": 1.5},
    {"yaw": -0.6},
    {"brow_raise": 1.2},
    {"eye_open_l": -0.1},
])
def test_render_rejects_out_of_range_params(overrides):
    with pytest.raises(ParameterError):
        render_face(_params(**overrides))


def test_dataset_identities_and_single_sided(tiny_clips, tiny_world):
    assert len(tiny_clips) == tiny_world.n_clips
    assert {clip.identity_id for clip in tiny_clips} == {0, 1}
    assert sum(clip.script.single_sided for clip in tiny_clips) >= 2
    identities = dataset_identities(tiny_world, seed=0)
    for clip in tiny_clips:
        assert clip.identity == identities[clip.identity_id]
        assert clip.pixels.shape == (tiny_world.n_frames, 32, 32, 3)
        assert clip.pixels.dtype == np.float32
