from dataclasses import replace

import numpy as np
import pytest
import torch
from torch.autograd import gradcheck

from dyadic_motion.models.motion_space import (
    AppearanceEncoder, FaceDecoder, FlowEstimator, ImitationModel, MotionEncoder, build_hybrid_batch,
    build_hybrid_rep, encode_clip_motion, encode_motion, imitate, rasterize_points, region_mask, stage1_loss,
    warp_volume,
)
from dyadic_motion.models.pd.config import InputMode
from dyadic_motion.tools.errors import ShapeError
from dyadic_motion.world import FaceParams, RenderedFrame, render_face, sample_identity
from dyadic_motion.world.behavior import MOTION_FIELDS, RANGES
from dyadic_motion.world.render import EYE_LEFT

from .conftest import GRADCHECK, GRADCHECK_SEEDS, parameter_gradcheck


def _frame(size=64, seed=0, **overrides) -> RenderedFrame:
    values = {
        "yaw": 0.1, "pitch": -0.05, "roll": 0.05, "eye_open_l": 0.9, "eye_open_r": 0.8,
        "mouth_open": 0.5, "mouth_width": 0.5, "brow_raise": 0.2, "identity": sample_identity(seed),
    }
    values.update(overrides)
    return render_face(FaceParams(**values), size=size)


def test_hybrid_rep_keeps_only_eye_and_lip_boxes():
    frame = _frame()
    rep = build_hybrid_rep(frame)
    mask, fallback = region_mask(frame.landmarks, 64)
    assert fallback == ()
    assert not rep.masked_pixels[~mask].any()
    np.testing.assert_array_equal(rep.masked_pixels[mask], frame.pixels[mask])
    assert 0 < mask.mean() < 0.5
    assert rep.stack().shape == (64, 64, 4)


def test_contour_channel_marks_contour_points():
    frame = _frame()
    rep = build_hybrid_rep(frame)
    assert set(np.unique(rep.contour_channel).tolist()) == {0.0, 1.0}
    for x, y in frame.landmarks[:16]:
        assert rep.contour_channel[int(y * 64), int(x * 64)] == 1.0


def test_contour_channel_ignores_skin_color():
    identity = sample_identity(3)
    first = _frame(identity=identity)
    second = _frame(identity=replace(identity, hue=(identity.hue + 0.5) % 1.0))
    np.testing.assert_array_equal(build_hybrid_rep(first).contour_channel, build_hybrid_rep(second).contour_channel)


def test_input_mode_variants():
    frame = _frame()
    intact = build_hybrid_rep(frame, InputMode.INTACT_IMAGE)
    np.testing.assert_array_equal(intact.masked_pixels, frame.pixels)
    assert not intact.contour_channel.any()
    landmarks = build_hybrid_rep(frame, InputMode.LANDMARKS_MAP)
    assert landmarks.masked_pixels.sum() == 0
    np.testing.assert_array_equal(landmarks.contour_channel, rasterize_points(frame.landmarks, 64))


def _random_frame(seed: int) -> RenderedFrame:
    rng = np.random.default_rng(seed)
    values = {name: float(rng.uniform(*RANGES[name])) for name in MOTION_FIELDS}
    return render_face(FaceParams(identity=sample_identity(seed), **values))


@pytest.mark.parametrize("seed", range(20))
def test_contour_pixel_count_per_mode(seed):
    frame = _random_frame(seed)
    hybrid = np.count_nonzero(build_hybrid_rep(frame, InputMode.HYBRID).contour_channel)
    # 16 points, each a 3x3 square
    assert 16 <= hybrid <= 144
    landmarks = build_hybrid_rep(frame, InputMode.LANDMARKS_MAP).contour_channel
    assert hybrid <= np.count_nonzero(landmarks) <= 32 * 9
    assert np.count_nonzero(build_hybrid_rep(frame, InputMode.INTACT_IMAGE).contour_channel) == 0


def test_off_image_eye_falls_back_to_fixed_box():
    frame = _frame()
    landmarks = frame.landmarks.copy()
    landmarks[list(EYE_LEFT)] = [[-0.5, 0.5], [-0.4, 0.5]]
    rep = build_hybrid_rep(RenderedFrame(pixels=frame.pixels, landmarks=landmarks))
    assert rep.fallback_boxes == ("eye_left", )
    assert np.isfinite(rep.masked_pixels).all()


def test_hybrid_batch_layout():
    frames = [_frame(size=32, mouth_open=value) for value in (0.1, 0.5, 0.9)]
    pixels = np.stack([frame.pixels for frame in frames])
    landmarks = np.stack([frame.landmarks for frame in frames])
    batch = build_hybrid_batch(pixels, landmarks)
    assert batch.shape == (3, 4, 32, 32)
    np.testing.assert_array_equal(batch[1].transpose(1, 2, 0), build_hybrid_rep(frames[1]).stack())


def test_zero_rep_encodes_to_zero_code():
    torch.manual_seed(0)
    encoder = MotionEncoder(16)
    code = encoder(torch.zeros(2, 4, 64, 64))
    assert code.shape == (2, 16)
    assert torch.count_nonzero(code) == 0


def test_encode_motion_matches_batch_encoding():
    torch.manual_seed(0)
    encoder = MotionEncoder(8)
    frames = [_frame(size=32, mouth_open=value) for value in (0.2, 0.7)]
    codes = encode_clip_motion(
        encoder, np.stack([f.pixels for f in frames]), np.stack([f.landmarks for f in frames]), batch_size=1,
    )
    assert codes.shape == (2, 8) and codes.dtype == np.float32
    single = encode_motion(build_hybrid_rep(frames[1]), encoder)
    np.testing.assert_allclose(single.numpy(), codes[1], atol=1e-6)
    assert not np.allclose(codes[0], codes[1])


def test_motion_encoder_rejects_wrong_channels():
    with pytest.raises(ShapeError):
        MotionEncoder(8)(torch.zeros(1, 3, 32, 32))


def test_flow_is_zero_at_init():
    torch.manual_seed(0)
    estimator = FlowEstimator(8, (2, 4, 4))
    flow = estimator(torch.randn(3, 8), torch.randn(3, 8))
    assert flow.shape == (3, 2, 4, 4, 3)
    assert torch.count_nonzero(flow) == 0


def test_flow_is_bounded():
    torch.manual_seed(0)
    estimator = FlowEstimator(8, (2, 4, 4))
    torch.nn.init.normal_(estimator.head.weight, std=10.0)
    flow = estimator(torch.randn(5, 8) * 10, torch.randn(5, 8) * 10)
    assert flow.abs().max() <= 2.0


def test_appearance_volume_shape():
    encoder = AppearanceEncoder(16, 4)
    assert encoder(torch.rand(1, 3, 64, 64)).shape == (1, 16, 4, 16, 16)


def test_zero_flow_warp_is_identity():
    volume = torch.rand(2, 3, 4, 8, 8)
    warped = warp_volume(volume, torch.zeros(2, 4, 8, 8, 3))
    assert (warped - volume).abs().max() <= 1e-6


def test_one_voxel_shift_along_width():
    volume = torch.rand(1, 2, 3, 5, 6, dtype=torch.float64)
    flow = torch.zeros(1, 3, 5, 6, 3, dtype=torch.float64)
    flow[..., 2] = 2.0 / (6 - 1)
    warped = warp_volume(volume, flow)
    torch.testing.assert_close(warped[..., :-1], volume[..., 1:], atol=1e-6, rtol=0)
    # border clamp
    torch.testing.assert_close(warped[..., -1], volume[..., -1], atol=1e-6, rtol=0)


def test_warp_is_linear_in_the_volume():
    generator = torch.Generator().manual_seed(0)
    first = torch.rand(1, 2, 3, 4, 4, generator=generator, dtype=torch.float64)
    second = torch.rand(1, 2, 3, 4, 4, generator=generator, dtype=torch.float64)
    flow = 0.3 * torch.randn(1, 3, 4, 4, 3, generator=generator, dtype=torch.float64)
    combined = warp_volume(2.0 * first - 0.5 * second, flow)
    torch.testing.assert_close(combined, 2.0 * warp_volume(first, flow) - 0.5 * warp_volume(second, flow))


def test_warp_rejects_mismatched_flow():
    with pytest.raises(ShapeError):
        warp_volume(torch.zeros(1, 2, 3, 4, 4), torch.zeros(1, 3, 4, 5, 3))


def test_decoder_output_range():
    torch.manual_seed(0)
    decoder = FaceDecoder(4, 2)
    torch.nn.init.normal_(decoder.out.weight, std=5.0)
    frames = decoder(torch.randn(2, 4, 2, 8, 8) * 5)
    assert frames.shape == (2, 3, 32, 32)
    assert frames.min() >= 0.0 and frames.max() <= 1.0


def test_imitate_returns_one_frame_per_driving_frame():
    torch.manual_seed(0)
    model = ImitationModel(motion_dim=8, image_size=32, channels=4, depth=2).eval()
    source = _frame(size=32)
    driving = [_frame(size=32, seed=1, mouth_open=value) for value in np.linspace(0.0, 1.0, 5)]
    frames = imitate(model, source, driving)
    assert frames.shape == (5, 32, 32, 3)
    assert frames.min() >= 0.0 and frames.max() <= 1.0
    # untrained decoder head is zero, every frame is the same
    for index in range(1, 5):
        np.testing.assert_array_equal(frames[index], frames[0])


def test_imitate_rejects_mixed_sizes():
    model = ImitationModel(motion_dim=8, image_size=32, channels=4, depth=2)
    with pytest.raises(ShapeError):
        imitate(model, _frame(size=32), [_frame(size=64)])


def test_imitation_forward_matches_animate():
    torch.manual_seed(0)
    model = ImitationModel(motion_dim=8, image_size=32, channels=4, depth=2).double()
    torch.nn.init.normal_(model.flow_estimator.head.weight, std=0.1)
    torch.nn.init.normal_(model.face_decoder.out.weight, std=0.1)
    source = torch.rand(1, 3, 32, 32, dtype=torch.float64)
    source_rep = torch.rand(1, 4, 32, 32, dtype=torch.float64)
    driving_reps = torch.rand(3, 4, 32, 32, dtype=torch.float64)
    batched = model(source.expand(3, -1, -1, -1), source_rep.expand(3, -1, -1, -1), driving_reps)
    animated = model.animate(source[0], model.motion_encoder(source_rep), model.motion_encoder(driving_reps))
    torch.testing.assert_close(batched, animated)


def test_stage1_loss_of_identical_frames_is_zero():
    frames = torch.rand(2, 3, 8, 8)
    total, components = stage1_loss(frames, frames)
    assert float(total) == 0.0
    assert components == {"l1": 0.0, "grad": 0.0}


def test_stage1_loss_of_constant_offset():
    target = torch.rand(2, 3, 8, 8, dtype=torch.float64)
    total, components = stage1_loss(target + 0.25, target)
    assert components["grad"] == pytest.approx(0.0, abs=1e-12)
    assert float(total) == pytest.approx(0.25)


def test_stage1_loss_matches_brute_force():
    rng = np.random.default_rng(0)
    pred = rng.random((4, 4))
    target = rng.random((4, 4))
    l1 = np.abs(pred - target).mean()
    gx = [abs((pred[i, j + 1] - pred[i, j]) - (target[i, j + 1] - target[i, j])) for i in range(4) for j in range(3)]
    gy = [abs((pred[i + 1, j] - pred[i, j]) - (target[i + 1, j] - target[i, j])) for i in range(3) for j in range(4)]
    expected = l1 + 0.5 * (np.mean(gx) + np.mean(gy))
    total, _ = stage1_loss(torch.from_numpy(pred), torch.from_numpy(target))
    assert float(total) == pytest.approx(expected, rel=1e-12)


def test_stage1_loss_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        stage1_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 8, 4))


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_motion_encoder_gradients(float64_factory, seed):
    encoder = float64_factory(MotionEncoder, 4, channels=(2, 2, 2, 2), hidden=4, seed=seed)
    reps = torch.rand(2, 4, 16, 16, dtype=torch.float64, requires_grad=True)
    assert gradcheck(encoder, (reps, ), **GRADCHECK)
    assert parameter_gradcheck(encoder, reps.detach())


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_flow_estimator_gradients(float64_factory, seed):
    estimator = float64_factory(FlowEstimator, 4, (2, 2, 2), hidden=8, seed=seed)
    torch.nn.init.normal_(estimator.head.weight, std=0.3)
    m_src = torch.randn(2, 4, dtype=torch.float64, requires_grad=True)
    m_dri = torch.randn(2, 4, dtype=torch.float64, requires_grad=True)
    assert gradcheck(estimator, (m_src, m_dri), **GRADCHECK)
    assert parameter_gradcheck(estimator, m_src.detach(), m_dri.detach())


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_warp_gradients(seed):
    generator = torch.Generator().manual_seed(seed)
    volume = torch.rand(1, 2, 3, 4, 4, generator=generator, dtype=torch.float64).requires_grad_(True)
    # magnitudes in [0.05, 0.15] keep samples between grid lines
    magnitude = 0.05 + 0.1 * torch.rand(1, 3, 4, 4, 3, generator=generator, dtype=torch.float64)
    sign = torch.randint(0, 2, (1, 3, 4, 4, 3), generator=generator).to(torch.float64) * 2 - 1
    flow = (sign * magnitude).requires_grad_(True)
    assert gradcheck(warp_volume, (volume, flow), **GRADCHECK)


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_appearance_and_decoder_gradients(float64_factory, seed):
    encoder = float64_factory(AppearanceEncoder, 2, 2, seed=seed)
    decoder = float64_factory(FaceDecoder, 2, 2, seed=seed)
    torch.nn.init.normal_(decoder.out.weight, std=0.1)
    pixels = torch.rand(1, 3, 8, 8, dtype=torch.float64, requires_grad=True)
    assert gradcheck(encoder, (pixels, ), **GRADCHECK)
    volume = torch.randn(1, 2, 2, 2, 2, dtype=torch.float64, requires_grad=True)
    assert gradcheck(decoder, (volume, ), **GRADCHECK)


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_stage1_loss_gradients(seed):
    generator = torch.Generator().manual_seed(seed)
    pred = torch.rand(1, 3, 4, 4, generator=generator, dtype=torch.float64).requires_grad_(True)
    # offset and its forward differences stay clear of the L1 kink
    rows, columns = torch.meshgrid(torch.arange(4.0), torch.arange(4.0), indexing="ij")
    jitter = 0.01 * torch.rand(1, 3, 4, 4, generator=generator, dtype=torch.float64)
    target = pred.detach() - (0.3 + 0.1 * rows + 0.05 * columns).to(torch.float64) - jitter
    assert gradcheck(lambda value: stage1_loss(value, target)[0], (pred, ), **GRADCHECK)
