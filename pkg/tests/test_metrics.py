import math

import numpy as np
import pytest
from pydantic import ValidationError

from dyadic_motion.metrics import (
    RESERVED, GroundTruth, MetricRegistry, RunOutputs, av_sync_corr, build_report, compute_metrics,
    frechet_distance, motion_mse, motion_sid, motion_var, psnr, ssim, window_continuity,
)
from dyadic_motion.metrics.image import PSNR_CAP, sequence_mean
from dyadic_motion.models.pd.report import UNAVAILABLE, EvalReport
from dyadic_motion.tools.errors import ParameterError, ShapeError
from dyadic_motion.world.behavior import MOTION_FIELDS
from dyadic_motion.world.script import ConversationState, gen_script


def test_psnr_identity_is_capped(rng):
    image = rng.random((16, 16, 3))
    assert psnr(image, image) == PSNR_CAP == 99


def test_psnr_of_uniform_offset():
    target = np.full((8, 8, 3), 0.5)
    assert psnr(target + 0.1, target) == pytest.approx(20.0, abs=1e-6)


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(np.zeros((8, 8, 3)), np.zeros((8, 4, 3)))


def test_ssim_identity_and_inverse(rng):
    image = rng.random((16, 16, 3))
    assert ssim(image, image) == pytest.approx(1.0, abs=1e-12)
    assert ssim(1.0 - image, image) < 1.0
    assert ssim(image, 1.0 - image) == pytest.approx(ssim(1.0 - image, image))
    flat = np.full((16, 16, 3), 0.3)
    assert ssim(flat, flat) == pytest.approx(1.0)


def test_ssim_matches_brute_force(rng):
    x, y = rng.random((16, 16)), rng.random((16, 16))
    values = []
    for top in range(0, 9, 4):
        for left in range(0, 9, 4):
            a = x[top:top + 8, left:left + 8]
            b = y[top:top + 8, left:left + 8]
            cov = ((a - a.mean()) * (b - b.mean())).mean()
            c1, c2 = 0.01 ** 2, 0.03 ** 2
            values.append(
                (2 * a.mean() * b.mean() + c1) * (2 * cov + c2)
                / ((a.mean() ** 2 + b.mean() ** 2 + c1) * (a.var() + b.var() + c2))
            )
    assert ssim(x, y) == pytest.approx(np.mean(values), abs=1e-12)


def test_ssim_window_larger_than_image():
    with pytest.raises(ParameterError):
        ssim(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)))


def test_sequence_mean(rng):
    frames = rng.random((3, 16, 16, 3))
    assert sequence_mean(psnr, frames, frames) == PSNR_CAP
    with pytest.raises(ParameterError):
        sequence_mean(psnr, frames[:0], frames[:0])


def test_motion_var():
    assert motion_var(np.ones((10, 3))) == 0.0
    assert motion_var(np.array([[0.0], [2.0]])) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        motion_var(np.zeros((1, 3)))


def test_motion_sid_constant_and_two_clusters():
    assert motion_sid(np.ones((20, 2)), k=8) == 0.0
    codes = np.concatenate([np.zeros((10, 2)), np.full((10, 2), 10.0)])
    assert motion_sid(codes, k=8) == pytest.approx(math.log(2), abs=1e-6)


def test_motion_sid_is_seeded(rng):
    codes = rng.standard_normal((200, 4))
    assert motion_sid(codes, k=6, seed=3) == motion_sid(codes, k=6, seed=3)
    assert 0.0 < motion_sid(codes, k=6) <= math.log(6) + 1e-12
    with pytest.raises(ParameterError):
        motion_sid(codes, k=0)
    with pytest.raises(ParameterError):
        motion_sid(codes[:3], k=6)


def test_frechet_distance(rng):
    a = rng.standard_normal((500, 3))
    assert frechet_distance(a, a) == pytest.approx(0.0, abs=1e-6)
    assert frechet_distance(a, a + 1.0) == pytest.approx(3.0, abs=1e-6)
    with pytest.raises(ShapeError):
        frechet_distance(a, a[:, :2])


def test_motion_mse():
    assert motion_mse(np.zeros((4, 2)), np.ones((4, 2))) == 1.0
    with pytest.raises(ShapeError):
        motion_mse(np.zeros((4, 2)), np.zeros((3, 2)))


def test_window_continuity():
    ramp = np.arange(40, dtype=np.float64)[:, None]
    assert window_continuity(ramp, 10) == pytest.approx(1.0)
    restarts = np.tile(np.arange(10, dtype=np.float64), 4)[:, None]
    # each boundary steps back by 9
    assert window_continuity(restarts, 10) == pytest.approx(9.0)
    with pytest.raises(ParameterError):
        window_continuity(np.zeros((40, 2)), 10)
    with pytest.raises(ParameterError):
        window_continuity(ramp[:15], 10)


def test_sync_identical_and_delayed(rng):
    signal = rng.standard_normal(103)
    result = av_sync_corr(signal[:100], signal[:100])
    assert result.lag == 0 and result.defined
    assert result.value == pytest.approx(1.0)
    delayed = av_sync_corr(signal[:100], signal[3:103])
    assert delayed.lag == 3
    assert delayed.value == pytest.approx(1.0)


def test_sync_of_white_noise(rng):
    result = av_sync_corr(rng.standard_normal(1000), rng.standard_normal(1000))
    assert abs(result.value) < 0.15


def test_sync_constant_input_is_undefined(rng):
    result = av_sync_corr(np.full(60, 0.2), rng.random(60))
    assert (result.value, result.lag, result.defined) == (0.0, 0, False)


def test_sync_errors(rng):
    with pytest.raises(ParameterError):
        av_sync_corr(rng.random(49), rng.random(49))
    with pytest.raises(ParameterError):
        av_sync_corr(rng.random(60), rng.random(61))
    with pytest.raises(ParameterError):
        av_sync_corr(rng.random(60), rng.random(60), max_lag=-1)


@pytest.fixture
def isolated_registry(monkeypatch):
    monkeypatch.setattr(MetricRegistry, "_registry", dict(MetricRegistry._registry))


def test_registry_holds_reserved_names():
    assert MetricRegistry.names("reserved") == sorted(RESERVED)
    for name in ("psnr", "ssim", "motion_var", "motion_sid", "av_sync_corr", "continuity_ratio", "fd_exp"):
        assert MetricRegistry.is_registered(name)
    assert MetricRegistry.get("psnr")["needs_ground_truth"]
    assert MetricRegistry.get("psnr")["func"] is psnr
    with pytest.raises(KeyError):
        MetricRegistry.get("bleu")


@pytest.mark.usefixtures("isolated_registry")
def test_registry_rejects_duplicates_and_unknown_groups():
    with pytest.raises(ParameterError):
        MetricRegistry.declare("psnr", "fidelity", func=lambda a, b: 0.0)
    with pytest.raises(ParameterError):
        MetricRegistry.declare("smoothness", "aesthetics")
    MetricRegistry.declare("fid", "reserved")

    @MetricRegistry.register("jerk", "continuity", higher_is_better=False)
    def jerk(codes):
        return float(np.abs(np.diff(codes, n=3, axis=0)).mean())

    assert MetricRegistry.get("jerk")["func"] is jerk
    assert "jerk" in MetricRegistry.names("continuity")


def _run(n: int, window: int = 20, seed: int = 0):
    rng = np.random.default_rng(seed)
    script = gen_script(n, seed=seed, fixed_state=ConversationState.SELF_SPEAK)
    decoded = rng.standard_normal((n, len(MOTION_FIELDS)))
    decoded[:, MOTION_FIELDS.index("mouth_open")] = script.energy_self
    return RunOutputs(
        frames=rng.random((n, 16, 16, 3)),
        latents=rng.standard_normal((n, 4)),
        decoded=decoded,
        script=script,
        window=window,
    )


def test_compute_metrics_against_itself():
    run = _run(60)
    truth = GroundTruth(pixels=run.frames, codes=run.latents, decoded=run.decoded)
    metrics, flags = compute_metrics(run, truth, sid_k=4)
    assert flags == []
    assert metrics["psnr"] == PSNR_CAP
    assert metrics["ssim"] == pytest.approx(1.0)
    assert metrics["mse_exp"] == metrics["mse_pose"] == 0.0
    assert metrics["fd_motion"] == pytest.approx(0.0, abs=1e-6)
    assert metrics["av_sync_corr"] == pytest.approx(1.0)
    assert metrics["av_sync_lag"] == 0.0
    for name in RESERVED:
        assert metrics[name] == UNAVAILABLE
    # only self speech in the script
    assert metrics["mouth_open_listening"] == UNAVAILABLE
    assert metrics["listening_ratio"] == UNAVAILABLE
    assert all(MetricRegistry.is_registered(name) for name in metrics)


def test_compute_metrics_without_ground_truth():
    metrics, flags = compute_metrics(_run(30), None, sid_k=4)
    assert set(flags) == {"no_ground_truth", "too_short_for_sync", "single_window"}
    for name in ("psnr", "ssim", "fd_motion", "fd_exp", "fd_pose", "mse_exp", "mse_pose", "av_sync_corr"):
        assert metrics[name] == UNAVAILABLE
    assert metrics["continuity_ratio"] == UNAVAILABLE
    assert isinstance(metrics["motion_var"], float)


def test_build_report_averages_and_propagates_unavailable():
    per_clip = {
        "clip_a": {"psnr": 10.0, "ssim": UNAVAILABLE, "motion_var": 1.0},
        "clip_b": {"psnr": 20.0, "ssim": 0.5, "motion_var": 3.0},
    }
    report = build_report(per_clip, ["single_window", "no_ground_truth", "single_window"], "abc")
    assert report.metrics == {"motion_var": 2.0, "psnr": 15.0, "ssim": UNAVAILABLE}
    assert report.flags == ["no_ground_truth", "single_window"]
    assert EvalReport.parse_raw(report.json()) == report


def test_report_rejects_unknown_and_non_finite_metrics():
    with pytest.raises(ValidationError):
        EvalReport(metrics={"bleu": 1.0}, config_hash="abc")
    with pytest.raises(ValidationError):
        EvalReport(metrics={"psnr": float("nan")}, config_hash="abc")
    with pytest.raises(ValidationError):
        EvalReport(metrics={"psnr": "n/a"}, config_hash="abc")
