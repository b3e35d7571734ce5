""" Analytic face renderer """

import colorsys
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .behavior import FaceParams, FaceTrack

IMAGE_SIZE = 64
N_LANDMARKS = 32
CONTOUR_INDEX_SET = tuple(range(16))
EYE_LEFT = (16, 17)
EYE_RIGHT = (18, 19)
BROW_INDEX_SET = (20, 21, 22, 23)
MOUTH_INDEX_SET = (24, 25, 26, 27)
NOSE_CHIN_INDEX_SET = (28, 29, 30, 31)

# geometry in normalized image units
HEAD_RADIUS = 0.24
POSE_SHIFT = 0.25
EYE_HALF_W = 0.045
EYE_HALF_H = 0.03
BROW_GAP = 0.05
BROW_LIFT = 0.03
BROW_THICKNESS = 0.012
MOUTH_HALF_H = 0.06
MOUTH_HALF_W = (0.04, 0.05)

BACKGROUND = np.array([0.12, 0.12, 0.14])
EYE_COLOR = np.array([0.08, 0.08, 0.10])
BROW_COLOR = np.array([0.18, 0.12, 0.08])
MOUTH_COLOR = np.array([0.55, 0.12, 0.15])


@dataclass(frozen=True, eq=False)
class RenderedFrame:
    pixels: np.ndarray
    landmarks: np.ndarray
    contour_index_set: Tuple[int, ...] = CONTOUR_INDEX_SET


def _layout(params: FaceParams):
    """ Head center, semi-axes, rotation and feature anchors in head-local units """
    identity = params.identity
    center = np.array([0.5 + POSE_SHIFT * params.yaw, 0.5 + POSE_SHIFT * params.pitch])
    axis_x = HEAD_RADIUS
    axis_y = HEAD_RADIUS * identity.head_aspect
    cos_r, sin_r = np.cos(params.roll), np.sin(params.roll)
    rotation = np.array([[cos_r, -sin_r], [sin_r, cos_r]])
    eye_dx = identity.eye_spacing * HEAD_RADIUS
    eye_y = -0.25 * axis_y
    mouth_y = 0.42 * axis_y
    return center, axis_x, axis_y, rotation, eye_dx, eye_y, mouth_y


def face_landmarks(params: FaceParams) -> np.ndarray:
    """ The 32 analytic landmarks (x, y) in [0, 1] image coordinates """
    center, axis_x, axis_y, rotation, eye_dx, eye_y, mouth_y = _layout(params)
    angles = np.pi / 2 + 2.0 * np.pi * np.arange(16) / 16
    boundary = np.stack([axis_x * np.cos(angles), axis_y * np.sin(angles)], axis=1)
    eyes = np.array([
        [-eye_dx - EYE_HALF_W, eye_y], [-eye_dx + EYE_HALF_W, eye_y],
        [eye_dx - EYE_HALF_W, eye_y], [eye_dx + EYE_HALF_W, eye_y],
    ])
    brow_y = eye_y - BROW_GAP - BROW_LIFT * params.brow_raise
    brows = np.array([
        [-eye_dx - EYE_HALF_W, brow_y], [-eye_dx + EYE_HALF_W, brow_y],
        [eye_dx - EYE_HALF_W, brow_y], [eye_dx + EYE_HALF_W, brow_y],
    ])
    half_w = MOUTH_HALF_W[0] + MOUTH_HALF_W[1] * params.mouth_width
    half_h = MOUTH_HALF_H * params.mouth_open
    mouth = np.array([
        [-half_w, mouth_y], [half_w, mouth_y],
        [0.0, mouth_y - half_h], [0.0, mouth_y + half_h],
    ])
    nose_chin = np.array([
        [0.0, 0.10 * axis_y], [-0.025, 0.15 * axis_y],
        [0.025, 0.15 * axis_y], [0.0, 0.92 * axis_y],
    ])
    local = np.concatenate([boundary, eyes, brows, mouth, nose_chin], axis=0)
    return center[None, :] + local @ rotation.T


def _coverage(signed_distance: np.ndarray, pixel: float) -> np.ndarray:
    """ Soft edge: signed distance (positive inside) to [0, 1] coverage """
    return np.clip(signed_distance / pixel + 0.5, 0.0, 1.0)


def _ellipse(local_x, local_y, cx, cy, ax, ay, pixel):
    ax = max(ax, 0.25 * pixel)
    ay = max(ay, 0.25 * pixel)
    radius = np.sqrt(((local_x - cx) / ax) ** 2 + ((local_y - cy) / ay) ** 2)
    return _coverage((1.0 - radius) * min(ax, ay), pixel)


def _segment(local_x, local_y, start, stop, thickness, pixel):
    start = np.asarray(start)
    direction = np.asarray(stop) - start
    t = ((local_x - start[0]) * direction[0] + (local_y - start[1]) * direction[1]) / (direction @ direction)
    t = np.clip(t, 0.0, 1.0)
    dist = np.hypot(local_x - start[0] - t * direction[0], local_y - start[1] - t * direction[1])
    return _coverage(thickness - dist, pixel)


def _paint(canvas: np.ndarray, alpha: np.ndarray, color: np.ndarray) -> None:
    canvas *= 1.0 - alpha[..., None]
    canvas += alpha[..., None] * color[None, None, :]


def render_face(params: FaceParams, size: int = IMAGE_SIZE) -> RenderedFrame:
    """ Deterministic rasterization of one face; raises ParameterError out of range """
    params.validate()
    center, axis_x, axis_y, rotation, eye_dx, eye_y, mouth_y = _layout(params)
    pixel = 1.0 / size
    coords = (np.arange(size) + 0.5) / size
    grid_x, grid_y = np.meshgrid(coords, coords)
    # image -> head-local frame (inverse roll)
    offset_x, offset_y = grid_x - center[0], grid_y - center[1]
    local_x = rotation[0, 0] * offset_x + rotation[1, 0] * offset_y
    local_y = rotation[0, 1] * offset_x + rotation[1, 1] * offset_y
    #
    skin = np.array(colorsys.hsv_to_rgb(params.identity.hue, 0.45, 0.9))
    canvas = np.broadcast_to(BACKGROUND, (size, size, 3)).copy()
    _paint(canvas, _ellipse(local_x, local_y, 0.0, 0.0, axis_x, axis_y, pixel), skin)
    #
    brow_y = eye_y - BROW_GAP - BROW_LIFT * params.brow_raise
    for side in (-1.0, 1.0):
        brow = _segment(
            local_x, local_y,
            (side * eye_dx - EYE_HALF_W, brow_y), (side * eye_dx + EYE_HALF_W, brow_y),
            BROW_THICKNESS, pixel,
        )
        _paint(canvas, brow, BROW_COLOR)
    for side, openness in ((-1.0, params.eye_open_l), (1.0, params.eye_open_r)):
        eye = _ellipse(local_x, local_y, side * eye_dx, eye_y, EYE_HALF_W, EYE_HALF_H * openness, pixel)
        _paint(canvas, eye, EYE_COLOR)
    #
    half_w = MOUTH_HALF_W[0] + MOUTH_HALF_W[1] * params.mouth_width
    mouth = _ellipse(local_x, local_y, 0.0, mouth_y, half_w, MOUTH_HALF_H * params.mouth_open, pixel)
    _paint(canvas, mouth, MOUTH_COLOR)
    #
    return RenderedFrame(
        pixels=np.clip(canvas, 0.0, 1.0).astype(np.float32),
        landmarks=face_landmarks(params),
    )


def render_track(track: FaceTrack, size: int = IMAGE_SIZE) -> Tuple[np.ndarray, np.ndarray]:
    """ Render a whole clip: (n, size, size, 3) float32 pixels, (n, 32, 2) landmarks """
    frames = [render_face(track[index], size) for index in range(len(track))]
    pixels = np.stack([frame.pixels for frame in frames])
    landmarks = np.stack([frame.landmarks for frame in frames])
    return pixels, landmarks
