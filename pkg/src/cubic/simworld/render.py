"""Feature and image renderers standing in for the three-camera rig."""

from __future__ import annotations

import numpy as np

from ..perception import Observation
from .world import TASK_IDS, TaskSpec, WorldState

M_HEAD = 4
F_HEAD = 8
F_WRIST = 8
J_DIM = 3
WRIST_FOV = 0.4
IMAGE_SIZE = 32

_HELD_CODE = {"none": 0.0, "left": -1.0, "right": 1.0}


def _task_targets(state: WorldState) -> tuple[np.ndarray, np.ndarray]:
    if state.task == "handover":
        return state.targets["goal"], np.zeros(2)
    return state.targets["left"], state.targets["right"]


def render_features(state: WorldState, spec: TaskSpec,
                    noise_rng: np.random.Generator | None = None) -> Observation:
    """Head tokens linearly encode global state; wrists see nearby objects only."""
    head = np.zeros((M_HEAD, F_HEAD), dtype=np.float32)
    head[0, :6] = [state.left_ee[0], state.left_ee[1], state.left_grip,
                   state.right_ee[0], state.right_ee[1], state.right_grip]
    for i, obj in enumerate(state.objects[:2]):
        head[1, 3 * i:3 * i + 3] = [obj.pos[0], obj.pos[1], _HELD_CODE[obj.held_by]]
    head[1, 6] = float(len(state.objects))
    t_a, t_b = _task_targets(state)
    head[2, :4] = [t_a[0], t_a[1], t_b[0], t_b[1]]
    head[3, TASK_IDS[state.task]] = 1.0
    head[3, 3] = state.step_count / spec.t_max

    wrists = []
    for ee, side in ((state.left_ee, "left"), (state.right_ee, "right")):
        w = np.zeros(F_WRIST, dtype=np.float32)
        for i, obj in enumerate(state.objects[:2]):
            off = obj.pos - ee
            if np.linalg.norm(off) <= WRIST_FOV:
                w[4 * i:4 * i + 4] = [off[0], off[1], 1.0,
                                      1.0 if obj.held_by == side else 0.0]
        wrists.append(w)

    if noise_rng is not None and spec.noise_std > 0:
        head = head + noise_rng.normal(0.0, spec.noise_std, head.shape).astype(np.float32)
        wrists = [w + noise_rng.normal(0.0, spec.noise_std, w.shape).astype(np.float32)
                  for w in wrists]

    return Observation(
        head_feat=head.astype(np.float32),
        left_wrist_feat=wrists[0].astype(np.float32),
        right_wrist_feat=wrists[1].astype(np.float32),
        left_joints=np.array([state.left_ee[0], state.left_ee[1], state.left_grip],
                             dtype=np.float32),
        right_joints=np.array([state.right_ee[0], state.right_ee[1], state.right_grip],
                              dtype=np.float32),
        timestamp=state.step_count,
    )


def _draw_disc(img: np.ndarray, channel: int, center: np.ndarray, radius: float,
               value: float, origin: np.ndarray, scale: float) -> None:
    size = img.shape[-1]
    ys, xs = np.mgrid[0:size, 0:size]
    px = (xs + 0.5) / size * scale + origin[0]
    py = (ys + 0.5) / size * scale + origin[1]
    mask = (px - center[0]) ** 2 + (py - center[1]) ** 2 <= radius ** 2
    img[channel][mask] = np.maximum(img[channel][mask], value)


def _render_view(state: WorldState, origin: np.ndarray, scale: float) -> np.ndarray:
    img = np.zeros((3, IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
    t_a, t_b = _task_targets(state)
    _draw_disc(img, 0, t_a, 0.06, 0.5, origin, scale)
    _draw_disc(img, 0, t_b, 0.06, 0.5, origin, scale)
    for obj in state.objects:
        _draw_disc(img, 0, obj.pos, obj.radius, 1.0, origin, scale)
    _draw_disc(img, 1, state.left_ee, 0.05, 0.5 + 0.5 * state.left_grip, origin, scale)
    _draw_disc(img, 2, state.right_ee, 0.05, 0.5 + 0.5 * state.right_grip, origin, scale)
    return img


def render_images(state: WorldState) -> dict[str, np.ndarray]:
    """32x32 three-channel rasterizations: full-workspace head, egocentric wrists."""
    views = {"head_image": _render_view(state, np.array([-1.0, -1.0]), 2.0)}
    for side, ee in (("left", state.left_ee), ("right", state.right_ee)):
        views[f"{side}_wrist_image"] = _render_view(state, ee - 0.5, 1.0)
    return views
