"""Deterministic 2D planar dual-arm world with three coordination tasks.

Point end-effectors under direct velocity control; no contact physics. The
handover task is made structurally bimanual by disjoint reachable half-planes
with a shared overlap zone around x = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TASKS = ("dual_reach", "handover", "bar_lift")
TASK_IDS = {t: i for i, t in enumerate(TASKS)}

A_MAX = 0.1            # per-step delta clip
GRASP_RADIUS = 0.05    # tight enough that grasping needs precise perception
GRIP_THRESHOLD = 0.5
LEFT_X_LIMIT = 0.2     # handover: left arm cannot pass this
RIGHT_X_LIMIT = -0.2   # handover: right arm cannot pass this
BAR_TILT_LIMIT_DEG = 15.0
ACTION_DIM = 6         # [dx_l, dy_l, grip_l, dx_r, dy_r, grip_r]


@dataclass(frozen=True)
class TaskSpec:
    task: str = "dual_reach"
    t_max: int = 120
    eps_pos: float = 0.08
    noise_std: float = 0.0175
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.t_max > 200:
            raise ValueError(f"t_max {self.t_max} exceeds the 200-step cap")
        if self.eps_pos <= 0:
            raise ValueError("eps_pos must be positive")


@dataclass
class WorldObject:
    pos: np.ndarray
    radius: float = 0.06
    held_by: str = "none"   # none | left | right


@dataclass
class WorldState:
    task: str
    left_ee: np.ndarray
    right_ee: np.ndarray
    left_grip: float
    right_grip: float
    objects: list[WorldObject]
    targets: dict[str, np.ndarray]
    step_count: int = 0
    done: bool = False
    success: bool = False

    def copy(self) -> "WorldState":
        return WorldState(
            task=self.task,
            left_ee=self.left_ee.copy(),
            right_ee=self.right_ee.copy(),
            left_grip=self.left_grip,
            right_grip=self.right_grip,
            objects=[WorldObject(o.pos.copy(), o.radius, o.held_by) for o in self.objects],
            targets={k: v.copy() for k, v in self.targets.items()},
            step_count=self.step_count,
            done=self.done,
            success=self.success,
        )


def _uniform(rng, lo, hi):
    return np.array([rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1])],
                    dtype=np.float64)


def reset_state(spec: TaskSpec, seed: int) -> WorldState:
    """Deterministic initial state for (spec, seed)."""
    rng = np.random.default_rng([seed, TASK_IDS[spec.task], 101])
    if spec.task == "dual_reach":
        left = _uniform(rng, (-0.8, -0.3), (-0.3, 0.3))
        right = _uniform(rng, (0.3, -0.3), (0.8, 0.3))
        while True:
            t_left = _uniform(rng, (-0.9, -0.7), (-0.1, 0.7))
            t_right = _uniform(rng, (0.1, -0.7), (0.9, 0.7))
            if np.linalg.norm(t_left - t_right) >= 0.5:
                break
        return WorldState(spec.task, left, right, 0.0, 0.0, [],
                          {"left": t_left, "right": t_right})
    if spec.task == "handover":
        left = _uniform(rng, (-0.8, -0.3), (-0.4, 0.3))
        right = _uniform(rng, (0.4, -0.3), (0.8, 0.3))
        obj = WorldObject(_uniform(rng, (-0.85, -0.5), (-0.35, 0.5)))
        goal = _uniform(rng, (0.45, -0.5), (0.85, 0.5))
        return WorldState(spec.task, left, right, 0.0, 0.0, [obj], {"goal": goal})
    # bar_lift: two linked endpoints starting level, targets straight above
    y0 = rng.uniform(-0.6, -0.2)
    lift = rng.uniform(0.5, 0.8)
    half = 0.3
    e0 = WorldObject(np.array([-half, y0]))
    e1 = WorldObject(np.array([half, y0]))
    left = _uniform(rng, (-half - 0.15, -0.85), (-half + 0.15, y0 - 0.1))
    right = _uniform(rng, (half - 0.15, -0.85), (half + 0.15, y0 - 0.1))
    targets = {"left": np.array([-half, y0 + lift]), "right": np.array([half, y0 + lift])}
    return WorldState(spec.task, left, right, 0.0, 0.0, [e0, e1], targets)


def clip_action(action: np.ndarray) -> np.ndarray:
    a = np.asarray(action, dtype=np.float64).copy()
    a[[0, 1, 3, 4]] = np.clip(a[[0, 1, 3, 4]], -A_MAX, A_MAX)
    a[[2, 5]] = np.clip(a[[2, 5]], 0.0, 1.0)
    return a


def _clamp_ee(task: str, side: str, pos: np.ndarray) -> np.ndarray:
    pos = np.clip(pos, -1.0, 1.0)
    if task == "handover":
        if side == "left":
            pos[0] = min(pos[0], LEFT_X_LIMIT)
        else:
            pos[0] = max(pos[0], RIGHT_X_LIMIT)
    return pos


def bar_tilt_deg(state: WorldState) -> float:
    d = state.objects[1].pos - state.objects[0].pos
    return abs(np.degrees(np.arctan2(abs(d[1]), abs(d[0]))))


def check_success(state: WorldState, spec: TaskSpec) -> bool:
    eps = spec.eps_pos
    if spec.task == "dual_reach":
        return (np.linalg.norm(state.left_ee - state.targets["left"]) <= eps and
                np.linalg.norm(state.right_ee - state.targets["right"]) <= eps)
    if spec.task == "handover":
        return np.linalg.norm(state.objects[0].pos - state.targets["goal"]) <= eps
    return (np.linalg.norm(state.objects[0].pos - state.targets["left"]) <= eps and
            np.linalg.norm(state.objects[1].pos - state.targets["right"]) <= eps and
            bar_tilt_deg(state) < BAR_TILT_LIMIT_DEG)


def step_state(state: WorldState, action: np.ndarray, spec: TaskSpec) -> WorldState:
    """Advance one step; invalid action components are clipped, never rejected."""
    if state.done:
        return state
    s = state.copy()
    a = clip_action(action)
    s.left_ee = _clamp_ee(s.task, "left", s.left_ee + a[0:2])
    s.right_ee = _clamp_ee(s.task, "right", s.right_ee + a[3:5])
    s.left_grip = float(a[2])
    s.right_grip = float(a[5])

    # releases first, then held objects track, then new grasps
    for side, grip in (("left", s.left_grip), ("right", s.right_grip)):
        if grip <= GRIP_THRESHOLD:
            for obj in s.objects:
                if obj.held_by == side:
                    obj.held_by = "none"
    for obj in s.objects:
        if obj.held_by == "left":
            obj.pos = s.left_ee.copy()
        elif obj.held_by == "right":
            obj.pos = s.right_ee.copy()
    for side, ee, grip in (("left", s.left_ee, s.left_grip),
                           ("right", s.right_ee, s.right_grip)):
        if grip > GRIP_THRESHOLD and not any(o.held_by == side for o in s.objects):
            candidates = [(np.linalg.norm(o.pos - ee), i) for i, o in enumerate(s.objects)
                          if o.held_by == "none"]
            candidates = [(d, i) for d, i in candidates if d <= GRASP_RADIUS]
            if candidates:
                _, idx = min(candidates)
                s.objects[idx].held_by = side
                s.objects[idx].pos = ee.copy()

    s.step_count += 1
    s.success = check_success(s, spec)
    s.done = s.success or s.step_count >= spec.t_max
    return s
