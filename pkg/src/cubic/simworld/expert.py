"""Scripted waypoint experts: proportional control with task state machines."""

from __future__ import annotations

import numpy as np

from .world import A_MAX, GRASP_RADIUS, TaskSpec, WorldState

_HANDOVER_POINT = np.array([0.0, 0.0])
_RIGHT_WAIT = np.array([0.11, 0.0])
_LEFT_RETREAT = np.array([-0.5, 0.0])


def _toward(src: np.ndarray, dst: np.ndarray, gain: float = 0.7) -> np.ndarray:
    # sub-unity gain: geometric slowdown near the waypoint smooths the
    # cloned velocity profile instead of bang-stop
    return np.clip(gain * (dst - src), -A_MAX, A_MAX)


def expert_action(spec: TaskSpec, state: WorldState) -> np.ndarray:
    """One expert control step derived purely from the current state."""
    a = np.zeros(6, dtype=np.float64)
    if spec.task == "dual_reach":
        a[0:2] = _toward(state.left_ee, state.targets["left"])
        a[3:5] = _toward(state.right_ee, state.targets["right"])
        return a

    if spec.task == "handover":
        obj = state.objects[0]
        goal = state.targets["goal"]
        if obj.held_by == "right":
            a[3:5] = _toward(state.right_ee, goal)
            a[5] = 1.0
            a[0:2] = _toward(state.left_ee, _LEFT_RETREAT)
        elif obj.held_by == "left":
            a[0:2] = _toward(state.left_ee, _HANDOVER_POINT)
            a[2] = 1.0
            a[3:5] = _toward(state.right_ee, _RIGHT_WAIT)
            at_point = np.linalg.norm(state.left_ee - _HANDOVER_POINT) < 0.03
            right_close = np.linalg.norm(state.right_ee - state.left_ee) < 0.15
            if at_point and right_close:
                a[2] = 0.0  # release for the right arm
        else:
            if obj.pos[0] < -0.15:
                # object still deep on the left side: left fetches
                a[0:2] = _toward(state.left_ee, obj.pos)
                if np.linalg.norm(state.left_ee - obj.pos) < GRASP_RADIUS * 0.8:
                    a[2] = 1.0
                a[3:5] = _toward(state.right_ee, _RIGHT_WAIT)
            else:
                # object in the overlap zone: right picks it up
                a[3:5] = _toward(state.right_ee, obj.pos)
                if np.linalg.norm(state.right_ee - obj.pos) < GRASP_RADIUS * 0.8:
                    a[5] = 1.0
                a[0:2] = _toward(state.left_ee, _LEFT_RETREAT)
        return a

    # bar_lift
    e0, e1 = state.objects
    held0 = e0.held_by == "left"
    held1 = e1.held_by == "right"
    if not (held0 and held1):
        if not held0:
            a[0:2] = _toward(state.left_ee, e0.pos)
            if np.linalg.norm(state.left_ee - e0.pos) < GRASP_RADIUS * 0.8:
                a[2] = 1.0
        else:
            a[2] = 1.0  # hold position and grip until the other arm is ready
        if not held1:
            a[3:5] = _toward(state.right_ee, e1.pos)
            if np.linalg.norm(state.right_ee - e1.pos) < GRASP_RADIUS * 0.8:
                a[5] = 1.0
        else:
            a[5] = 1.0
        return a
    a[0:2] = _toward(state.left_ee, state.targets["left"])
    a[3:5] = _toward(state.right_ee, state.targets["right"])
    a[2] = 1.0
    a[5] = 1.0
    return a
