"""2D dual-arm environment, scripted experts, renderers, episode records."""

from __future__ import annotations

import numpy as np

from ..perception import Observation
from .episodes import (
    EpisodeRecord,
    action_stats,
    dataset_episode_slices,
    denormalize_actions,
    load_dataset,
    normalize_actions,
    save_dataset,
)
from .expert import expert_action
from .render import (
    F_HEAD,
    F_WRIST,
    J_DIM,
    M_HEAD,
    render_features,
    render_images,
)
from .world import (
    A_MAX,
    ACTION_DIM,
    GRASP_RADIUS,
    TASK_IDS,
    TASKS,
    TaskSpec,
    WorldState,
    bar_tilt_deg,
    check_success,
    clip_action,
    reset_state,
    step_state,
)


class SimEnv:
    """Stateful wrapper tying world stepping to a seeded observation stream."""

    def __init__(self, spec: TaskSpec, seed: int):
        self.spec = spec
        self.seed = seed
        self.state = reset_state(spec, seed)
        self._noise = np.random.default_rng([seed, TASK_IDS[spec.task], 777])

    def observe(self) -> Observation:
        return render_features(self.state, self.spec, self._noise)

    def step(self, action: np.ndarray):
        self.state = step_state(self.state, action, self.spec)
        return self.observe(), self.state.done, self.state.success


def reset(spec: TaskSpec, seed: int) -> tuple[SimEnv, Observation]:
    env = SimEnv(spec, seed)
    return env, env.observe()


__all__ = [
    "A_MAX",
    "ACTION_DIM",
    "EpisodeRecord",
    "F_HEAD",
    "F_WRIST",
    "GRASP_RADIUS",
    "J_DIM",
    "M_HEAD",
    "Observation",
    "SimEnv",
    "TASKS",
    "TASK_IDS",
    "TaskSpec",
    "WorldState",
    "action_stats",
    "bar_tilt_deg",
    "check_success",
    "clip_action",
    "dataset_episode_slices",
    "denormalize_actions",
    "expert_action",
    "load_dataset",
    "normalize_actions",
    "render_features",
    "render_images",
    "reset",
    "reset_state",
    "save_dataset",
    "step_state",
]
