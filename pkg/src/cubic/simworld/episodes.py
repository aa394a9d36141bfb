"""Episode rollout records and their on-disk dataset format.

A dataset directory is one tensor archive: per-field float32 blobs holding
all episodes concatenated along the step axis, with episode lengths, task,
seed, success flags and action normalization stats in the manifest meta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import load_archive, save_archive
from ..perception import Observation
from .world import ACTION_DIM, TaskSpec

FIELDS = ("head_feat", "left_wrist_feat", "right_wrist_feat",
          "left_joints", "right_joints", "actions")


@dataclass
class EpisodeRecord:
    observations: list[Observation] = field(default_factory=list)
    actions: list[np.ndarray] = field(default_factory=list)
    success: bool = False

    def append(self, obs: Observation, action: np.ndarray) -> None:
        if len(action) != ACTION_DIM:
            raise ValueError(f"action has {len(action)} dims, expected {ACTION_DIM}")
        self.observations.append(obs)
        self.actions.append(np.asarray(action, dtype=np.float32))

    def __len__(self) -> int:
        return len(self.actions)


def action_stats(actions: np.ndarray) -> dict[str, list[float]]:
    return {"min": actions.min(axis=0).tolist(), "max": actions.max(axis=0).tolist()}


def normalize_actions(actions: np.ndarray, stats: dict) -> np.ndarray:
    lo = np.asarray(stats["min"], dtype=np.float32)
    hi = np.asarray(stats["max"], dtype=np.float32)
    span = hi - lo
    safe = np.where(span < 1e-6, 1.0, span)
    out = 2.0 * (actions - lo) / safe - 1.0
    out = np.where(span < 1e-6, 0.0, out)
    return np.clip(out, -1.0, 1.0).astype(np.float32)


def denormalize_actions(norm: np.ndarray, stats: dict) -> np.ndarray:
    lo = np.asarray(stats["min"], dtype=np.float32)
    hi = np.asarray(stats["max"], dtype=np.float32)
    span = hi - lo
    out = (norm + 1.0) / 2.0 * span + lo
    return np.where(span < 1e-6, lo, out).astype(np.float32)


def save_dataset(path: str, spec: TaskSpec, seed: int,
                 episodes: list[EpisodeRecord]) -> None:
    stacked: dict[str, list[np.ndarray]] = {f: [] for f in FIELDS}
    lengths, successes = [], []
    for ep in episodes:
        lengths.append(len(ep))
        successes.append(bool(ep.success))
        for obs, act in zip(ep.observations, ep.actions):
            stacked["head_feat"].append(obs.head_feat)
            stacked["left_wrist_feat"].append(obs.left_wrist_feat)
            stacked["right_wrist_feat"].append(obs.right_wrist_feat)
            stacked["left_joints"].append(obs.left_joints)
            stacked["right_joints"].append(obs.right_joints)
            stacked["actions"].append(act)
    tensors = {}
    for f in FIELDS:
        if stacked[f]:
            tensors[f] = np.stack(stacked[f]).astype(np.float32)
        else:
            tensors[f] = np.zeros((0,), dtype=np.float32)
    if len(tensors["actions"]):
        stats = action_stats(tensors["actions"])
    else:
        stats = {"min": [0.0] * ACTION_DIM, "max": [0.0] * ACTION_DIM}
    meta = {
        "task": spec.task,
        "seed": seed,
        "t_max": spec.t_max,
        "eps_pos": spec.eps_pos,
        "noise_std": spec.noise_std,
        "episode_lengths": lengths,
        "successes": successes,
        "action_stats": stats,
    }
    save_archive(path, tensors, meta)


def load_dataset(path: str) -> tuple[dict[str, np.ndarray], dict]:
    return load_archive(path)


def dataset_episode_slices(meta: dict) -> list[slice]:
    slices = []
    start = 0
    for length in meta["episode_lengths"]:
        slices.append(slice(start, start + length))
        start += length
    return slices
