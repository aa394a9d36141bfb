"""Demo dataset loading and H-step action-chunk batches."""

from __future__ import annotations

import numpy as np

from ..simworld import dataset_episode_slices, load_dataset, normalize_actions


class ChunkDataset:
    """Per-step observations paired with normalized future action chunks.

    Chunks past the episode end are padded by repeating the final action
    (the expert idles at the goal), matching receding-horizon execution.
    """

    def __init__(self, path: str, horizon: int):
        tensors, meta = load_dataset(path)
        self.meta = meta
        self.horizon = horizon
        self.stats = meta["action_stats"]
        self.fields = {k: tensors[k] for k in
                       ("head_feat", "left_wrist_feat", "right_wrist_feat",
                        "left_joints", "right_joints")}
        self.actions = normalize_actions(tensors["actions"], self.stats)
        # normalized value of a zero position delta, per delta dimension
        zero6 = normalize_actions(np.zeros((1, 6), dtype=np.float32), self.stats)[0]
        self.zero_delta = zero6[[0, 1, 3, 4]]
        self.episodes = dataset_episode_slices(meta)
        self.index: list[tuple[int, int]] = []
        for ep, sl in enumerate(self.episodes):
            for t in range(sl.stop - sl.start):
                self.index.append((ep, t))

    def __len__(self) -> int:
        return len(self.index)

    def chunk(self, ep: int, t: int) -> np.ndarray:
        sl = self.episodes[ep]
        ep_actions = self.actions[sl]
        end = min(t + self.horizon, len(ep_actions))
        chunk = ep_actions[t:end]
        if len(chunk) < self.horizon:
            # past the episode end: hold position, keep the final grip command
            hold = chunk[-1].copy()
            hold[[0, 1, 3, 4]] = self.zero_delta
            pad = np.repeat(hold[None], self.horizon - len(chunk), axis=0)
            chunk = np.concatenate([chunk, pad], axis=0)
        return chunk

    def batch(self, idxs: np.ndarray) -> dict[str, np.ndarray]:
        rows = [self.index[i] for i in idxs]
        flat = np.array([self.episodes[ep].start + t for ep, t in rows])
        out = {k: v[flat] for k, v in self.fields.items()}
        out["actions"] = np.stack([self.chunk(ep, t) for ep, t in rows])
        return out
