"""Even split of bimanual trajectories along the action dimension."""

from __future__ import annotations

import numpy as np


def split_arms(actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(..., H, A) -> left (..., H, A/2) and right halves; A must be even."""
    a_total = actions.shape[-1]
    if a_total % 2 != 0:
        raise ValueError(f"split_arms: action dimension {a_total} is odd")
    half = a_total // 2
    return actions[..., :half], actions[..., half:]


def merge_arms(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Inverse of split_arms; concatenates along the action dimension."""
    if left.shape != right.shape:
        raise ValueError(f"merge_arms: halves differ {left.shape} vs {right.shape}")
    return np.concatenate([left, right], axis=-1)
