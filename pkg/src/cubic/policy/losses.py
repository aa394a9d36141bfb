"""Diffusion training objectives and the two-phase combiners."""

from __future__ import annotations

import numpy as np

from .. import numerics as nm
from ..numerics import Tensor
from .schedule import NoiseSchedule, forward_diffuse


def sample_diffusion_batch(a0: np.ndarray, sched: NoiseSchedule,
                           rng: np.random.Generator):
    """Draw (k, eps, a_k) for a batch of clean trajectories (B, H, A)."""
    bsz = a0.shape[0]
    k = rng.integers(1, sched.k_steps + 1, size=bsz)
    eps = rng.standard_normal(a0.shape).astype(np.float32)
    a_k = forward_diffuse(a0, k, eps, sched).astype(np.float32)
    return k, eps, a_k


def diffusion_loss(eps_hat: Tensor, eps: np.ndarray) -> Tensor:
    """Mean squared error between predicted and true noise."""
    diff = nm.sub(eps_hat, Tensor(eps))
    return nm.mean(nm.mul(diff, diff))


def phase1_loss(l_diff_left: Tensor, l_vq: Tensor, l_diff_right: Tensor,
                weights: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> Tensor:
    """Pre-training objective: left diffusion + VQ + right diffusion."""
    out = nm.scale(l_diff_left, weights[0])
    out = nm.add(out, nm.scale(l_vq, weights[1]))
    return nm.add(out, nm.scale(l_diff_right, weights[2]))


def phase2_loss(l_diff_left: Tensor, l_diff_right: Tensor,
                weights: tuple[float, float] = (1.0, 1.0)) -> Tensor:
    """Post-training objective: the two diffusion terms only."""
    return nm.add(nm.scale(l_diff_left, weights[0]), nm.scale(l_diff_right, weights[1]))
