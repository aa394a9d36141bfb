"""Cosine noise schedule, forward diffusion, and reverse-process steps.

Everything here is plain numpy: sampling never differentiates through the
schedule, and training losses treat the noised trajectories as constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    k_steps: int
    alpha_bar: np.ndarray  # (k_steps + 1,), alpha_bar[0] == 1

    def __post_init__(self):
        if len(self.alpha_bar) != self.k_steps + 1:
            raise ValueError("alpha_bar must have k_steps + 1 entries")


def cosine_schedule(k_steps: int, s: float = 0.008, max_beta: float = 0.999) -> NoiseSchedule:
    """Squared-cosine alpha_bar table with per-step ratio floored at 0.001."""
    if k_steps < 2:
        raise ValueError(f"cosine_schedule: k_steps must be >= 2, got {k_steps}")
    k = np.arange(k_steps + 1, dtype=np.float64)
    f = np.cos(((k / k_steps + s) / (1.0 + s)) * (np.pi / 2.0)) ** 2
    raw = f / f[0]
    betas = np.clip(1.0 - raw[1:] / raw[:-1], 0.0, max_beta)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return NoiseSchedule(k_steps, alpha_bar)


def forward_diffuse(a0: np.ndarray, k, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """a_k = sqrt(ab_k) * a0 + sqrt(1 - ab_k) * eps; k may be per-sample."""
    ab = sched.alpha_bar[np.asarray(k)]
    while np.ndim(ab) < np.ndim(a0):
        ab = np.expand_dims(ab, -1)
    return np.sqrt(ab) * a0 + np.sqrt(1.0 - ab) * eps


def ddpm_reverse_step(a_k: np.ndarray, k: int, eps_hat: np.ndarray,
                      sched: NoiseSchedule, rng: np.random.Generator | None = None) -> np.ndarray:
    """One ancestral step: mean from the eps-parameterization, noise except at k=1."""
    ab_k = sched.alpha_bar[k]
    ab_prev = sched.alpha_bar[k - 1]
    mu = (a_k - np.sqrt(1.0 - ab_k) * eps_hat) / np.sqrt(ab_k)
    if k == 1 or rng is None:
        z = 0.0
    else:
        z = rng.standard_normal(a_k.shape)
    return np.sqrt(ab_prev) * mu + np.sqrt(1.0 - ab_prev) * z


def ddim_step_indices(k_steps: int, n_steps: int) -> np.ndarray:
    """Evenly spaced descending index grid from k_steps to 0 (n_steps + 1 points)."""
    if n_steps > k_steps:
        raise ValueError(f"ddim: n_steps {n_steps} exceeds k_steps {k_steps}")
    return np.round(np.linspace(k_steps, 0, n_steps + 1)).astype(int)


def ddim_sample(denoise_fn: Callable[[np.ndarray, int], np.ndarray], shape: tuple,
                sched: NoiseSchedule, n_steps: int, rng: np.random.Generator,
                x0_clip: float = 1.5) -> np.ndarray:
    """Deterministic DDIM (eta = 0) from seeded Gaussian noise.

    Each transition estimates x0 = (a_k - sqrt(1-ab_k) eps_hat)/sqrt(ab_k),
    clips it, and re-noises toward the next grid point with the same eps_hat.
    """
    ks = ddim_step_indices(sched.k_steps, n_steps)
    a = rng.standard_normal(shape).astype(np.float32)
    for i in range(n_steps):
        k, k_next = int(ks[i]), int(ks[i + 1])
        ab_k = sched.alpha_bar[k]
        ab_next = sched.alpha_bar[k_next]
        eps_hat = denoise_fn(a, k)
        x0 = (a - np.sqrt(1.0 - ab_k) * eps_hat) / np.sqrt(ab_k)
        x0 = np.clip(x0, -x0_clip, x0_clip)
        a = (np.sqrt(ab_next) * x0 + np.sqrt(1.0 - ab_next) * eps_hat).astype(np.float32)
    return a
