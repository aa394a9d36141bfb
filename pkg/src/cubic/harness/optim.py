"""Adaptive-moment optimizer with decoupled weight decay and cosine LR decay."""

from __future__ import annotations

import numpy as np

from ..numerics import Tensor


class AdamW:
    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 1e-4):
        self.params = dict(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr_scale: float = 1.0) -> None:
        self.t += 1
        b1, b2 = self.betas
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        # plain python float: a numpy scalar would promote f32 params to f64
        lr = float(self.lr * lr_scale)
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data = p.data - lr * (update + self.weight_decay * p.data)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for k in self.params:
            out[f"opt.m.{k}"] = self.m[k]
            out[f"opt.v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], t: int) -> None:
        self.t = t
        for k in self.params:
            if f"opt.m.{k}" in arrays:
                self.m[k] = arrays[f"opt.m.{k}"].astype(np.float32)
                self.v[k] = arrays[f"opt.v.{k}"].astype(np.float32)


def cosine_lr_scale(step: int, total_steps: int) -> float:
    """Cosine decay from 1 to ~0 over the training run."""
    if total_steps <= 1:
        return 1.0
    frac = min(step / max(total_steps - 1, 1), 1.0)
    return float(0.5 * (1.0 + np.cos(np.pi * frac)))
