"""Run configuration: one flat record driving every pipeline stage."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from ..simworld import TASKS


@dataclass(frozen=True)
class RunConfig:
    # task and encoders
    task: str = "dual_reach"
    encoder_mode: str = "feature"
    # tokenization / quantization
    n_latents: int = 4            # latent tokens per arm
    codebook_size: int = 256
    token_dim: int = 32
    rvq_levels: int = 2
    beta: float = 0.25
    # horizons and diffusion
    obs_horizon: int = 1
    horizon: int = 8
    k_steps: int = 100
    ddim_steps: int = 10
    exec_horizon: int = 4
    # model sizes
    denoiser_width: int = 64
    denoiser_blocks: int = 2
    denoiser_heads: int = 4
    agg_layers: int = 2
    agg_heads: int = 4
    m_head: int = 4
    # training
    epochs_per_phase: int = 200
    steps_per_epoch: int = 16   # optimizer steps per epoch; 0 = one full pass
    batch_size: int = 32
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    # architecture flags
    shared_mapping: bool = True
    two_stage: bool = True
    use_latent_tokens: bool = True

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.obs_horizon != 1:
            raise ValueError("only a single-snapshot observation horizon is supported")
        if self.use_latent_tokens and self.n_latents < 1:
            raise ValueError("n_latents must be >= 1 when latent tokens are enabled")
        if not self.use_latent_tokens and self.n_latents != 0:
            raise ValueError("set n_latents = 0 when latent tokens are disabled")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)
