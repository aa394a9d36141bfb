"""Two-stage diffusion-transformer policy over bimanual trajectories."""

from .denoiser import DenoiserConfig, denoise_eps, init_denoiser, merge_self_attention
from .losses import diffusion_loss, phase1_loss, phase2_loss, sample_diffusion_batch
from .schedule import (
    NoiseSchedule,
    cosine_schedule,
    ddim_sample,
    ddim_step_indices,
    ddpm_reverse_step,
    forward_diffuse,
)
from .trajectory import merge_arms, split_arms

__all__ = [
    "DenoiserConfig",
    "NoiseSchedule",
    "cosine_schedule",
    "ddim_sample",
    "ddim_step_indices",
    "ddpm_reverse_step",
    "denoise_eps",
    "diffusion_loss",
    "forward_diffuse",
    "init_denoiser",
    "merge_arms",
    "merge_self_attention",
    "phase1_loss",
    "phase2_loss",
    "sample_diffusion_batch",
    "split_arms",
]
