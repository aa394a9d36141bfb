"""Training, evaluation, and ablation orchestration."""

from .ablate import axis_variants, paired_seed_wins, run_ablation, train_variant, write_ablation
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import ChunkDataset
from .evaluate import (
    build_report,
    evaluate_checkpoint,
    run_episode,
    run_expert_episode,
    run_random_episode,
    worker_count,
    write_report,
)
from .model import CubicModel, obs_to_batch
from .optim import AdamW, cosine_lr_scale
from .train import MODES, generate_demos, train

__all__ = [
    "AdamW",
    "ChunkDataset",
    "CubicModel",
    "MODES",
    "RunConfig",
    "axis_variants",
    "build_report",
    "cosine_lr_scale",
    "evaluate_checkpoint",
    "generate_demos",
    "load_checkpoint",
    "obs_to_batch",
    "paired_seed_wins",
    "run_ablation",
    "run_episode",
    "run_expert_episode",
    "run_random_episode",
    "save_checkpoint",
    "train",
    "train_variant",
    "worker_count",
    "write_ablation",
    "write_report",
]
