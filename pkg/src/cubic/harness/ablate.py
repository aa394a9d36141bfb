"""Ablation axes: shared mapping, two-stage training, latent-token capacity."""

from __future__ import annotations

import json
import os

import numpy as np

from .config import RunConfig
from .evaluate import evaluate_checkpoint
from .train import train

AXES = ("shared_mapping", "two_stage", "latents_and_K")


def axis_variants(axis: str, base: RunConfig) -> list[tuple[str, RunConfig]]:
    if axis == "shared_mapping":
        return [("full", base.replace(shared_mapping=True)),
                ("independent_codebooks", base.replace(shared_mapping=False))]
    if axis == "two_stage":
        return [("two_stage", base.replace(two_stage=True)),
                ("end_to_end", base.replace(two_stage=False))]
    if axis == "latents_and_K":
        return [
            ("N0_K256", base.replace(n_latents=0, codebook_size=256,
                                     use_latent_tokens=False)),
            ("N4_K256", base.replace(n_latents=4, codebook_size=256,
                                     use_latent_tokens=True)),
            ("N8_K512", base.replace(n_latents=8, codebook_size=512,
                                     use_latent_tokens=True)),
        ]
    raise ValueError(f"unknown ablation axis {axis!r}; expected one of {AXES}")


def train_variant(cfg: RunConfig, demos_dir: str, work_dir: str,
                  episodes: int = 50, seeds: tuple[int, ...] = (0, 1, 2),
                  epochs: int | None = None, eval_t_max: int = 160) -> dict:
    """Train one configuration (two-stage or end-to-end) and evaluate it."""
    os.makedirs(work_dir, exist_ok=True)
    metrics = os.path.join(work_dir, "metrics.jsonl")
    if cfg.two_stage:
        ck1 = os.path.join(work_dir, "phase1")
        ck2 = os.path.join(work_dir, "phase2")
        train(cfg, "phase1", demos_dir, ck1, metrics_path=metrics, epochs=epochs)
        train(cfg, "phase2", demos_dir, ck2, init_from=ck1,
              metrics_path=metrics, epochs=epochs)
        final = ck2
    else:
        final = os.path.join(work_dir, "end_to_end")
        train(cfg, "end_to_end", demos_dir, final, metrics_path=metrics, epochs=epochs)
    report = evaluate_checkpoint(final, episodes=episodes, seeds=seeds,
                                 t_max=eval_t_max)
    return {"checkpoint": final, "eval": report}


def run_ablation(axis: str, base: RunConfig, demos_dir: str, work_dir: str,
                 episodes: int = 50, seeds: tuple[int, ...] = (0, 1, 2),
                 epochs: int | None = None) -> dict:
    rows = []
    for name, cfg in axis_variants(axis, base):
        result = train_variant(cfg, demos_dir, os.path.join(work_dir, name),
                               episodes=episodes, seeds=seeds, epochs=epochs)
        rows.append({"variant": name, "config": cfg.to_json(), "eval": result["eval"]})
    return {"axis": axis, "base_config": base.to_json(), "rows": rows}


def write_ablation(path: str, table: dict) -> None:
    with open(path, "w") as fh:
        json.dump(table, fh, indent=1, sort_keys=True)
        fh.write("\n")


def paired_seed_wins(report_a: dict, report_b: dict) -> int:
    """How many seeds have rate_a >= rate_b (ties count as wins for a)."""
    return int(sum(a >= b for a, b in zip(report_a["per_seed"], report_b["per_seed"])))
