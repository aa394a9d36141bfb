"""Demo generation and the two-phase (or end-to-end) training loops."""

from __future__ import annotations

import json
import time

import numpy as np

from ..coordination import codebook_stats, reinit_dead_codes
from ..simworld import EpisodeRecord, TaskSpec, expert_action, reset, save_dataset
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import ChunkDataset
from .model import CubicModel
from .optim import AdamW, cosine_lr_scale

MODES = ("phase1", "phase2", "end_to_end")
_MODE_IDS = {m: i for i, m in enumerate(MODES)}


def generate_demos(task: str, count: int, seed: int, out_dir: str,
                   t_max: int = 160, noise_std: float = 0.0175) -> dict:
    """Roll the scripted expert until `count` successful episodes are stored."""
    spec = TaskSpec(task=task, t_max=t_max, noise_std=noise_std)
    episodes: list[EpisodeRecord] = []
    attempt = 0
    while len(episodes) < count:
        env, obs = reset(spec, seed * 100_003 + attempt)
        rec = EpisodeRecord()
        while not env.state.done:
            action = expert_action(spec, env.state)
            rec.append(obs, action)
            obs, _, _ = env.step(action)
        rec.success = env.state.success
        attempt += 1
        if rec.success:
            episodes.append(rec)
        if attempt > max(20, count * 10):
            raise RuntimeError(f"expert succeeded only {len(episodes)}/{count} "
                               f"times in {attempt} attempts")
    save_dataset(out_dir, spec, seed, episodes)
    return {"task": task, "episodes": len(episodes), "attempts": attempt,
            "steps": int(sum(len(e) for e in episodes))}


def _append_metrics(path: str | None, row: dict) -> None:
    if path is None:
        return
    with open(path, "a") as fh:
        fh.write(json.dumps(row, sort_keys=True) + "\n")


def _init_model(cfg: RunConfig, mode: str, init_from: str | None) -> CubicModel:
    if mode == "phase2":
        if init_from is None:
            raise ValueError("phase2 requires a phase-1 checkpoint (init_from)")
        model, _, meta = load_checkpoint(init_from)
        if meta["phase"] != 1:
            raise ValueError(f"init checkpoint is phase {meta['phase']}, expected 1")
        if model.cfg != cfg:
            raise ValueError("config does not match the phase-1 checkpoint")
        model.merge_for_phase2()
        return model
    return CubicModel(cfg, np.random.default_rng(cfg.seed),
                      phase=1 if mode == "phase1" else 2)


def train(cfg: RunConfig, mode: str, demos_dir: str, out_checkpoint: str,
          init_from: str | None = None, metrics_path: str | None = None,
          epochs: int | None = None, resume_from: str | None = None,
          stop_after_epochs: int | None = None) -> CubicModel:
    """Train one phase and write a checkpoint archive.

    phase1/end_to_end start fresh (disjoint vs merged denoiser); phase2 loads
    the phase-1 checkpoint, merges its self-attention stacks, freezes all
    perception and codebook tensors, and trains only the denoiser. Epoch RNG
    streams are keyed by (seed, mode, epoch), so resuming from a checkpoint
    replays the remaining epochs bitwise.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    data = ChunkDataset(demos_dir, cfg.horizon)
    if len(data) == 0:
        raise ValueError(f"no training samples in {demos_dir}")

    start_epoch = 0
    opt_arrays: dict | None = None
    opt_step = 0
    if resume_from is not None:
        model, arrays, meta = load_checkpoint(resume_from)
        if meta.get("mode") != mode:
            raise ValueError(f"resume checkpoint was trained in mode {meta.get('mode')!r}")
        start_epoch = meta["epochs_done"]
        opt_arrays = arrays
        opt_step = meta.get("optimizer_step", 0)
    else:
        model = _init_model(cfg, mode, init_from)
    model.action_stats = data.stats

    params = model.trainable_params(mode)
    optimizer = AdamW(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    if opt_arrays is not None:
        optimizer.load_state_arrays(opt_arrays, opt_step)
    n_epochs = cfg.epochs_per_phase if epochs is None else epochs
    n_samples = len(data)
    full_pass = max(1, int(np.ceil(n_samples / cfg.batch_size)))
    steps_per_epoch = min(cfg.steps_per_epoch, full_pass) if cfg.steps_per_epoch else full_pass
    total_steps = n_epochs * steps_per_epoch
    train_codebooks = mode != "phase2"

    # stop_after_epochs pauses a run without shortening the LR-decay horizon,
    # so a stopped-then-resumed run replays the full run exactly
    end_epoch = n_epochs if stop_after_epochs is None else min(stop_after_epochs, n_epochs)
    step = start_epoch * steps_per_epoch
    epoch_rng = np.random.default_rng([cfg.seed, _MODE_IDS[mode], 0, 29])
    for epoch in range(start_epoch, end_epoch):
        epoch_rng = np.random.default_rng([cfg.seed, _MODE_IDS[mode], epoch, 29])
        perm = epoch_rng.permutation(n_samples)[:steps_per_epoch * cfg.batch_size]
        sums = {"total": 0.0, "diff_left": 0.0, "diff_right": 0.0, "vq": 0.0}
        t0 = time.monotonic()
        for lo in range(0, len(perm), cfg.batch_size):
            batch = data.batch(perm[lo:lo + cfg.batch_size])
            losses = model.forward_losses(batch, epoch_rng, mode)
            optimizer.zero_grad()
            losses["total"].backward()
            optimizer.step(lr_scale=cosine_lr_scale(step, total_steps))
            if train_codebooks:
                model.books.pin_zero_entry()
            for key in sums:
                sums[key] += losses[key].item()
            step += 1
        stats = codebook_stats(model.books)
        if train_codebooks:
            reinit_dead_codes(model.books, epoch_rng)  # also clears usage
        model.books.reset_usage()
        _append_metrics(metrics_path, {
            "phase": mode,
            "epoch": epoch,
            "losses": {k: sums[k] / steps_per_epoch for k in sums},
            "codebook_perplexity": stats["perplexity"],
            "codebook_usage": stats["usage"],
            "wall_clock_s": round(time.monotonic() - t0, 4),
        })

    save_checkpoint(out_checkpoint, model, optimizer, epoch_rng,
                    extra_meta={"mode": mode, "epochs_done": end_epoch})
    return model
