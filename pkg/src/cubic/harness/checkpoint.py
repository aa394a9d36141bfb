"""Self-describing checkpoint archives: tensors + config + phase + RNG state."""

from __future__ import annotations

import json

import numpy as np

from ..numerics import load_archive, save_archive
from .config import RunConfig
from .model import CubicModel
from .optim import AdamW


def rng_state_to_json(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return json.loads(json.dumps(state))  # plain dict of ints/strings


def rng_from_state(state: dict) -> np.random.Generator:
    bg = getattr(np.random, state["bit_generator"])()
    bg.state = state
    return np.random.Generator(bg)


def save_checkpoint(path: str, model: CubicModel, optimizer: AdamW | None = None,
                    rng: np.random.Generator | None = None,
                    extra_meta: dict | None = None) -> None:
    tensors = dict(model.state_arrays())
    meta = {
        "config": model.cfg.to_json(),
        "phase": model.phase,
        "action_stats": model.action_stats,
        "codebook_usage": [u.tolist() for u in model.books.usage],
    }
    if optimizer is not None:
        tensors.update(optimizer.state_arrays())
        meta["optimizer_step"] = optimizer.t
    if rng is not None:
        meta["rng_state"] = rng_state_to_json(rng)
    if extra_meta:
        meta.update(extra_meta)
    save_archive(path, tensors, meta)


def load_checkpoint(path: str) -> tuple[CubicModel, dict[str, np.ndarray], dict]:
    """Rebuild the model from an archive; no external config needed."""
    arrays, meta = load_archive(path)
    cfg = RunConfig.from_json(meta["config"])
    model = CubicModel(cfg, np.random.default_rng(cfg.seed), phase=meta["phase"])
    model.load_state_arrays(arrays)
    model.action_stats = meta.get("action_stats")
    usage = meta.get("codebook_usage")
    if usage:
        for lv, u in enumerate(usage):
            model.books.usage[lv][:] = np.asarray(u, dtype=np.int64)
    return model, arrays, meta
