"""Closed-loop evaluation with receding-horizon sampling and seed protocol."""

from __future__ import annotations

import json
import multiprocessing as mp
import os

import numpy as np

from ..simworld import TaskSpec, clip_action, expert_action, reset, step_state
from .checkpoint import load_checkpoint
from .model import CubicModel


def worker_count() -> int:
    env = os.environ.get("CUBIC_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def episode_seed(eval_seed: int, episode: int) -> int:
    return eval_seed * 1_000_003 + episode


def run_episode(model: CubicModel, spec: TaskSpec, eval_seed: int, episode: int) -> bool:
    """One closed-loop rollout: sample H, execute the first exec_horizon steps."""
    env, obs = reset(spec, episode_seed(eval_seed, episode))
    replan = 0
    while not env.state.done:
        rng = np.random.default_rng([model.cfg.seed, eval_seed, episode, replan, 71])
        chunk = model.act(obs, rng)
        replan += 1
        for action in chunk[:model.cfg.exec_horizon]:
            obs, done, _ = env.step(action)
            if done:
                break
    return bool(env.state.success)


def run_expert_episode(spec: TaskSpec, eval_seed: int, episode: int) -> bool:
    env, _ = reset(spec, episode_seed(eval_seed, episode))
    while not env.state.done:
        env.step(expert_action(spec, env.state))
    return bool(env.state.success)


def run_random_episode(spec: TaskSpec, eval_seed: int, episode: int) -> bool:
    env, _ = reset(spec, episode_seed(eval_seed, episode))
    rng = np.random.default_rng([eval_seed, episode, 37])
    while not env.state.done:
        action = np.concatenate([rng.uniform(-0.1, 0.1, 2), rng.uniform(0, 1, 1),
                                 rng.uniform(-0.1, 0.1, 2), rng.uniform(0, 1, 1)])
        env.step(clip_action(action))
    return bool(env.state.success)


_POOL_MODEL: CubicModel | None = None
_POOL_SPEC: TaskSpec | None = None


def _pool_init(checkpoint_path: str, spec: TaskSpec):
    global _POOL_MODEL, _POOL_SPEC
    _POOL_MODEL, _, _ = load_checkpoint(checkpoint_path)
    _POOL_SPEC = spec


def _pool_episode(args):
    eval_seed, episode = args
    return eval_seed, episode, run_episode(_POOL_MODEL, _POOL_SPEC, eval_seed, episode)


def evaluate_checkpoint(checkpoint_path: str, episodes: int = 50,
                        seeds: tuple[int, ...] = (0, 1, 2),
                        task: str | None = None, t_max: int = 160) -> dict:
    """Success rate per seed plus mean/std; parallel when CUBIC_THREADS > 1.

    Episode outcomes are keyed by (seed, episode) with counter-derived RNG
    streams, so results are identical for any worker count.
    """
    model, _, meta = load_checkpoint(checkpoint_path)
    spec = TaskSpec(task=task or model.cfg.task, t_max=t_max)
    jobs = [(s, e) for s in seeds for e in range(episodes)]
    results: dict[tuple[int, int], bool] = {}
    workers = worker_count()
    if workers > 1 and len(jobs) > 1:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_pool_init,
                      initargs=(checkpoint_path, spec)) as pool:
            for s, e, ok in pool.imap_unordered(_pool_episode, jobs, chunksize=4):
                results[(s, e)] = ok
    else:
        for s, e in jobs:
            results[(s, e)] = run_episode(model, spec, s, e)
    per_seed = []
    for s in seeds:
        wins = sum(results[(s, e)] for e in range(episodes))
        per_seed.append(wins / episodes)
    return build_report(spec.task, episodes, list(seeds), per_seed)


def build_report(task: str, episodes: int, seeds: list[int],
                 per_seed: list[float]) -> dict:
    rates = np.asarray(per_seed, dtype=np.float64)
    return {
        "task": task,
        "episodes": episodes,
        "seeds": seeds,
        "per_seed": [float(r) for r in rates],
        "mean": float(rates.mean()),
        "std": float(rates.std()),
    }


def write_report(path: str, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
