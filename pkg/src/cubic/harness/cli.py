"""Command line: cubic gen-demos | train | eval | ablate."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .ablate import AXES, run_ablation, write_ablation
from .config import RunConfig
from .evaluate import evaluate_checkpoint, write_report
from .train import MODES, generate_demos, train


def _refuse_existing(path: str, force: bool) -> None:
    exists = os.path.isfile(path) or (
        os.path.isdir(path) and os.listdir(path))
    if exists and not force:
        raise SystemExit(f"refusing to overwrite {path!r}; pass --force")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "task", None):
        cfg = cfg.replace(task=args.task)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cubic",
        description="Coordinated bimanual policy: demos, two-phase training, "
                    "evaluation, ablations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="roll scripted experts into a dataset")
    p.add_argument("--task", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("train", help="train one phase")
    p.add_argument("--config", default=None, help="JSON RunConfig file")
    p.add_argument("--task", default=None)
    p.add_argument("--phase", choices=[*MODES, "1", "2"], default="phase1")
    p.add_argument("--demos", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init-from", default=None, help="phase-1 checkpoint for phase 2")
    p.add_argument("--metrics", default=None, help="metrics.jsonl path (append)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("eval", help="closed-loop evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--t-max", type=int, default=160)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("ablate", help="run one ablation axis")
    p.add_argument("--config", default=None)
    p.add_argument("--task", default=None)
    p.add_argument("--axis", choices=AXES, required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--work-dir", required=True)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--force", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "gen-demos":
        _refuse_existing(args.out, args.force)
        info = generate_demos(args.task, args.count, args.seed, args.out)
        print(json.dumps(info))
        return 0

    if args.command == "train":
        _refuse_existing(args.out, args.force)
        cfg = _load_config(args)
        phase = {"1": "phase1", "2": "phase2"}.get(args.phase, args.phase)
        train(cfg, phase, args.demos, args.out, init_from=args.init_from,
              metrics_path=args.metrics, epochs=args.epochs)
        print(json.dumps({"checkpoint": args.out, "phase": phase}))
        return 0

    if args.command == "eval":
        _refuse_existing(args.out, args.force)
        seeds = tuple(int(s) for s in args.seeds.split(","))
        report = evaluate_checkpoint(args.checkpoint, episodes=args.episodes,
                                     seeds=seeds, t_max=args.t_max)
        write_report(args.out, report)
        print(json.dumps(report))
        return 0

    if args.command == "ablate":
        _refuse_existing(args.out, args.force)
        cfg = _load_config(args)
        seeds = tuple(int(s) for s in args.seeds.split(","))
        table = run_ablation(args.axis, cfg, args.demos, args.work_dir,
                             episodes=args.episodes, seeds=seeds, epochs=args.epochs)
        write_ablation(args.out, table)
        print(json.dumps({"axis": args.axis, "rows": len(table["rows"])}))
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
