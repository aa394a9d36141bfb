import json
import os

import numpy as np
import pytest

from cubic import numerics as nm
from cubic import simworld as sw
from cubic.harness import (
    AdamW,
    ChunkDataset,
    CubicModel,
    RunConfig,
    axis_variants,
    build_report,
    cosine_lr_scale,
    evaluate_checkpoint,
    generate_demos,
    load_checkpoint,
    run_expert_episode,
    run_random_episode,
    save_checkpoint,
    train,
)
from cubic.harness.cli import main as cli_main
from cubic.numerics import Tensor

TINY = dict(epochs_per_phase=2, learning_rate=1e-3, batch_size=16,
            steps_per_epoch=4, n_latents=2, codebook_size=16, token_dim=16,
            rvq_levels=2, denoiser_width=32, denoiser_blocks=1, denoiser_heads=2,
            agg_layers=1, agg_heads=2, m_head=4, k_steps=20, ddim_steps=5)


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    path = str(tmp_path_factory.mktemp("demos") / "dual_reach")
    generate_demos("dual_reach", 12, 0, path)
    return path


@pytest.fixture(scope="module")
def tiny_checkpoints(tmp_path_factory, demo_dir):
    root = tmp_path_factory.mktemp("ckpts")
    cfg = RunConfig(task="dual_reach", **TINY)
    ck1 = str(root / "p1")
    ck2 = str(root / "p2")
    metrics = str(root / "metrics.jsonl")
    train(cfg, "phase1", demo_dir, ck1, metrics_path=metrics)
    train(cfg, "phase2", demo_dir, ck2, init_from=ck1, metrics_path=metrics)
    return {"cfg": cfg, "ck1": ck1, "ck2": ck2, "metrics": metrics}


class TestRunConfig:
    def test_json_roundtrip(self):
        cfg = RunConfig(task="handover", n_latents=8, codebook_size=512)
        assert RunConfig.from_json(cfg.to_json()) == cfg

    def test_paper_defaults(self):
        cfg = RunConfig()
        assert (cfg.obs_horizon, cfg.horizon, cfg.n_latents, cfg.codebook_size,
                cfg.token_dim, cfg.k_steps, cfg.ddim_steps) == (1, 8, 4, 256, 32, 100, 10)

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError, match="unknown config"):
            RunConfig.from_json({"task": "dual_reach", "bogus": 1})

    def test_latent_flag_consistency(self):
        with pytest.raises(ValueError):
            RunConfig(use_latent_tokens=False, n_latents=4)
        cfg = RunConfig(use_latent_tokens=False, n_latents=0)
        assert cfg.n_latents == 0


class TestGenDemos:
    def test_count_and_success(self, demo_dir):
        tensors, meta = sw.load_dataset(demo_dir)
        assert len(meta["episode_lengths"]) == 12
        assert all(meta["successes"])
        assert tensors["actions"].shape[1] == 6

    def test_zero_count_valid_manifest(self, tmp_path):
        out = str(tmp_path / "empty")
        generate_demos("dual_reach", 0, 0, out)
        tensors, meta = sw.load_dataset(out)
        assert meta["episode_lengths"] == []
        assert meta["action_stats"]["min"] == [0.0] * 6

    def test_regeneration_byte_identical(self, tmp_path):
        for name in ("x", "y"):
            generate_demos("handover", 4, 7, str(tmp_path / name))
        assert (tmp_path / "x" / "tensors.bin").read_bytes() == \
               (tmp_path / "y" / "tensors.bin").read_bytes()
        assert (tmp_path / "x" / "manifest.json").read_bytes() == \
               (tmp_path / "y" / "manifest.json").read_bytes()


class TestChunkDataset:
    def test_shapes_and_padding(self, demo_dir):
        data = ChunkDataset(demo_dir, horizon=8)
        batch = data.batch(np.arange(min(6, len(data))))
        assert batch["actions"].shape == (6, 8, 6)
        assert batch["head_feat"].shape[1:] == (4, 8)
        # final chunk of an episode is padded with hold actions
        ep0_len = data.meta["episode_lengths"][0]
        chunk = data.chunk(0, ep0_len - 1)
        zero = data.zero_delta
        np.testing.assert_allclose(chunk[1:, [0, 1, 3, 4]],
                                   np.tile(zero, (7, 1)), atol=1e-6)

    def test_normalized_range(self, demo_dir):
        data = ChunkDataset(demo_dir, horizon=8)
        assert data.actions.min() >= -1.0 and data.actions.max() <= 1.0


class TestOptimizer:
    def test_adamw_descends_quadratic(self):
        x = Tensor(np.array([5.0, -3.0], dtype=np.float32), requires_grad=True)
        opt = AdamW({"x": x}, lr=0.1, weight_decay=0.0)
        for _ in range(200):
            opt.zero_grad()
            nm.total(nm.mul(x, x)).backward()
            opt.step()
        assert np.abs(x.data).max() < 0.05

    def test_cosine_scale_endpoints(self):
        assert cosine_lr_scale(0, 100) == pytest.approx(1.0)
        assert cosine_lr_scale(99, 100) == pytest.approx(0.0, abs=1e-9)
        assert 0.4 < cosine_lr_scale(50, 100) < 0.6


class TestTraining:
    def test_metrics_schema(self, tiny_checkpoints):
        rows = [json.loads(l) for l in open(tiny_checkpoints["metrics"])]
        assert len(rows) == 4  # 2 epochs x 2 phases
        for row in rows:
            assert set(row) == {"phase", "epoch", "losses", "codebook_perplexity",
                                "codebook_usage", "wall_clock_s"}
            assert set(row["losses"]) == {"total", "diff_left", "diff_right", "vq"}

    def test_checkpoint_self_describing(self, tiny_checkpoints):
        model, _, meta = load_checkpoint(tiny_checkpoints["ck2"])
        assert model.cfg == tiny_checkpoints["cfg"]
        assert meta["phase"] == 2 and meta["mode"] == "phase2"
        assert model.action_stats is not None

    def test_phase2_freezes_perception_and_codebooks(self, tiny_checkpoints):
        m1, _, _ = load_checkpoint(tiny_checkpoints["ck1"])
        m2, _, _ = load_checkpoint(tiny_checkpoints["ck2"])
        assert m1.perception_hash() == m2.perception_hash()

    def test_phase2_requires_phase1_checkpoint(self, demo_dir):
        cfg = RunConfig(task="dual_reach", **TINY)
        with pytest.raises(ValueError, match="phase-1 checkpoint"):
            train(cfg, "phase2", demo_dir, "/tmp/nope")

    def test_config_mismatch_rejected(self, tiny_checkpoints, demo_dir, tmp_path):
        other = tiny_checkpoints["cfg"].replace(denoiser_width=64)
        with pytest.raises(ValueError, match="does not match"):
            train(other, "phase2", demo_dir, str(tmp_path / "x"),
                  init_from=tiny_checkpoints["ck1"])

    def test_resume_reproduces_next_epoch_loss_bitwise(self, demo_dir, tmp_path):
        cfg = RunConfig(task="dual_reach", **TINY)
        m_full = str(tmp_path / "full.jsonl")
        m_head = str(tmp_path / "head.jsonl")
        m_tail = str(tmp_path / "tail.jsonl")
        train(cfg, "phase1", demo_dir, str(tmp_path / "full"),
              metrics_path=m_full, epochs=2)
        train(cfg, "phase1", demo_dir, str(tmp_path / "head"),
              metrics_path=m_head, epochs=2, stop_after_epochs=1)
        train(cfg, "phase1", demo_dir, str(tmp_path / "tail"),
              metrics_path=m_tail, epochs=2, resume_from=str(tmp_path / "head"))
        full_rows = [json.loads(l) for l in open(m_full)]
        tail_rows = [json.loads(l) for l in open(m_tail)]
        assert tail_rows[0]["epoch"] == 1
        assert tail_rows[0]["losses"] == full_rows[1]["losses"]

    def test_phase1_loss_decreases_over_first_20_epochs(self, demo_dir, tmp_path):
        cfg = RunConfig(task="dual_reach", **dict(TINY, epochs_per_phase=20))
        metrics = str(tmp_path / "m20.jsonl")
        train(cfg, "phase1", demo_dir, str(tmp_path / "ck20"), metrics_path=metrics)
        totals = [json.loads(l)["losses"]["total"] for l in open(metrics)]
        windows = [np.mean(totals[i:i + 5]) for i in range(0, 20, 5)]
        assert all(b < a for a, b in zip(windows, windows[1:]))


class TestEvaluation:
    def test_expert_oracle_rates_match_direct_rollouts(self):
        spec = sw.TaskSpec(task="dual_reach", t_max=160)
        wins_plumbing = sum(run_expert_episode(spec, 0, e) for e in range(20))
        wins_direct = 0
        for e in range(20):
            env, _ = sw.reset(spec, 1_000_003 * 0 + e)
            while not env.state.done:
                env.step(sw.expert_action(spec, env.state))
            wins_direct += env.state.success
        assert wins_plumbing == wins_direct

    def test_random_policy_fails_handover(self):
        spec = sw.TaskSpec(task="handover", t_max=160)
        wins = sum(run_random_episode(spec, 0, e) for e in range(40))
        assert wins / 40 <= 0.05

    def test_report_shape(self, tiny_checkpoints):
        rep = evaluate_checkpoint(tiny_checkpoints["ck2"], episodes=2,
                                  seeds=(0, 1, 2), t_max=30)
        assert rep["seeds"] == [0, 1, 2]
        assert len(rep["per_seed"]) == 3
        rates = np.asarray(rep["per_seed"])
        assert rep["mean"] == pytest.approx(rates.mean())
        assert rep["std"] == pytest.approx(rates.std())

    def test_build_report_arithmetic(self):
        rep = build_report("dual_reach", 10, [0, 1, 2], [0.8, 0.9, 1.0])
        assert rep["mean"] == pytest.approx(0.9)
        assert rep["std"] == pytest.approx(np.std([0.8, 0.9, 1.0]))


class TestAblationPlumbing:
    def test_shared_mapping_axis_two_rows(self):
        rows = axis_variants("shared_mapping", RunConfig())
        assert [r[0] for r in rows] == ["full", "independent_codebooks"]
        assert rows[1][1].shared_mapping is False

    def test_latents_axis_includes_n0(self):
        rows = axis_variants("latents_and_K", RunConfig())
        names = {name: cfg for name, cfg in rows}
        assert names["N0_K256"].n_latents == 0
        assert not names["N0_K256"].use_latent_tokens
        assert names["N8_K512"].codebook_size == 512

    def test_unknown_axis(self):
        with pytest.raises(ValueError):
            axis_variants("nonsense", RunConfig())


class TestCli:
    def test_gen_train_eval_roundtrip(self, tmp_path, capsys):
        demos = str(tmp_path / "demos")
        assert cli_main(["gen-demos", "--task", "dual_reach", "--count", "6",
                         "--out", demos]) == 0
        cfg_path = str(tmp_path / "cfg.json")
        with open(cfg_path, "w") as fh:
            json.dump(dict(RunConfig(task="dual_reach", **TINY).to_json()), fh)
        ck = str(tmp_path / "ck1")
        assert cli_main(["train", "--config", cfg_path, "--phase", "1",
                         "--demos", demos, "--out", ck]) == 0
        out = str(tmp_path / "eval.json")
        assert cli_main(["eval", "--checkpoint", ck, "--episodes", "1",
                         "--seeds", "0", "--t-max", "10", "--out", out]) == 0
        report = json.load(open(out))
        assert set(report) >= {"task", "episodes", "seeds", "per_seed", "mean", "std"}

    def test_refuses_overwrite_without_force(self, tmp_path):
        demos = str(tmp_path / "demos")
        cli_main(["gen-demos", "--task", "dual_reach", "--count", "2", "--out", demos])
        with pytest.raises(SystemExit, match="force"):
            cli_main(["gen-demos", "--task", "dual_reach", "--count", "2",
                      "--out", demos])
        assert cli_main(["gen-demos", "--task", "dual_reach", "--count", "2",
                         "--out", demos, "--force"]) == 0
