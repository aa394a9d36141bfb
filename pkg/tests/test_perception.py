import numpy as np
import pytest

from cubic import numerics as nm
from cubic import perception as pc


def tiny_cfg(**kw):
    base = dict(n_latents=2, token_dim=16, m_head=2, layers=2, heads=2,
                head_feat_dim=8, wrist_feat_dim=8, joint_dim=3)
    base.update(kw)
    return pc.PerceptionConfig(**base)


def random_raw(rng, cfg, bsz=3):
    return {
        "head_feat": rng.standard_normal((bsz, cfg.m_head, cfg.head_feat_dim)).astype(np.float32),
        "left_wrist_feat": rng.standard_normal((bsz, cfg.wrist_feat_dim)).astype(np.float32),
        "right_wrist_feat": rng.standard_normal((bsz, cfg.wrist_feat_dim)).astype(np.float32),
        "left_joints": rng.standard_normal((bsz, cfg.joint_dim)).astype(np.float32),
        "right_joints": rng.standard_normal((bsz, cfg.joint_dim)).astype(np.float32),
    }


class TestBuildMask:
    def test_minimal_layout_enumeration(self):
        cfg = tiny_cfg(n_latents=1, arm_token_count=1, m_head=1)
        allow = pc.build_mask(cfg).allow
        expected = np.array([
            [1, 1, 0, 0, 1],   # left latent
            [0, 1, 0, 0, 1],   # left arm token
            [0, 0, 1, 1, 1],   # right latent
            [0, 0, 0, 1, 1],   # right arm token
            [0, 0, 0, 0, 1],   # head
        ], dtype=bool)
        np.testing.assert_array_equal(allow, expected)

    def test_left_right_blocks_all_false(self):
        for n, a, m in [(1, 1, 1), (4, 2, 4), (3, 2, 5), (0, 2, 4)]:
            cfg = tiny_cfg(n_latents=n, arm_token_count=a, m_head=m)
            layout = pc.build_mask(cfg)
            g = layout.groups()
            left = np.r_[np.arange(g["left_latent"].start, g["left_latent"].stop),
                         np.arange(g["left_arm"].start, g["left_arm"].stop)]
            right = np.r_[np.arange(g["right_latent"].start, g["right_latent"].stop),
                          np.arange(g["right_arm"].start, g["right_arm"].stop)]
            assert not layout.allow[np.ix_(left, right)].any()
            assert not layout.allow[np.ix_(right, left)].any()

    def test_paper_default_layout_size(self):
        cfg = tiny_cfg(n_latents=4, arm_token_count=2, m_head=4)
        layout = pc.build_mask(cfg)
        assert layout.seq_len == 16
        assert layout.allow.shape == (16, 16)

    def test_diagonal_always_true(self):
        cfg = tiny_cfg(n_latents=3, arm_token_count=2, m_head=3)
        assert pc.build_mask(cfg).allow.diagonal().all()

    def test_head_rows_only_head_cols(self):
        cfg = tiny_cfg()
        layout = pc.build_mask(cfg)
        g = layout.groups()
        head_rows = layout.allow[g["head"]]
        non_head = np.ones(layout.seq_len, dtype=bool)
        non_head[g["head"]] = False
        assert not head_rows[:, non_head].any()

    def test_arm_interconnect_flag(self):
        cfg = tiny_cfg(arm_tokens_interconnect=True)
        layout = pc.build_mask(cfg)
        g = layout.groups()
        assert layout.allow[g["left_arm"], g["left_arm"]].all()


class TestEncoders:
    def test_zero_features_give_bias_only_tokens(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(0)
        params = pc.init_perception(cfg, rng)
        raw = {k: np.zeros_like(v) for k, v in random_raw(rng, cfg).items()}
        head, left, right = pc.encode_views(raw, params, cfg)
        np.testing.assert_array_equal(
            head.data, np.broadcast_to(params["head_proj.b"].data,
                                       head.shape).astype(np.float32))
        np.testing.assert_array_equal(left.data[0], params["wrist_proj_left.b"].data)

    def test_determinism(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(1)
        params = pc.init_perception(cfg, rng)
        raw = random_raw(rng, cfg)
        a = pc.encode_views(raw, params, cfg)
        b = pc.encode_views(raw, params, cfg)
        for x, y in zip(a, b):
            assert np.array_equal(x.data, y.data)

    def test_joint_embed_linearity_with_zero_bias(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(2)
        params = pc.init_perception(cfg, rng)  # biases init to zero
        x = rng.standard_normal((4, cfg.joint_dim)).astype(np.float32)
        one = pc.embed_joints(nm.Tensor(x), params, "left")
        two = pc.embed_joints(nm.Tensor(2.0 * x), params, "left")
        np.testing.assert_allclose(two.data, 2.0 * one.data, rtol=1e-5)

    def test_joint_embed_width_is_paper_default(self):
        cfg = tiny_cfg(token_dim=32)
        rng = np.random.default_rng(3)
        params = pc.init_perception(cfg, rng)
        out = pc.embed_joints(nm.Tensor(rng.standard_normal((2, 3)).astype(np.float32)),
                              params, "right")
        assert out.shape == (2, 32)

    def test_image_mode_shape_trace(self):
        cfg = tiny_cfg(encoder_mode="image", m_head=4, token_dim=32)
        rng = np.random.default_rng(4)
        params = pc.init_perception(cfg, rng)
        raw = {v: rng.standard_normal((2, 3, 32, 32)).astype(np.float32)
               for v in ("head_image", "left_wrist_image", "right_wrist_image")}
        head, left, right = pc.encode_views(raw, params, cfg)
        assert head.shape == (2, 4, 32)
        assert left.shape == (2, 32) and right.shape == (2, 32)

    def test_image_mode_bad_size_is_structured_error(self):
        cfg = tiny_cfg(encoder_mode="image")
        rng = np.random.default_rng(5)
        params = pc.init_perception(cfg, rng)
        raw = {v: rng.standard_normal((2, 3, 16, 16)).astype(np.float32)
               for v in ("head_image", "left_wrist_image", "right_wrist_image")}
        with pytest.raises(nm.ShapeError, match="head_image"):
            pc.encode_views(raw, params, cfg)


class TestAggregate:
    def setup_method(self):
        self.cfg = tiny_cfg()
        self.rng = np.random.default_rng(10)
        self.params = pc.init_perception(self.cfg, self.rng)
        self.layout = pc.build_mask(self.cfg)

    def run(self, raw):
        return pc.aggregate(raw, self.params, self.cfg, self.layout)

    def test_shape_contract(self):
        out = self.run(random_raw(self.rng, self.cfg))
        assert out["a_q_left"].shape == (3, self.cfg.n_latents, self.cfg.token_dim)
        assert out["a_q_right"].shape == (3, self.cfg.n_latents, self.cfg.token_dim)
        assert out["c_left"].shape == (3, 2, self.cfg.token_dim)
        assert out["head"].shape == (3, self.cfg.m_head, self.cfg.token_dim)

    def test_right_perturbation_leaves_left_bitwise_unchanged(self):
        raw = random_raw(self.rng, self.cfg)
        base = self.run(raw)
        for _ in range(20):
            raw2 = dict(raw)
            raw2["right_wrist_feat"] = self.rng.standard_normal(
                raw["right_wrist_feat"].shape).astype(np.float32)
            raw2["right_joints"] = self.rng.standard_normal(
                raw["right_joints"].shape).astype(np.float32)
            out = self.run(raw2)
            assert np.array_equal(out["a_q_left"].data, base["a_q_left"].data)
            assert np.array_equal(out["c_left"].data, base["c_left"].data)
            assert np.array_equal(out["head"].data, base["head"].data)

    def test_head_perturbation_changes_everything(self):
        raw = random_raw(self.rng, self.cfg)
        base = self.run(raw)
        raw2 = dict(raw)
        raw2["head_feat"] = raw["head_feat"] + 0.5
        out = self.run(raw2)
        assert not np.array_equal(out["a_q_left"].data, base["a_q_left"].data)
        assert not np.array_equal(out["a_q_right"].data, base["a_q_right"].data)

    def test_head_invariant_to_all_wrist_and_joint_inputs(self):
        raw = random_raw(self.rng, self.cfg)
        base = self.run(raw)
        raw2 = dict(raw)
        for key in ("left_wrist_feat", "right_wrist_feat", "left_joints", "right_joints"):
            raw2[key] = self.rng.standard_normal(raw[key].shape).astype(np.float32)
        out = self.run(raw2)
        assert np.array_equal(out["head"].data, base["head"].data)

    def test_swap_symmetry(self):
        raw = random_raw(self.rng, self.cfg)
        base = self.run(raw)
        swapped_raw = {
            "head_feat": raw["head_feat"],
            "left_wrist_feat": raw["right_wrist_feat"],
            "right_wrist_feat": raw["left_wrist_feat"],
            "left_joints": raw["right_joints"],
            "right_joints": raw["left_joints"],
        }
        swapped_params = pc.swap_arm_params(self.params)
        out = pc.aggregate(swapped_raw, swapped_params, self.cfg, self.layout)
        assert np.array_equal(out["a_q_left"].data, base["a_q_right"].data)
        assert np.array_equal(out["a_q_right"].data, base["a_q_left"].data)
        assert np.array_equal(out["c_left"].data, base["c_right"].data)
        assert np.array_equal(out["head"].data, base["head"].data)

    def test_zero_layers_is_identity_after_projection(self):
        cfg = tiny_cfg(layers=0)
        params = pc.init_perception(cfg, np.random.default_rng(11))
        layout = pc.build_mask(cfg)
        raw = random_raw(self.rng, cfg)
        out = pc.aggregate(raw, params, cfg, layout)
        head, left_w, _ = pc.encode_views(raw, params, cfg)
        expected_head = nm.add(head, params["head_pos"])
        np.testing.assert_array_equal(out["head"].data, expected_head.data)
        np.testing.assert_array_equal(
            out["a_q_left"].data,
            np.broadcast_to(params["latents_left"].data, out["a_q_left"].shape))
        np.testing.assert_array_equal(out["c_left"].data[:, 0], left_w.data)

    def test_n_zero_layout_supported(self):
        cfg = tiny_cfg(n_latents=0)
        params = pc.init_perception(cfg, np.random.default_rng(12))
        layout = pc.build_mask(cfg)
        out = pc.aggregate(random_raw(self.rng, cfg), params, cfg, layout)
        assert out["a_q_left"].shape == (3, 0, cfg.token_dim)
        assert out["c_left"].shape == (3, 2, cfg.token_dim)

    def test_gradients_flow_to_perception_params(self):
        raw = random_raw(self.rng, self.cfg)
        out = self.run(raw)
        loss = nm.mean(nm.mul(out["a_q_left"], out["a_q_left"]))
        loss.backward()
        assert self.params["latents_left"].grad is not None
        assert self.params["agg.0.qkv.w"].grad is not None
        for p in self.params.values():
            p.grad = None
