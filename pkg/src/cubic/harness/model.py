"""Full model assembly: perception -> shared-mapping RVQ -> diffusion policy."""

from __future__ import annotations

import hashlib

import numpy as np

from .. import numerics as nm
from .. import policy as pl
from ..coordination import CodebookConfig, init_codebooks, rvq_quantize
from ..numerics import Tensor
from ..perception import PerceptionConfig, aggregate, build_mask, init_perception
from ..simworld import F_HEAD, F_WRIST, J_DIM, Observation, denormalize_actions
from .config import RunConfig

OBS_FIELDS = ("head_feat", "left_wrist_feat", "right_wrist_feat",
              "left_joints", "right_joints")


def obs_to_batch(obs: Observation) -> dict[str, np.ndarray]:
    return {f: getattr(obs, f)[None] for f in OBS_FIELDS}


class CubicModel:
    """Owns all parameters and the phase-dependent forward passes."""

    def __init__(self, cfg: RunConfig, rng: np.random.Generator | None = None,
                 phase: int = 1):
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        self.cfg = cfg
        self.phase = phase
        self.pcfg = PerceptionConfig(
            n_latents=cfg.n_latents,
            token_dim=cfg.token_dim,
            m_head=cfg.m_head,
            layers=cfg.agg_layers,
            heads=cfg.agg_heads,
            encoder_mode=cfg.encoder_mode,
            head_feat_dim=F_HEAD,
            wrist_feat_dim=F_WRIST,
            joint_dim=J_DIM,
        )
        self.layout = build_mask(self.pcfg)
        self.perception = init_perception(self.pcfg, rng)
        self.ccfg = CodebookConfig(
            entries=cfg.codebook_size,
            dim=cfg.token_dim,
            levels=cfg.rvq_levels,
            beta=cfg.beta,
            shared_mapping=cfg.shared_mapping,
        )
        self.books = init_codebooks(self.ccfg, rng)
        self.dcfg = pl.DenoiserConfig(
            horizon=cfg.horizon,
            act_dim=3,
            width=cfg.denoiser_width,
            blocks=cfg.denoiser_blocks,
            heads=cfg.denoiser_heads,
            cond_dim=cfg.token_dim,
        )
        self.denoiser = pl.init_denoiser(self.dcfg, rng, phase=phase)
        self.sched = pl.cosine_schedule(cfg.k_steps)
        self.action_stats: dict | None = None

    # -- parameter registry --------------------------------------------------

    def all_params(self) -> dict[str, Tensor]:
        out = dict(self.perception)
        out.update(self.books.params())
        out.update(self.denoiser)
        return out

    def perception_param_names(self) -> list[str]:
        return list(self.perception) + list(self.books.params())

    def trainable_params(self, mode: str) -> dict[str, Tensor]:
        if mode in ("phase1", "end_to_end"):
            return self.all_params()
        if mode == "phase2":
            return dict(self.denoiser)
        raise ValueError(f"unknown training mode {mode!r}")

    def perception_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.perception_param_names()):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.all_params()[name].data,
                                          dtype="<f4").tobytes())
        return h.hexdigest()

    def merge_for_phase2(self) -> None:
        """Replace the per-arm self-attention stacks by their average."""
        if self.phase == 2:
            return
        self.denoiser = pl.merge_self_attention(self.denoiser, self.dcfg)
        self.phase = 2

    # -- forward -------------------------------------------------------------

    def build_conditions(self, batch: dict[str, np.ndarray], update_stats: bool = False):
        """Aggregate, quantize, and assemble per-arm condition token sequences.

        With latent tokens disabled (the N=0 ablation) the perceptual tokens
        themselves are quantized in place of the latents: arm tokens pair
        left/right and head tokens pair with themselves, and no raw token
        reaches the policy.
        """
        out = aggregate(batch, self.perception, self.pcfg, self.layout)
        if self.cfg.use_latent_tokens:
            quant = rvq_quantize(out["a_q_left"], out["a_q_right"], self.books,
                                 update_stats=update_stats)
            cond_l = nm.concat([quant.a_z_left, out["c_left"], out["head"]], axis=1)
            cond_r = nm.concat([quant.a_z_right, out["c_right"], out["head"]], axis=1)
        else:
            q_l = nm.concat([out["c_left"], out["head"]], axis=1)
            q_r = nm.concat([out["c_right"], out["head"]], axis=1)
            quant = rvq_quantize(q_l, q_r, self.books, update_stats=update_stats)
            cond_l = quant.a_z_left
            cond_r = quant.a_z_right
        return cond_l, cond_r, quant

    def forward_losses(self, batch: dict[str, np.ndarray], rng: np.random.Generator,
                       mode: str) -> dict[str, Tensor]:
        """One training forward pass; `mode` picks the objective and routing."""
        cond_l, cond_r, quant = self.build_conditions(batch, update_stats=True)
        a0_left, a0_right = pl.split_arms(batch["actions"])
        bsz = a0_left.shape[0]
        k = rng.integers(1, self.sched.k_steps + 1, size=bsz)
        eps_l = rng.standard_normal(a0_left.shape).astype(np.float32)
        eps_r = rng.standard_normal(a0_right.shape).astype(np.float32)
        ak_l = pl.forward_diffuse(a0_left, k, eps_l, self.sched).astype(np.float32)
        ak_r = pl.forward_diffuse(a0_right, k, eps_r, self.sched).astype(np.float32)
        eh_l, eh_r = pl.denoise_eps(self.denoiser, self.dcfg, self.phase,
                                    ak_l, ak_r, k, cond_l, cond_r)
        l_left = pl.diffusion_loss(eh_l, eps_l)
        l_right = pl.diffusion_loss(eh_r, eps_r)
        if mode == "phase2":
            total = pl.phase2_loss(l_left, l_right)
        else:
            total = pl.phase1_loss(l_left, quant.vq_loss, l_right)
        return {"total": total, "diff_left": l_left, "diff_right": l_right,
                "vq": quant.vq_loss}

    # -- inference -----------------------------------------------------------

    def act(self, obs: Observation, rng: np.random.Generator) -> np.ndarray:
        """DDIM-sample one denormalized H x 6 action chunk for the observation."""
        if self.action_stats is None:
            raise RuntimeError("action_stats unset; train or load a checkpoint first")
        with nm.no_grad():
            cond_l, cond_r, _ = self.build_conditions(obs_to_batch(obs))

            def denoise(a_joint: np.ndarray, k: int) -> np.ndarray:
                a_l, a_r = pl.split_arms(a_joint)
                kk = np.full(a_joint.shape[0], k, dtype=np.int64)
                eh_l, eh_r = pl.denoise_eps(self.denoiser, self.dcfg, self.phase,
                                            a_l, a_r, kk, cond_l, cond_r)
                return pl.merge_arms(eh_l.data, eh_r.data)

            norm = pl.ddim_sample(denoise, (1, self.cfg.horizon, 6), self.sched,
                                  self.cfg.ddim_steps, rng)
        return denormalize_actions(norm[0], self.action_stats)

    # -- serialization -------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.all_params().items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.all_params()
        missing = set(params) - set(arrays)
        if missing:
            raise ValueError(f"checkpoint missing tensors: {sorted(missing)[:5]}")
        for name, t in params.items():
            if tuple(arrays[name].shape) != t.shape:
                raise ValueError(f"checkpoint tensor {name} has shape "
                                 f"{arrays[name].shape}, expected {t.shape}")
            t.data = arrays[name].astype(np.float32)
