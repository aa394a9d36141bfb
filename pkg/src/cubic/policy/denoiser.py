"""Diffusion-transformer denoiser over per-arm action token sequences.

Phase 1 keeps the two arms as disjoint stacks (self-attention, cross-attention
to that arm's condition tokens, feed-forward, adaptive normalization driven by
the timestep). Phase 2 replaces the two self-attention stacks with one merged
stack running over the concatenation of both arms' action tokens; everything
else stays per-arm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics as nm
from ..numerics import ShapeError, Tensor

SIDES = ("left", "right")


@dataclass(frozen=True)
class DenoiserConfig:
    horizon: int = 8        # action tokens per arm (one per timestep)
    act_dim: int = 3        # per-arm action dimension
    width: int = 64
    blocks: int = 2
    heads: int = 4
    cond_dim: int = 32      # width of the condition tokens
    time_dim: int = 64      # sinusoidal timestep feature width


def _linear(rng, fan_in, fan_out):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32)


def _param(arr):
    return Tensor(arr, requires_grad=True)


def _zeros(*shape):
    return _param(np.zeros(shape, dtype=np.float32))


def _init_side(cfg: DenoiserConfig, rng, side: str, with_self_attn: bool) -> dict[str, Tensor]:
    w = cfg.width
    p = {}
    pre = f"den.{side}"
    p[f"{pre}.in.w"] = _param(_linear(rng, cfg.act_dim, w))
    p[f"{pre}.in.b"] = _zeros(w)
    p[f"{pre}.out.w"] = _zeros(w, cfg.act_dim)  # zero-init: initial eps_hat is 0
    p[f"{pre}.out.b"] = _zeros(cfg.act_dim)
    p[f"{pre}.time.w1"] = _param(_linear(rng, cfg.time_dim, w))
    p[f"{pre}.time.b1"] = _zeros(w)
    p[f"{pre}.time.w2"] = _param(_linear(rng, w, w))
    p[f"{pre}.time.b2"] = _zeros(w)
    for b in range(cfg.blocks):
        blk = f"{pre}.blk{b}"
        p[f"{blk}.ada.w"] = _zeros(w, 6 * w)  # adaLN-zero: blocks start as identity
        p[f"{blk}.ada.b"] = _zeros(6 * w)
        if with_self_attn:
            p[f"{blk}.attn.qkv.w"] = _param(_linear(rng, w, 3 * w))
            p[f"{blk}.attn.qkv.b"] = _zeros(3 * w)
            p[f"{blk}.attn.out.w"] = _param(_linear(rng, w, w))
            p[f"{blk}.attn.out.b"] = _zeros(w)
        p[f"{blk}.cross.q.w"] = _param(_linear(rng, w, w))
        p[f"{blk}.cross.q.b"] = _zeros(w)
        p[f"{blk}.cross.kv.w"] = _param(_linear(rng, cfg.cond_dim, 2 * w))
        p[f"{blk}.cross.kv.b"] = _zeros(2 * w)
        p[f"{blk}.cross.out.w"] = _zeros(w, w)  # zero-init: cross path off at start
        p[f"{blk}.cross.out.b"] = _zeros(w)
        p[f"{blk}.ff1.w"] = _param(_linear(rng, w, 2 * w))
        p[f"{blk}.ff1.b"] = _zeros(2 * w)
        p[f"{blk}.ff2.w"] = _param(_linear(rng, 2 * w, w))
        p[f"{blk}.ff2.b"] = _zeros(w)
    return p


def init_denoiser(cfg: DenoiserConfig, rng: np.random.Generator,
                  phase: int = 1) -> dict[str, Tensor]:
    """Fresh parameters; phase 2 carries one shared self-attention stack."""
    params = {}
    for side in SIDES:
        params.update(_init_side(cfg, rng, side, with_self_attn=(phase == 1)))
    if phase == 2:
        w = cfg.width
        for b in range(cfg.blocks):
            blk = f"den.shared.blk{b}"
            params[f"{blk}.attn.qkv.w"] = _param(_linear(rng, w, 3 * w))
            params[f"{blk}.attn.qkv.b"] = _zeros(3 * w)
            params[f"{blk}.attn.out.w"] = _param(_linear(rng, w, w))
            params[f"{blk}.attn.out.b"] = _zeros(w)
    return params


def merge_self_attention(params: dict[str, Tensor], cfg: DenoiserConfig) -> dict[str, Tensor]:
    """Build phase-2 parameters from a phase-1 set.

    The merged self-attention starts at the elementwise average of the two
    arms' weights; every per-arm tensor is copied unchanged.
    """
    merged: dict[str, Tensor] = {}
    for name, t in params.items():
        if ".attn." in name:
            continue
        merged[name] = _param(t.data.copy())
    for b in range(cfg.blocks):
        for leaf in ("qkv.w", "qkv.b", "out.w", "out.b"):
            left = params[f"den.left.blk{b}.attn.{leaf}"]
            right = params[f"den.right.blk{b}.attn.{leaf}"]
            if left.shape != right.shape:
                raise ShapeError(f"merge_self_attention: {leaf} shapes differ "
                                 f"{left.shape} vs {right.shape}")
            merged[f"den.shared.blk{b}.attn.{leaf}"] = _param(
                0.5 * (left.data + right.data))
    return merged


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------


def _affine(x, params, name):
    return nm.add(nm.matmul(x, params[f"{name}.w"]), params[f"{name}.b"])


def _heads(t: Tensor, heads: int) -> Tensor:
    bsz, s, w = t.shape
    return nm.transpose(nm.reshape(t, (bsz, s, heads, w // heads)), (0, 2, 1, 3))


def _unheads(t: Tensor) -> Tensor:
    bsz, heads, s, hd = t.shape
    return nm.reshape(nm.transpose(t, (0, 2, 1, 3)), (bsz, s, heads * hd))


def _attention(q: Tensor, k: Tensor, v: Tensor, heads: int) -> Tensor:
    qh, kh, vh = _heads(q, heads), _heads(k, heads), _heads(v, heads)
    hd = qh.shape[-1]
    scores = nm.scale(nm.matmul(qh, nm.transpose(kh, (0, 1, 3, 2))), 1.0 / np.sqrt(hd))
    return _unheads(nm.matmul(nm.softmax(scores), vh))


def _time_vec(params, side, k: np.ndarray, cfg: DenoiserConfig) -> Tensor:
    emb = Tensor(nm.sinusoidal_embedding(k, cfg.time_dim))
    h = nm.gelu(nm.add(nm.matmul(emb, params[f"den.{side}.time.w1"]),
                       params[f"den.{side}.time.b1"]))
    return nm.add(nm.matmul(h, params[f"den.{side}.time.w2"]), params[f"den.{side}.time.b2"])


def _modulate(x: Tensor, scale_t: Tensor, shift_t: Tensor) -> Tensor:
    one_plus = nm.add(scale_t, Tensor(np.ones(1, dtype=np.float32)))
    return nm.add(nm.mul(x, one_plus), shift_t)


def _ada_chunks(params, blk, t_vec, width):
    m = nm.add(nm.matmul(t_vec, params[f"{blk}.ada.w"]), params[f"{blk}.ada.b"])
    chunks = nm.split(m, [width] * 6, axis=-1)
    bsz = t_vec.shape[0]
    return [nm.reshape(c, (bsz, 1, width)) for c in chunks]


def _cross_attention(x: Tensor, cond: Tensor, params, blk, heads) -> Tensor:
    q = _affine(nm.layer_norm(x), params, f"{blk}.cross.q")
    kv = _affine(cond, params, f"{blk}.cross.kv")
    w = q.shape[-1]
    k, v = nm.split(kv, [w, w], axis=-1)
    return _affine(_attention(q, k, v, heads), params, f"{blk}.cross.out")


def _embed_tokens(params, side, a_k: np.ndarray, cfg: DenoiserConfig) -> Tensor:
    x = _affine(Tensor(a_k), params, f"den.{side}.in")
    pos = nm.sinusoidal_embedding(np.arange(cfg.horizon), cfg.width)
    return nm.add(x, Tensor(pos))


def denoise_eps(params: dict[str, Tensor], cfg: DenoiserConfig, phase: int,
                a_k_left: np.ndarray, a_k_right: np.ndarray, k: np.ndarray,
                cond_left: Tensor, cond_right: Tensor) -> tuple[Tensor, Tensor]:
    """Predict the per-arm noise. k is a per-sample integer array.

    Phase 1 evaluates two disjoint stacks; phase 2 runs the shared
    self-attention over the concatenated 2H action tokens and keeps
    cross-attention (and all normalization) per arm.
    """
    a_k = {"left": np.asarray(a_k_left, dtype=np.float32),
           "right": np.asarray(a_k_right, dtype=np.float32)}
    cond = {"left": cond_left, "right": cond_right}
    for side in SIDES:
        if a_k[side].shape[-2:] != (cfg.horizon, cfg.act_dim):
            raise ShapeError(f"denoise_eps: {side} trajectory {a_k[side].shape} != "
                             f"(..., {cfg.horizon}, {cfg.act_dim})")
    k = np.asarray(k).reshape(-1)
    t_vec = {side: _time_vec(params, side, k, cfg) for side in SIDES}
    x = {side: _embed_tokens(params, side, a_k[side], cfg) for side in SIDES}

    for b in range(cfg.blocks):
        ada = {side: _ada_chunks(params, f"den.{side}.blk{b}", t_vec[side], cfg.width)
               for side in SIDES}
        if phase == 1:
            for side in SIDES:
                blk = f"den.{side}.blk{b}"
                sc1, sh1, g1 = ada[side][:3]
                h = _modulate(nm.layer_norm(x[side]), sc1, sh1)
                qkv = nm.add(nm.matmul(h, params[f"{blk}.attn.qkv.w"]),
                             params[f"{blk}.attn.qkv.b"])
                q, kk, v = nm.split(qkv, [cfg.width] * 3, axis=-1)
                h = _affine(_attention(q, kk, v, cfg.heads), params, f"{blk}.attn.out")
                x[side] = nm.add(x[side], nm.mul(g1, h))
        else:
            blk = f"den.shared.blk{b}"
            mods = []
            for side in SIDES:
                sc1, sh1, _, _, _, _ = ada[side]
                mods.append(_modulate(nm.layer_norm(x[side]), sc1, sh1))
            joint = nm.concat(mods, axis=1)                      # (B, 2H, W)
            qkv = nm.add(nm.matmul(joint, params[f"{blk}.attn.qkv.w"]),
                         params[f"{blk}.attn.qkv.b"])
            q, kk, v = nm.split(qkv, [cfg.width] * 3, axis=-1)
            att = _attention(q, kk, v, cfg.heads)
            att = _affine(att, params, f"{blk}.attn.out")
            att_l, att_r = nm.split(att, [cfg.horizon, cfg.horizon], axis=1)
            x["left"] = nm.add(x["left"], nm.mul(ada["left"][2], att_l))
            x["right"] = nm.add(x["right"], nm.mul(ada["right"][2], att_r))

        for side in SIDES:
            blk = f"den.{side}.blk{b}"
            x[side] = nm.add(x[side], _cross_attention(x[side], cond[side], params,
                                                       blk, cfg.heads))
            _, _, _, sc2, sh2, g2 = ada[side]
            h = _modulate(nm.layer_norm(x[side]), sc2, sh2)
            h = _affine(nm.gelu(_affine(h, params, f"{blk}.ff1")), params, f"{blk}.ff2")
            x[side] = nm.add(x[side], nm.mul(g2, h))

    outs = []
    for side in SIDES:
        outs.append(_affine(nm.layer_norm(x[side]), params, f"den.{side}.out"))
    return outs[0], outs[1]
