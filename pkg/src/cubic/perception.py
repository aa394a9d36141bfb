"""Multi-view observation encoding and the masked-attention aggregator.

Per-arm learnable latent tokens absorb information from their own arm's
tokens and the shared head view only; the attention mask keeps the two
arms' streams exactly decoupled while anchoring both to the head tokens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .numerics import ShapeError, Tensor


@dataclass
class Observation:
    """One perceptual snapshot (observation horizon is a single step)."""

    head_feat: np.ndarray        # (M_h, F_head)
    left_wrist_feat: np.ndarray  # (F_wrist,)
    right_wrist_feat: np.ndarray
    left_joints: np.ndarray      # (J,)
    right_joints: np.ndarray
    timestamp: int = 0


@dataclass(frozen=True)
class PerceptionConfig:
    n_latents: int = 4          # latent action tokens per arm
    token_dim: int = 32         # shared token width d
    m_head: int = 4             # head-view token count
    arm_token_count: int = 2    # wrist-average token + joint token
    layers: int = 2
    heads: int = 4
    encoder_mode: str = "feature"   # "feature" | "image"
    head_feat_dim: int = 8
    wrist_feat_dim: int = 8
    joint_dim: int = 3
    image_size: int = 32
    arm_tokens_interconnect: bool = False
    latent_init_std: float = 0.02


@dataclass
class MaskLayout:
    """Token groups and the boolean allow-matrix of the aggregator."""

    n_latents: int
    arm_token_count: int
    m_head: int
    allow: np.ndarray = field(repr=False, default=None)

    @property
    def seq_len(self) -> int:
        return 2 * (self.n_latents + self.arm_token_count) + self.m_head

    def groups(self) -> dict[str, slice]:
        n, a = self.n_latents, self.arm_token_count
        return {
            "left_latent": slice(0, n),
            "left_arm": slice(n, n + a),
            "right_latent": slice(n + a, 2 * n + a),
            "right_arm": slice(2 * n + a, 2 * n + 2 * a),
            "head": slice(2 * n + 2 * a, 2 * n + 2 * a + self.m_head),
        }


def build_mask(cfg: PerceptionConfig) -> MaskLayout:
    """Allow-sets of the unidirectional aggregation scheme.

    Latents see their own group, their arm tokens, and the head; arm tokens
    see only themselves and the head; head tokens see only head tokens.
    The diagonal is always allowed.
    """
    layout = MaskLayout(cfg.n_latents, cfg.arm_token_count, cfg.m_head)
    g = layout.groups()
    s = layout.seq_len
    allow = np.zeros((s, s), dtype=bool)
    for side in ("left", "right"):
        lat, arm = g[f"{side}_latent"], g[f"{side}_arm"]
        allow[lat, lat] = True
        allow[lat, arm] = True
        allow[lat, g["head"]] = True
        allow[arm, g["head"]] = True
        if cfg.arm_tokens_interconnect:
            allow[arm, arm] = True
    allow[g["head"], g["head"]] = True
    np.fill_diagonal(allow, True)
    layout.allow = allow
    return layout


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _linear_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32)


def _param(arr: np.ndarray) -> Tensor:
    return Tensor(arr, requires_grad=True)


def init_perception(cfg: PerceptionConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    d = cfg.token_dim
    p: dict[str, Tensor] = {}
    for side in ("left", "right"):
        p[f"latents_{side}"] = _param(
            rng.normal(0.0, cfg.latent_init_std, size=(cfg.n_latents, d)).astype(np.float32))
        p[f"joint_proj_{side}.w"] = _param(_linear_init(rng, cfg.joint_dim, d))
        p[f"joint_proj_{side}.b"] = _param(np.zeros(d, dtype=np.float32))
    if cfg.encoder_mode == "feature":
        p["head_proj.w"] = _param(_linear_init(rng, cfg.head_feat_dim, d))
        p["head_proj.b"] = _param(np.zeros(d, dtype=np.float32))
        for side in ("left", "right"):
            p[f"wrist_proj_{side}.w"] = _param(_linear_init(rng, cfg.wrist_feat_dim, d))
            p[f"wrist_proj_{side}.b"] = _param(np.zeros(d, dtype=np.float32))
    elif cfg.encoder_mode == "image":
        chans = [3, 16, 32, d]
        for name in ("head_conv", "wrist_conv_left", "wrist_conv_right"):
            for i in range(3):
                p[f"{name}.{i}.w"] = _param(
                    (rng.standard_normal((chans[i + 1], chans[i], 3, 3)) /
                     np.sqrt(chans[i] * 9)).astype(np.float32))
                p[f"{name}.{i}.b"] = _param(np.zeros(chans[i + 1], dtype=np.float32))
        p["head_proj.w"] = _param(_linear_init(rng, d, d))
        p["head_proj.b"] = _param(np.zeros(d, dtype=np.float32))
        for side in ("left", "right"):
            p[f"wrist_proj_{side}.w"] = _param(_linear_init(rng, d, d))
            p[f"wrist_proj_{side}.b"] = _param(np.zeros(d, dtype=np.float32))
    else:
        raise ValueError(f"unknown encoder mode {cfg.encoder_mode!r}")
    p["head_pos"] = _param(rng.normal(0.0, 0.02, size=(cfg.m_head, d)).astype(np.float32))
    for i in range(cfg.layers):
        pre = f"agg.{i}"
        p[f"{pre}.qkv.w"] = _param(_linear_init(rng, d, 3 * d))
        p[f"{pre}.qkv.b"] = _param(np.zeros(3 * d, dtype=np.float32))
        p[f"{pre}.out.w"] = _param(_linear_init(rng, d, d))
        p[f"{pre}.out.b"] = _param(np.zeros(d, dtype=np.float32))
        p[f"{pre}.ff1.w"] = _param(_linear_init(rng, d, 2 * d))
        p[f"{pre}.ff1.b"] = _param(np.zeros(2 * d, dtype=np.float32))
        p[f"{pre}.ff2.w"] = _param(_linear_init(rng, 2 * d, d))
        p[f"{pre}.ff2.b"] = _param(np.zeros(d, dtype=np.float32))
    return p


def swap_arm_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    """Exchange every left-tagged parameter with its right counterpart."""
    out = dict(params)
    for name in params:
        if "_left" in name:
            out[name] = params[name.replace("_left", "_right")]
            out[name.replace("_left", "_right")] = params[name]
    return out


# ---------------------------------------------------------------------------
# encoders
# ---------------------------------------------------------------------------


def _affine(x: Tensor, params: dict[str, Tensor], name: str) -> Tensor:
    return nm.add(nm.matmul(x, params[f"{name}.w"]), params[f"{name}.b"])


def embed_joints(joints: Tensor, params: dict[str, Tensor], side: str) -> Tensor:
    """Project per-arm proprioception to one token of width d."""
    return _affine(joints, params, f"joint_proj_{side}")


def _conv_stack(x: Tensor, params: dict[str, Tensor], name: str) -> Tensor:
    for i in range(3):
        x = nm.conv2d(x, params[f"{name}.{i}.w"], params[f"{name}.{i}.b"],
                      stride=2, padding=1)
        x = nm.gelu(x)
    return x  # (B, d, 4, 4) for 32x32 input


def encode_views(raw: dict[str, np.ndarray], params: dict[str, Tensor],
                 cfg: PerceptionConfig) -> tuple[Tensor, Tensor, Tensor]:
    """Encode raw views into M_h head tokens and one pooled token per wrist."""
    if cfg.encoder_mode == "feature":
        head = Tensor(raw["head_feat"])
        if head.shape[-1] != cfg.head_feat_dim or head.shape[-2] != cfg.m_head:
            raise ShapeError(
                f"encode_views: head features {head.shape} do not match "
                f"({cfg.m_head}, {cfg.head_feat_dim})")
        head_tok = _affine(head, params, "head_proj")
        left = _affine(Tensor(raw["left_wrist_feat"]), params, "wrist_proj_left")
        right = _affine(Tensor(raw["right_wrist_feat"]), params, "wrist_proj_right")
        return head_tok, left, right

    s = cfg.image_size
    for view in ("head_image", "left_wrist_image", "right_wrist_image"):
        img = raw[view]
        if img.shape[-3:] != (3, s, s):
            raise ShapeError(f"encode_views: {view} has shape {img.shape}, "
                             f"expected (..., 3, {s}, {s})")
    bsz = raw["head_image"].shape[0]
    hmap = _conv_stack(Tensor(raw["head_image"]), params, "head_conv")
    # Pool the 4x4 map into 2x2 quadrant tokens -> M_h = 4 head tokens.
    side_len = hmap.shape[-1]
    grid = nm.reshape(hmap, (bsz, hmap.shape[1], 2, side_len // 2, 2, side_len // 2))
    pooled = nm.mean(grid, axis=(3, 5))                      # (B, d, 2, 2)
    head_tok = nm.transpose(nm.reshape(pooled, (bsz, hmap.shape[1], 4)), (0, 2, 1))
    head_tok = _affine(head_tok, params, "head_proj")
    wrists = []
    for side in ("left", "right"):
        wmap = _conv_stack(Tensor(raw[f"{side}_wrist_image"]), params, f"wrist_conv_{side}")
        vec = nm.mean(nm.reshape(wmap, (bsz, wmap.shape[1], side_len * side_len)), axis=2)
        wrists.append(_affine(vec, params, f"wrist_proj_{side}"))
    return head_tok, wrists[0], wrists[1]


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def _attention(x: Tensor, params: dict[str, Tensor], pre: str, heads: int,
               allow: np.ndarray) -> Tensor:
    bsz, s, d = x.shape
    hd = d // heads
    qkv = _affine(x, params, f"{pre}.qkv")
    q, k, v = nm.split(qkv, [d, d, d], axis=-1)

    def to_heads(t):
        return nm.transpose(nm.reshape(t, (bsz, s, heads, hd)), (0, 2, 1, 3))

    q, k, v = to_heads(q), to_heads(k), to_heads(v)
    out = nm.masked_attention(q, k, v, allow, scale_factor=1.0 / np.sqrt(hd))
    out = nm.reshape(nm.transpose(out, (0, 2, 1, 3)), (bsz, s, d))
    return _affine(out, params, f"{pre}.out")


def aggregate(raw: dict[str, np.ndarray], params: dict[str, Tensor],
              cfg: PerceptionConfig, layout: MaskLayout):
    """Run the masked aggregator; returns post-attention token groups.

    Output dict holds a_q per arm (B, N, d), arm tokens c per arm
    (B, arm_token_count, d) and head tokens (B, M_h, d).
    """
    head_tok, left_wrist, right_wrist = encode_views(raw, params, cfg)
    bsz = head_tok.shape[0]
    d = cfg.token_dim
    head_tok = nm.add(head_tok, params["head_pos"])

    def expand(t: Tensor) -> Tensor:
        return nm.reshape(t, (bsz, 1, d))

    batch_zero = Tensor(np.zeros((bsz, 1, 1), dtype=np.float32))
    pieces = []
    for side, wrist in (("left", left_wrist), ("right", right_wrist)):
        lat_b = nm.add(batch_zero, params[f"latents_{side}"])  # tile over batch
        joints = embed_joints(Tensor(raw[f"{side}_joints"]), params, side)
        pieces.append(lat_b)
        pieces.append(nm.concat([expand(wrist), expand(joints)], axis=1))
    pieces.append(head_tok)
    x = nm.concat(pieces, axis=1)
    if x.shape[1] != layout.seq_len:
        raise ShapeError(f"aggregate: sequence {x.shape} does not match layout "
                         f"S={layout.seq_len}")

    for i in range(cfg.layers):
        pre = f"agg.{i}"
        h = nm.layer_norm(x)
        x = nm.add(x, _attention(h, params, pre, cfg.heads, layout.allow))
        h = nm.gelu(_affine(nm.layer_norm(x), params, f"{pre}.ff1"))
        x = nm.add(x, _affine(h, params, f"{pre}.ff2"))

    n, a, m = cfg.n_latents, cfg.arm_token_count, cfg.m_head
    parts = nm.split(x, [n, a, n, a, m], axis=1)
    return {
        "a_q_left": parts[0],
        "c_left": parts[1],
        "a_q_right": parts[2],
        "c_right": parts[3],
        "head": parts[4],
    }
