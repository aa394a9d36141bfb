"""Dual-codebook quantization with a shared index per token.

Both arms' latent tokens are quantized by one jointly selected index per
residual level: the entry pair minimizing the summed left+right squared
distance. The shared index is what couples the two perception streams; an
ablation flag falls back to independent per-arm argmins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .numerics import Tensor

straight_through = nm.straight_through


@dataclass(frozen=True)
class CodebookConfig:
    entries: int = 256          # K
    dim: int = 32               # d_z (equal to the token width d)
    levels: int = 2             # RVQ depth
    beta: float = 0.25          # commitment weight
    shared_mapping: bool = True
    init_std: float = 0.1
    reservoir: int = 1024       # recent paired outputs kept for dead-code reinit


@dataclass
class CodebookPair:
    """Per-level left/right codebooks plus usage stats and a donor reservoir."""

    cfg: CodebookConfig
    left: list[Tensor]
    right: list[Tensor]
    usage: list[np.ndarray]
    recent: list[np.ndarray] = field(repr=False, default_factory=list)

    def params(self) -> dict[str, Tensor]:
        out = {}
        for lv in range(self.cfg.levels):
            out[f"codebook.left.{lv}"] = self.left[lv]
            out[f"codebook.right.{lv}"] = self.right[lv]
        return out

    def reset_usage(self) -> None:
        for u in self.usage:
            u[:] = 0

    def pin_zero_entry(self) -> None:
        """Entry 0 of every level stays the zero vector (residual floor)."""
        for lv in range(self.cfg.levels):
            self.left[lv].data[0] = 0.0
            self.right[lv].data[0] = 0.0


def init_codebooks(cfg: CodebookConfig, rng: np.random.Generator) -> CodebookPair:
    left, right, usage, recent = [], [], [], []
    for _ in range(cfg.levels):
        zl = rng.normal(0.0, cfg.init_std, size=(cfg.entries, cfg.dim)).astype(np.float32)
        zr = rng.normal(0.0, cfg.init_std, size=(cfg.entries, cfg.dim)).astype(np.float32)
        zl[0] = 0.0
        zr[0] = 0.0
        left.append(Tensor(zl, requires_grad=True))
        right.append(Tensor(zr, requires_grad=True))
        usage.append(np.zeros(cfg.entries, dtype=np.int64))
        recent.append(np.zeros((0, 2, cfg.dim), dtype=np.float32))
    return CodebookPair(cfg, left, right, usage, recent)


def _pair_distances(q: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Squared distances between rows of q (T, d) and entries z (K, d).

    Expanded form (|q|^2 - 2 q.z + |z|^2) to stay matmul-bound; tiny negative
    values from cancellation are clipped at zero.
    """
    q = q.astype(np.float64, copy=False)
    z = z.astype(np.float64, copy=False)
    d = (q * q).sum(axis=1)[:, None] - 2.0 * (q @ z.T) + (z * z).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def _exact_distance(q: np.ndarray, z_sel: np.ndarray) -> np.ndarray:
    diff = q.astype(np.float64) - z_sel.astype(np.float64)
    return np.sum(diff * diff, axis=-1)


def shared_nearest(q_left: np.ndarray, q_right: np.ndarray,
                   z_left: np.ndarray, z_right: np.ndarray):
    """Joint nearest entry: argmin_i of d_left[i] + d_right[i], lowest index wins.

    Accepts single vectors (d,) or stacks (T, d); returns (indices, d_left,
    d_right) with the selected distances re-evaluated exactly, so an exact
    codebook hit reports a distance of literal zero.
    """
    single = q_left.ndim == 1
    ql = np.atleast_2d(q_left)
    qr = np.atleast_2d(q_right)
    dl = _pair_distances(ql, z_left)
    dr = _pair_distances(qr, z_right)
    idx = np.argmin(dl + dr, axis=1)
    d_left = _exact_distance(ql, z_left[idx])
    d_right = _exact_distance(qr, z_right[idx])
    if single:
        return int(idx[0]), float(d_left[0]), float(d_right[0])
    return idx, d_left, d_right


def _independent_nearest(q: np.ndarray, z: np.ndarray):
    d = _pair_distances(np.atleast_2d(q), z)
    idx = np.argmin(d, axis=1)
    return idx, _exact_distance(np.atleast_2d(q), z[idx])


@dataclass
class QuantResult:
    a_z_left: Tensor            # (B, N, d) straight-through quantized values
    a_z_right: Tensor
    indices_left: np.ndarray    # (B, N, levels) int
    indices_right: np.ndarray   # equal to indices_left under shared mapping
    residual_norms: np.ndarray  # (levels, 2) mean residual norm after each level
    vq_loss: Tensor             # scalar, Eq-style codebook + commitment objective

    @property
    def indices(self) -> np.ndarray:
        return self.indices_left


def vq_loss(a_q: Tensor, a_z: Tensor, beta: float) -> Tensor:
    """Codebook pull plus beta-weighted commitment, mean over leading axes.

    ||sg[a_q] - a_z||^2 trains the entries; beta * ||a_q - sg[a_z]||^2 pulls
    the encoder toward its selection. Squared norms are summed over the
    feature axis and averaged over tokens/batch.
    """
    diff_code = nm.sub(a_z, nm.stop_gradient(a_q))
    diff_commit = nm.sub(a_q, nm.stop_gradient(a_z))
    per_tok_code = nm.total(nm.mul(diff_code, diff_code), axis=-1)
    per_tok_commit = nm.total(nm.mul(diff_commit, diff_commit), axis=-1)
    return nm.add(nm.mean(per_tok_code), nm.scale(nm.mean(per_tok_commit), beta))


def rvq_quantize(a_q_left: Tensor, a_q_right: Tensor, books: CodebookPair,
                 update_stats: bool = True) -> QuantResult:
    """Residual quantization with one shared index per token per level.

    Residuals are recursed on forward values (entries detached), so codebooks
    receive gradients only from their own level's vq term.
    """
    cfg = books.cfg
    bsz, n_tok, d = a_q_left.shape
    flat = bsz * n_tok
    res_left = a_q_left
    res_right = a_q_right
    idx_left = np.zeros((flat, cfg.levels), dtype=np.int64)
    idx_right = np.zeros((flat, cfg.levels), dtype=np.int64)
    norms = np.zeros((cfg.levels, 2), dtype=np.float64)
    sum_left: Tensor | None = None
    sum_right: Tensor | None = None
    loss: Tensor | None = None

    for lv in range(cfg.levels):
        rl = nm.reshape(res_left, (flat, d))
        rr = nm.reshape(res_right, (flat, d))
        if cfg.shared_mapping:
            idx, _, _ = shared_nearest(rl.data, rr.data, books.left[lv].data,
                                       books.right[lv].data)
            il = ir = idx
        else:
            il, _ = _independent_nearest(rl.data, books.left[lv].data)
            ir, _ = _independent_nearest(rr.data, books.right[lv].data)
        idx_left[:, lv] = il
        idx_right[:, lv] = ir
        ent_left = nm.embedding(books.left[lv], il)
        ent_right = nm.embedding(books.right[lv], ir)
        lv_loss = nm.add(vq_loss(rl, ent_left, cfg.beta), vq_loss(rr, ent_right, cfg.beta))
        loss = lv_loss if loss is None else nm.add(loss, lv_loss)
        sum_left = ent_left if sum_left is None else nm.add(sum_left, ent_left)
        sum_right = ent_right if sum_right is None else nm.add(sum_right, ent_right)
        res_left = nm.sub(rl, nm.stop_gradient(ent_left))
        res_right = nm.sub(rr, nm.stop_gradient(ent_right))
        norms[lv, 0] = float(np.linalg.norm(res_left.data, axis=-1).mean()) if flat else 0.0
        norms[lv, 1] = float(np.linalg.norm(res_right.data, axis=-1).mean()) if flat else 0.0
        if update_stats:
            np.add.at(books.usage[lv], il, 1)
            np.add.at(books.usage[lv], ir, 1)
            paired = np.stack([rl.data, rr.data], axis=1)  # pre-subtraction inputs
            books.recent[lv] = np.concatenate([books.recent[lv], paired])[-cfg.reservoir:]

    flat_ql = nm.reshape(a_q_left, (flat, d))
    flat_qr = nm.reshape(a_q_right, (flat, d))
    a_z_left = nm.reshape(nm.straight_through(flat_ql, sum_left), (bsz, n_tok, d))
    a_z_right = nm.reshape(nm.straight_through(flat_qr, sum_right), (bsz, n_tok, d))
    return QuantResult(
        a_z_left=a_z_left,
        a_z_right=a_z_right,
        indices_left=idx_left.reshape(bsz, n_tok, cfg.levels),
        indices_right=idx_right.reshape(bsz, n_tok, cfg.levels),
        residual_norms=norms,
        vq_loss=loss,
    )


def codebook_stats(books: CodebookPair) -> dict[str, float]:
    """Perplexity and usage fraction over the epoch's index counts."""
    perps, used = [], []
    for u in books.usage:
        tot = u.sum()
        if tot == 0:
            perps.append(0.0)
            used.append(0.0)
            continue
        p = u / tot
        nz = p[p > 0]
        perps.append(float(np.exp(-(nz * np.log(nz)).sum())))
        used.append(float((u > 0).mean()))
    return {"perplexity": float(np.mean(perps)), "usage": float(np.mean(used))}


def reinit_dead_codes(books: CodebookPair, rng: np.random.Generator) -> int:
    """Resample entries unused in the last epoch from recent paired outputs.

    A dead index gets a (q_left, q_right) pair donated by one recent token,
    preserving the joint-distribution reading of the two books. Entry 0 is
    pinned to zero and never resampled. Returns the number of reinits.
    """
    cfg = books.cfg
    reinits = 0
    for lv in range(cfg.levels):
        pool = books.recent[lv]
        if len(pool) == 0:
            continue
        dead = np.flatnonzero(books.usage[lv][1:] == 0) + 1
        for i in dead:
            donor = pool[int(rng.integers(len(pool)))]
            books.left[lv].data[i] = donor[0]
            books.right[lv].data[i] = donor[1]
            reinits += 1
        books.usage[lv][:] = 0
    return reinits
