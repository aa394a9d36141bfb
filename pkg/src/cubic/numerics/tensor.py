"""Dense float tensors with reverse-mode automatic differentiation.

Small numpy-backed substrate: each op records a closure that propagates the
vector-Jacobian product to its parents. Values are float32 by default; the
test suite can switch to float64 via `use_dtype`. Every primitive validates
that its output is finite (NaN/Inf is an error state, not a value).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes incompatible for the named op."""


class NonFiniteError(FloatingPointError):
    """A primitive produced NaN or Inf."""


_state = {"dtype": np.float32, "grad": True, "finite_checks": True}


def default_dtype():
    return _state["dtype"]


@contextlib.contextmanager
def use_dtype(dtype):
    """Temporarily switch the default dtype (float64 for tight grad checks)."""
    prev = _state["dtype"]
    _state["dtype"] = np.dtype(dtype).type
    try:
        yield
    finally:
        _state["dtype"] = prev


@contextlib.contextmanager
def no_grad():
    """Disable tape recording; ops return constant tensors (fast inference)."""
    prev = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = prev


def grad_enabled() -> bool:
    return _state["grad"]


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not _state["finite_checks"]:
        return
    # Summing is a cheap full scan; NaN/Inf in any element poisons the total.
    total = float(arr.sum())
    if not np.isfinite(total):
        if np.isfinite(arr).all():
            return  # finite values whose sum overflowed; not an error state
        raise NonFiniteError(f"{op}: non-finite values in result of shape {arr.shape}")


class Tensor:
    """Immutable-by-convention dense array node in the autodiff graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype != _state["dtype"]:
            arr = arr.astype(_state["dtype"])
        self.data = arr
        self.requires_grad = bool(requires_grad) and _state["grad"]
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Replay the tape in reverse topological order, accumulating grads."""
        if grad is None:
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.asarray(grad, dtype=self.data.dtype)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operator sugar; the functional forms below are the actual primitives.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, op: str, parents: Sequence[Tensor],
          backward: Callable[[np.ndarray], None] | None) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    if _state["grad"] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _accum(p: Tensor, g: np.ndarray) -> None:
    if not p.requires_grad:
        return
    p.grad = g if p.grad is None else p.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(data, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _make(data, "sub", (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, "mul", (a, b), backward)


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)
    data = a.data * np.asarray(s, dtype=a.data.dtype)

    def backward(g):
        _accum(a, g * np.asarray(s, dtype=g.dtype))

    return _make(data, "scale", (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be >=2D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    data = np.matmul(a.data, b.data)

    def backward(g):
        _accum(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        _accum(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _make(data, "matmul", (a, b), backward)


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _make(data, "reshape", (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    data = np.transpose(a.data, axes)

    def backward(g):
        _accum(a, np.transpose(g, inv))

    return _make(data, "transpose", (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"concat: incompatible shapes {shapes}") from None
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, offsets, axis=axis)):
            _accum(t, piece)

    return _make(data, "concat", tuple(tensors), backward)


def split(a, sections: Sequence[int], axis: int = -1) -> list[Tensor]:
    """Split along an axis into pieces of the given sizes."""
    a = _as_tensor(a)
    if sum(sections) != a.shape[axis]:
        raise ShapeError(f"split: sections {list(sections)} do not cover axis {axis} of {a.shape}")
    offsets = np.cumsum(sections)[:-1]
    pieces = np.split(a.data, offsets, axis=axis)
    outs = []
    ax = axis % a.ndim
    start = 0
    for piece in pieces:
        lo = start
        hi = start + piece.shape[ax]
        start = hi

        def backward(g, lo=lo, hi=hi):
            full = np.zeros(a.shape, dtype=g.dtype)
            sl = [slice(None)] * a.ndim
            sl[ax] = slice(lo, hi)
            full[tuple(sl)] = g
            _accum(a, full)

        outs.append(_make(piece, "split", (a,), backward))
    return outs


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims, dtype=a.data.dtype)
    count = a.data.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))])

    def backward(g):
        g = np.asarray(g, dtype=a.data.dtype)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.shape) / a.data.dtype.type(count))

    return _make(np.asarray(data), "mean", (a,), backward)


def total(a, axis=None, keepdims: bool = False) -> Tensor:
    """Sum over the given axis (all elements when axis is None)."""
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims, dtype=a.data.dtype)

    def backward(g):
        g = np.asarray(g, dtype=a.data.dtype)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.shape).copy())

    return _make(np.asarray(data), "sum", (a,), backward)


# ---------------------------------------------------------------------------
# nonlinearities and normalization
# ---------------------------------------------------------------------------

_GELU_C = 0.7978845608028654  # sqrt(2/pi)


def gelu(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    x2 = x * x
    inner = _GELU_C * (x + 0.044715 * (x2 * x))
    t = np.tanh(inner)
    data = 0.5 * x * (1.0 + t)

    def backward(g):
        sech2 = 1.0 - t * t
        local = 0.5 * (1.0 + t) + 0.5 * x * sech2 * _GELU_C * (1.0 + 3 * 0.044715 * x2)
        _accum(a, g * local.astype(g.dtype))

    return _make(data.astype(x.dtype), "gelu", (a,), backward)


def softmax(a) -> Tensor:
    """Softmax over the last axis."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    w = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * w).sum(axis=-1, keepdims=True)
        _accum(a, w * (g - dot))

    return _make(w.astype(a.data.dtype), "softmax", (a,), backward)


def masked_softmax(a, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis where only mask==True keys participate.

    Excluded positions get weight exactly 0.0 (additive -inf before the
    softmax, internal to this primitive so no non-finite value escapes).
    """
    a = _as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise ShapeError("masked_softmax: a row has no allowed entries")
    neg = np.asarray(-np.inf, dtype=a.data.dtype)
    scores = np.where(mask, a.data, neg)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        e = np.exp(shifted)
    w = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * w).sum(axis=-1, keepdims=True)
        _accum(a, w * (g - dot))

    return _make(w.astype(a.data.dtype), "masked_softmax", (a,), backward)


def layer_norm(a, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean, unit variance (pre-affine).

    A zero-variance vector maps to zeros: the denominator is sqrt(var + eps).
    """
    a = _as_tensor(a)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True, dtype=x.dtype)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True, dtype=x.dtype)
    inv = 1.0 / np.sqrt(var + x.dtype.type(eps))
    y = xc * inv

    def backward(g):
        gm = g.mean(axis=-1, keepdims=True)
        gym = (g * y).mean(axis=-1, keepdims=True)
        _accum(a, (inv * (g - gm - y * gym)).astype(g.dtype))

    return _make(y.astype(x.dtype), "layer_norm", (a,), backward)


# ---------------------------------------------------------------------------
# lookups and embeddings
# ---------------------------------------------------------------------------


def embedding(table, idx: np.ndarray) -> Tensor:
    """Row lookup: out[..., :] = table[idx[...], :]."""
    table = _as_tensor(table)
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"embedding: index out of range for table {table.shape}")
    data = table.data[idx]

    def backward(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, idx, g)
        _accum(table, dt)

    return _make(data, "embedding", (table,), backward)


def sinusoidal_embedding(positions, dim: int, max_period: float = 10000.0) -> np.ndarray:
    """Sinusoidal position/timestep features: [sin(p*w_i), cos(p*w_i)].

    Pure function of the positions; callers wrap it in a constant Tensor.
    """
    if dim % 2 != 0:
        raise ShapeError(f"sinusoidal_embedding: dim must be even, got {dim}")
    pos = np.asarray(positions, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / half)
    args = pos[:, None] * freqs[None, :]
    out = np.concatenate([np.sin(args), np.cos(args)], axis=-1)
    return out.astype(_state["dtype"])


# ---------------------------------------------------------------------------
# gradient control and attention
# ---------------------------------------------------------------------------


def stop_gradient(a) -> Tensor:
    """Forward identity; contributes exactly zero to the backward pass."""
    a = _as_tensor(a)
    return _make(a.data, "stop_gradient", (), None)


def straight_through(a_q, a_z) -> Tensor:
    """Quantization pass-through: forward is exactly a_z, gradient goes to a_q.

    Fused form of a_q + sg(a_z - a_q); fusing keeps the forward bitwise equal
    to a_z instead of accumulating float rounding.
    """
    a_q, a_z = _as_tensor(a_q), _as_tensor(a_z)
    if a_q.shape != a_z.shape:
        raise ShapeError(f"straight_through: shape mismatch {a_q.shape} vs {a_z.shape}")

    def backward(g):
        _accum(a_q, g)

    return _make(a_z.data, "straight_through", (a_q,), backward)


def masked_attention(q, k, v, mask: np.ndarray, scale_factor: float | None = None) -> Tensor:
    """Attention over the trailing (S, D) axes with a boolean allow-mask.

    Output row i is a convex combination of v rows j with mask[i, j] True;
    excluded keys get weight exactly zero, so the output is bitwise
    invariant to their k/v content.
    """
    q, k, v = _as_tensor(q), _as_tensor(k), _as_tensor(v)
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"masked_attention: q/k width mismatch {q.shape} vs {k.shape}")
    if scale_factor is None:
        scale_factor = 1.0 / float(np.sqrt(q.shape[-1]))
    scores = scale(matmul(q, transpose(k, list(range(k.ndim - 2)) + [k.ndim - 1, k.ndim - 2])),
                   scale_factor)
    weights = masked_softmax(scores, mask)
    return matmul(weights, v)


# ---------------------------------------------------------------------------
# convolution (image-mode encoder)
# ---------------------------------------------------------------------------


def conv2d(x, w, b, stride: int = 1, padding: int = 0) -> Tensor:
    """2D convolution. x: (B, C, H, W); w: (O, C, kh, kw); b: (O,)."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d: incompatible shapes {x.shape} and {w.shape}")
    bsz, cin, hin, win = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    hout = (hin + 2 * padding - kh) // stride + 1
    wout = (win + 2 * padding - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]  # (B, C, ho, wo, kh, kw)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(bsz, hout * wout, cin * kh * kw)
    wmat = w.data.reshape(cout, cin * kh * kw)
    out = np.matmul(cols, wmat.T) + b.data  # (B, ho*wo, O)
    out = out.transpose(0, 2, 1).reshape(bsz, cout, hout, wout)

    def backward(g):
        gmat = g.reshape(bsz, cout, hout * wout).transpose(0, 2, 1)  # (B, ho*wo, O)
        if w.requires_grad:
            dw = np.einsum("bpo,bpk->ok", gmat, cols).reshape(w.shape)
            _accum(w, dw.astype(g.dtype))
        if b.requires_grad:
            _accum(b, gmat.sum(axis=(0, 1)).astype(g.dtype))
        if x.requires_grad:
            dcols = np.matmul(gmat, wmat)  # (B, ho*wo, C*kh*kw)
            dcols = dcols.reshape(bsz, hout, wout, cin, kh, kw)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i:i + stride * hout:stride, j:j + stride * wout:stride] += \
                        dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            if padding:
                dxp = dxp[:, :, padding:-padding, padding:-padding]
            _accum(x, dxp)

    return _make(out.astype(x.data.dtype), "conv2d", (x, w, b), backward)
