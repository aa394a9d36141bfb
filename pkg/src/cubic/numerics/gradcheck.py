"""Finite-difference gradient oracle, independent of the autodiff tape."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import NonFiniteError, Tensor, use_dtype


def finite_diff_grad(f: Callable[[Tensor], "Tensor | float"], x: Tensor,
                     eps: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of a scalar-valued f at x.

    f must be deterministic; eps should sit in [1e-5, 1e-2]. Evaluation runs
    in float64 so the estimate is limited by truncation, not storage width.
    """
    if not (1e-5 <= eps <= 1e-2):
        raise ValueError(f"finite_diff_grad: eps {eps} outside [1e-5, 1e-2]")

    def evaluate(arr: np.ndarray) -> float:
        with use_dtype(np.float64):
            out = f(Tensor(arr))
        val = out.item() if isinstance(out, Tensor) else float(out)
        if not np.isfinite(val):
            raise NonFiniteError("finite_diff_grad: f returned a non-finite value")
        return val

    base = np.array(x.data, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = evaluate(base)
        flat[i] = orig - eps
        lo = evaluate(base)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-3) -> float:
    """Elementwise |a-b| / max(|a|, |b|, floor), reduced with max."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def check_gradients(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-3,
                    rtol: float = 1e-2) -> float:
    """Compare the tape gradient of f at x against finite differences.

    Returns the max relative error; raises AssertionError above rtol.
    """
    xt = Tensor(np.array(x.data), requires_grad=True)
    out = f(xt)
    out.backward()
    fd = finite_diff_grad(f, x, eps=eps)
    err = max_relative_error(xt.grad, fd)
    if err > rtol:
        raise AssertionError(f"gradient mismatch: max relative error {err:.3e} > {rtol:.1e}")
    return err
