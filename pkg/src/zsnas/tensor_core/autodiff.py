"""Gradient helpers built on the tape: flat gradients, Hessian-vector products,
and central finite differences used as independent oracles."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import GradientError, Tensor, backward, zero_grad

LossClosure = Callable[[], Tensor]


def gradients(loss_fn: LossClosure, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Run ``loss_fn`` once and return dL/dp for each param (zeros where unreachable)."""
    zero_grad(params)
    loss = loss_fn()
    backward(loss)
    grads = [p.grad.copy() if p.grad is not None else np.zeros(p.shape) for p in params]
    zero_grad(params)
    return grads


def flatten(arrays: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(a) for a in arrays]) if arrays else np.zeros(0)


def unflatten(vec: np.ndarray, like: Sequence[Tensor]) -> list[np.ndarray]:
    out, start = [], 0
    for p in like:
        out.append(vec[start:start + p.size].reshape(p.shape))
        start += p.size
    return out


def hvp(loss_fn: LossClosure, params: Sequence[Tensor], direction: np.ndarray,
        epsilon: float | None = None) -> np.ndarray:
    """Hessian-vector product by central differences of the gradient.

    Returns ``(grad L(theta + eps v) - grad L(theta - eps v)) / (2 eps)``.
    Parameters are restored bit-for-bit before returning.
    """
    direction = np.asarray(direction, dtype=np.float64)
    total = sum(p.size for p in params)
    if direction.shape != (total,):
        raise ValueError(f"direction has length {direction.size}, expected {total}")
    originals = [p.data.copy() for p in params]
    if epsilon is None:
        epsilon = 1e-3 * (1.0 + max(float(np.abs(o).max(initial=0.0)) for o in originals))
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not np.any(direction):
        return np.zeros(total)

    steps = unflatten(direction, params)
    try:
        for p, o, s in zip(params, originals, steps):
            p.data = o + epsilon * s
        g_plus = flatten(gradients(loss_fn, params))
        for p, o, s in zip(params, originals, steps):
            p.data = o - epsilon * s
        g_minus = flatten(gradients(loss_fn, params))
    finally:
        for p, o in zip(params, originals):
            p.data = o
    result = (g_plus - g_minus) / (2.0 * epsilon)
    if not np.all(np.isfinite(result)):
        raise GradientError("Hessian-vector product is not finite", op="hvp")
    return result


def numerical_gradient(f: Callable[[], float], tensor: Tensor, rel_step: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` w.r.t. every entry of ``tensor``.

    Step per entry is ``rel_step * (1 + |theta|)``.
    """
    flat = tensor.data.reshape(-1)
    out = np.zeros(flat.size)
    for k in range(flat.size):
        orig = flat[k]
        h = rel_step * (1.0 + abs(orig))
        flat[k] = orig + h
        fp = f()
        flat[k] = orig - h
        fm = f()
        flat[k] = orig
        out[k] = (fp - fm) / (2.0 * h)
    return out.reshape(tensor.shape)
