"""Differentiable primitives over :class:`Tensor`.

Every op computes its forward value with numpy and, when any input requires a
gradient, attaches an adjoint closure. Convolutions use im2col so a single
BLAS call does the heavy lifting in both directions.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor

BN_VARIANCE_FLOOR = 1e-5


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _pad_hw(a: np.ndarray, p: int) -> np.ndarray:
    """Zero-pad the last two axes by ``p`` (cheaper than np.pad for small arrays)."""
    out = np.zeros(a.shape[:-2] + (a.shape[-2] + 2 * p, a.shape[-1] + 2 * p))
    out[..., p:p + a.shape[-2], p:p + a.shape[-1]] = a
    return out


def _im2col(xpc: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Columns of shape (C*kh*kw, N*Ho*Wo) from a channel-major (C, N, Hp, Wp) padded input."""
    c, n = xpc.shape[:2]
    cols = np.empty((c, kh, kw, n, ho, wo))
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xpc[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(c * kh * kw, n * ho * wo)


def _col2im(cols: np.ndarray, shape: tuple[int, int, int, int], kh: int, kw: int,
            stride: int, ho: int, wo: int) -> np.ndarray:
    c, n, hp, wp = shape
    cols = cols.reshape(c, kh, kw, n, ho, wo)
    out = np.zeros(shape)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, i, j]
    return out


def conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation, NCHW input and OIHW weight, no bias."""
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d needs stride >= 1 and padding >= 0, got stride={stride} padding={padding}")
    n, c, h, w = x.shape
    o, ci, kh, kw = weight.shape
    if c != ci:
        raise ShapeError(f"conv2d channel mismatch: input has C={c} but weight expects I={ci}")
    ho, wo = _out_size(h, kh, stride, padding), _out_size(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d output would be empty: input {h}x{w}, kernel {kh}x{kw}, padding {padding}")

    xpc = x.data.transpose(1, 0, 2, 3)
    if padding:
        xpc = _pad_hw(xpc, padding)
    if kh == 1 and kw == 1 and stride == 1:
        cols = np.ascontiguousarray(xpc).reshape(c, n * ho * wo)
    else:
        cols = _im2col(xpc, kh, kw, stride, ho, wo)
    wmat = weight.data.reshape(o, -1)
    out = (wmat @ cols).reshape(o, n, ho, wo).transpose(1, 0, 2, 3)

    def backward(g):
        gmat = g.transpose(1, 0, 2, 3).reshape(o, -1)
        gw = (gmat @ cols.T).reshape(weight.shape) if weight.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = wmat.T @ gmat
            if kh == 1 and kw == 1 and stride == 1:
                gxpc = gcols.reshape(c, n, ho, wo)
            else:
                gxpc = _col2im(gcols, xpc.shape, kh, kw, stride, ho, wo)
            if padding:
                gxpc = gxpc[:, :, padding:padding + h, padding:padding + w]
            gx = gxpc.transpose(1, 0, 2, 3)
        return gx, gw

    # out stays a channel-major view; the next conv reads it without a copy
    return Tensor.from_op(out, "conv2d", (x, weight), backward)


def linear(x: Tensor, weight: Tensor) -> Tensor:
    """``x @ weight.T`` for x of shape (N, F) and weight (O, F)."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear shape mismatch: input {x.shape}, weight {weight.shape}")

    def backward(g):
        return g @ weight.data, g.T @ x.data

    return Tensor.from_op(x.data @ weight.data.T, "linear", (x, weight), backward)


def relu(x: Tensor) -> Tensor:
    """Rectifier. The output carries ``meta['mask']``: True where the input was positive."""
    mask = x.data > 0
    out = Tensor.from_op(np.where(mask, x.data, 0.0), "relu", (x,), lambda g: (g * mask,))
    out.meta["mask"] = mask
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add needs equal shapes, got {a.shape} and {b.shape}")
    return Tensor.from_op(a.data + b.data, "add", (a, b), lambda g: (g, g))


def add_n(tensors) -> Tensor:
    tensors = list(tensors)
    out = tensors[0]
    for t in tensors[1:]:
        out = add(out, t)
    return out


def scale(x: Tensor, c: float) -> Tensor:
    return Tensor.from_op(x.data * c, "scale", (x,), lambda g: (g * c,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul needs equal shapes, got {a.shape} and {b.shape}")
    return Tensor.from_op(a.data * b.data, "mul", (a, b), lambda g: (g * b.data, g * a.data))


def sum_all(x: Tensor) -> Tensor:
    return Tensor.from_op(np.array(x.data.sum()), "sum_all", (x,), lambda g: (np.full(x.shape, float(g)),))


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar ``sum(x * weights)`` with a constant weight array."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != x.shape:
        raise ShapeError(f"weighted_sum weights {weights.shape} do not match input {x.shape}")
    return Tensor.from_op(np.array((x.data * weights).sum()), "weighted_sum", (x,),
                          lambda g: (float(g) * weights,))


def avgpool2d(x: Tensor, kernel: int, stride: int | None = None, padding: int = 0,
              count_include_pad: bool = False) -> Tensor:
    stride = kernel if stride is None else stride
    n, c, h, w = x.shape
    ho, wo = _out_size(h, kernel, stride, padding), _out_size(w, kernel, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"avgpool2d output would be empty for input {h}x{w}")
    xp = _pad_hw(x.data, padding) if padding else x.data
    win = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    if count_include_pad or padding == 0:
        counts = np.full((ho, wo), float(kernel * kernel))
    else:
        ones = np.pad(np.ones((h, w)), padding)
        counts = sliding_window_view(ones, (kernel, kernel))[::stride, ::stride][:ho, :wo].sum(axis=(2, 3))
    out = win.sum(axis=(4, 5)) / counts

    def backward(g):
        gs = g / counts
        gxp = np.zeros(xp.shape)
        for i in range(kernel):
            for j in range(kernel):
                gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += gs
        return (gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp,)

    return Tensor.from_op(out, "avgpool2d", (x,), backward)


def global_avgpool(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    return Tensor.from_op(x.data.mean(axis=(2, 3)), "global_avgpool", (x,),
                          lambda g: (np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).copy(),))


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor) -> tuple[Tensor, np.ndarray]:
    """Batch-statistics normalisation over (N, H, W) per channel.

    Returns the output and the per-channel batch variances. Channels whose
    variance falls below the floor are normalised by the floor instead and
    listed in ``out.meta['clamped']``.
    """
    if x.data.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batchnorm2d shape mismatch: input {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    m = x.shape[0] * x.shape[2] * x.shape[3]
    # sum/m instead of .mean(): same arithmetic, much less call overhead on small tensors
    xc = x.data - x.data.sum(axis=(0, 2, 3), keepdims=True) / m
    var = (xc * xc).sum(axis=(0, 2, 3)) / m
    clamped = var < BN_VARIANCE_FLOOR
    denom = np.sqrt(np.maximum(var, BN_VARIANCE_FLOOR))
    xhat = xc / denom[None, :, None, None]
    g4 = gamma.data[None, :, None, None]
    out = g4 * xhat + beta.data[None, :, None, None]

    def backward(g):
        ggamma = (g * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gbeta = g.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = g * g4
            mean_g = gxhat.sum(axis=(0, 2, 3), keepdims=True) / m
            mean_gx = (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True) / m
            # clamped channels treat the variance as a constant
            live = (~clamped)[None, :, None, None]
            gx = (gxhat - mean_g - np.where(live, xhat * mean_gx, 0.0)) / denom[None, :, None, None]
        return gx, ggamma, gbeta

    result = Tensor.from_op(out, "batchnorm2d", (x, gamma, beta), backward)
    result.meta["variance"] = var
    result.meta["clamped"] = np.flatnonzero(clamped)
    result.meta["count"] = m
    return result, var


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean cross-entropy of softmax(logits) against integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,) or labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ShapeError(f"labels must be {n} integers in [0, {k}), got shape {labels.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = (logsum - z[np.arange(n), labels]).mean()
    probs = np.exp(z - logsum[:, None])

    def backward(g):
        d = probs.copy()
        d[np.arange(n), labels] -= 1.0
        return (d * (float(g) / n),)

    return Tensor.from_op(np.array(loss), "softmax_cross_entropy", (logits,), backward)
