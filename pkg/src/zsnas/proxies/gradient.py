"""Parameter- and activation-gradient proxies: grad_norm, snip, synflow, grasp, gradsign, fisher."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..archspace.network import Context, Trace
from ..tensor_core import (
    GradientError,
    Tensor,
    backward,
    flatten,
    hvp,
    scale,
    softmax_cross_entropy,
    sum_all,
    unflatten,
    zero_grad,
)
from .config import Batch, ProxyConfig, ProxyError, as_input, frozen, make_batch


def loss_of(logits: Tensor, labels: np.ndarray, cfg: ProxyConfig) -> Tensor:
    loss = softmax_cross_entropy(logits, labels) if cfg.loss == "cross_entropy" else sum_all(logits)
    return loss if cfg.loss_scale == 1.0 else scale(loss, cfg.loss_scale)


def _batch(net, cfg: ProxyConfig, batch: Batch | None) -> Batch:
    return batch if batch is not None else make_batch(cfg, net.input_shape, net.num_classes)


@dataclass
class GradientPass:
    """One forward+backward with the configured loss, shared by grad_norm, snip and fisher."""

    names: list[str]
    weights: list[np.ndarray]
    grads: list[np.ndarray | None]
    activations: list[tuple[str, np.ndarray, np.ndarray | None]]
    trace: Trace = field(default_factory=Trace)


def gradient_pass(net, cfg: ProxyConfig, batch: Batch | None = None, keep_activations: bool = False) -> GradientPass:
    batch = _batch(net, cfg, batch)
    tensors = net.tensors()
    zero_grad(tensors)
    trace = Trace()
    logits = net.forward(as_input(batch.x), Context(trace=trace, keep_activations=keep_activations))
    backward(loss_of(logits, batch.labels, cfg))
    weights = net.weights()
    grads = [None if p.tensor.grad is None else p.tensor.grad.copy() for p in weights]
    for p, g in zip(weights, grads):
        if g is not None and not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient in layer {p.name}", op=p.name)
    acts = [(name, t.data, t.grad) for name, t in trace.activations]
    zero_grad(tensors)
    for _, t in trace.activations:
        t.grad = None
    return GradientPass([p.name for p in weights], [p.tensor.data for p in weights], grads, acts, trace)


def grad_norm_from(gp: GradientPass) -> float:
    return float(sum(np.linalg.norm(g) for g in gp.grads if g is not None))


def snip_from(gp: GradientPass) -> float:
    return float(sum(abs(np.vdot(w, g)) for w, g in zip(gp.weights, gp.grads) if g is not None))


def fisher_from_activations(activations) -> tuple[float, list[str]]:
    """Sum over layers and channels of (sum over batch and space of z * dL/dz) squared.

    ``activations`` holds ``(name, z, grad)`` with channels on axis 1; layers
    whose gradient never arrived contribute 0 and are returned as flagged.
    """
    total, dead = 0.0, []
    for name, z, g in activations:
        if g is None:
            dead.append(name)
            continue
        z, g = np.asarray(z, dtype=np.float64), np.asarray(g, dtype=np.float64)
        if z.ndim < 2:
            per_channel = np.atleast_1d((z * g).sum())
        else:
            axes = tuple(i for i in range(z.ndim) if i != 1)
            per_channel = (z * g).sum(axis=axes)
        total += float((per_channel ** 2).sum())
    return total, dead


def grad_norm(net, cfg: ProxyConfig, batch: Batch | None = None) -> float:
    return grad_norm_from(gradient_pass(net, cfg, batch))


def snip(net, cfg: ProxyConfig, batch: Batch | None = None) -> float:
    return snip_from(gradient_pass(net, cfg, batch))


def fisher(net, cfg: ProxyConfig, batch: Batch | None = None, flags: list | None = None) -> float:
    gp = gradient_pass(net, cfg, batch, keep_activations=True)
    value, dead = fisher_from_activations(gp.activations)
    if flags is not None:
        flags.extend(dead)
    return value


def synflow(net, cfg: ProxyConfig, layer_products: list | None = None) -> float:
    """Signed saliency sum under the data-free protocol.

    Weights are replaced by their absolute values, BN is bypassed, the input
    is a single all-ones image and the loss is the sum of the raw outputs.
    Parameters are restored afterwards. ``layer_products`` (if given) receives
    the per-layer inner products.
    """
    snap = net.snapshot()
    weights = net.weights()
    try:
        for p in weights:
            p.tensor.data = np.abs(p.tensor.data)
        tensors = net.tensors()
        zero_grad(tensors)
        trace = Trace()
        x = as_input(np.ones((1, *net.input_shape)))
        with np.errstate(over="ignore", invalid="ignore"):
            out = net.forward(x, Context(bn=False, trace=trace, keep_activations=True))
            if not np.all(np.isfinite(out.data)):
                first = next((name for name, t in trace.activations if not np.all(np.isfinite(t.data))), "output")
                raise ProxyError(f"synflow forward overflowed at layer {first}; rescale layers before scoring",
                                 layer=first)
            try:
                backward(sum_all(out))
            except GradientError as exc:
                raise ProxyError(f"synflow backward overflowed in op {exc.op}; rescale layers before scoring",
                                 layer=exc.op) from exc
        products = [float(np.vdot(p.tensor.data, p.tensor.grad)) if p.tensor.grad is not None else 0.0
                    for p in weights]
    finally:
        net.restore(snap)
    if layer_products is not None:
        layer_products.extend(products)
    total = float(sum(products))
    if not np.isfinite(total):
        raise ProxyError("synflow score overflowed to a non-finite value")
    return total


def grasp_from_closure(loss_fn, params, epsilon: float | None = None) -> float:
    """``-<H g, theta>`` summed over params, with ``g`` the gradient and ``H g`` by central differences."""
    zero_grad(params)
    backward(loss_fn())
    g = flatten([p.grad if p.grad is not None else np.zeros(p.shape) for p in params])
    zero_grad(params)
    if not np.any(g):
        return 0.0
    hg = hvp(loss_fn, params, g, epsilon)
    return float(-sum(np.vdot(h, p.data) for h, p in zip(unflatten(hg, params), params)))


def grasp(net, cfg: ProxyConfig, batch: Batch | None = None) -> float:
    batch = _batch(net, cfg, batch)
    weights = [p.tensor for p in net.weights()]
    others = [t for t in net.tensors() if all(t is not w for w in weights)]

    def loss_fn():
        return loss_of(net.forward(as_input(batch.x)), batch.labels, cfg)

    # BN affine parameters are held fixed; the Hessian is over conv/linear weights
    with frozen(others):
        return grasp_from_closure(loss_fn, weights, cfg.hvp_epsilon)


def gradsign_from_grads(per_sample_grads) -> float:
    """Sum over parameters of |sum over samples of sign(grad)|, with sign(0) = 0."""
    signs = np.sum([np.sign(g) for g in per_sample_grads], axis=0)
    return float(np.abs(signs).sum())


def per_sample_gradients(net, cfg: ProxyConfig, batch: Batch | None = None) -> list[np.ndarray]:
    batch = _batch(net, cfg, batch)
    weights = [p.tensor for p in net.weights()]
    tensors = net.tensors()
    out = []
    for i in range(batch.x.shape[0]):
        zero_grad(tensors)
        logits = net.forward(as_input(batch.x[i:i + 1]))
        backward(loss_of(logits, batch.labels[i:i + 1], cfg))
        g = flatten([w.grad if w.grad is not None else np.zeros(w.shape) for w in weights])
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite per-sample gradient for sample {i}", op="gradsign")
        out.append(g)
    zero_grad(tensors)
    return out


def gradsign(net, cfg: ProxyConfig, batch: Batch | None = None) -> float:
    return gradsign_from_grads(per_sample_gradients(net, cfg, batch))
