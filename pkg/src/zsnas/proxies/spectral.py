"""Input-Jacobian correlation, Zen-score and NTK condition number."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..archspace.network import Context, Trace
from ..linalg import jacobi_eigenvalues
from ..tensor_core import BN_VARIANCE_FLOOR, RngState, backward, sum_all, weighted_sum, zero_grad
from .config import Batch, ProxyConfig, ProxyError, Sentinel, as_input, frozen, make_batch

NTK_FLOOR = 1e-12
PSD_TOL = 1e-8


def jacobian_correlation(jac: np.ndarray) -> np.ndarray:
    """Row-centred covariance of the Jacobian rows, normalised to unit diagonal."""
    jac = np.asarray(jac, dtype=np.float64)
    centred = jac - jac.mean(axis=1, keepdims=True)
    g = centred @ centred.T
    diag = np.diag(g).copy()
    bad = np.flatnonzero(diag <= 0.0)
    if bad.size:
        raise ProxyError(f"degenerate Jacobian row for sample {int(bad[0])}", sample=int(bad[0]))
    d = np.sqrt(diag)
    gamma = g / np.outer(d, d)
    gamma = 0.5 * (gamma + gamma.T)
    np.fill_diagonal(gamma, 1.0)
    return gamma


def jacob_cov_from_jacobian(jac: np.ndarray, epsilon: float = 1e-5, diagnostics: dict | None = None) -> float:
    gamma = jacobian_correlation(jac)
    lam = jacobi_eigenvalues(gamma)
    b = gamma.shape[0]
    if abs(lam.sum() - b) > 1e-8 or abs(np.trace(gamma) - b) > 1e-8:
        raise ProxyError(f"correlation spectrum sums to {lam.sum()!r}, expected {b}")
    if diagnostics is not None:
        diagnostics["eigenvalues"] = lam.tolist()
    shifted = lam + epsilon
    return float(-np.sum(shifted + 1.0 / shifted))


def input_jacobian(net, x: np.ndarray) -> np.ndarray:
    """Rows are d(sum of all outputs)/d(x_i), flattened per sample."""
    xt = as_input(x, requires_grad=True)
    with frozen(net.tensors()):
        out = sum_all(net.forward(xt))
        if not out.requires_grad:  # output cut off from the input: the Jacobian is exactly zero
            return np.zeros((x.shape[0], int(np.prod(x.shape[1:]))))
        backward(out)
    return xt.grad.reshape(x.shape[0], -1)


def jacob_cov(net, cfg: ProxyConfig, batch: Batch | None = None, diagnostics: dict | None = None) -> float:
    if cfg.batch_size < 2 and batch is None:
        raise ProxyError("jacob_cov needs batch_size >= 2")
    batch = batch if batch is not None else make_batch(cfg, net.input_shape, net.num_classes)
    return jacob_cov_from_jacobian(input_jacobian(net, batch.x), cfg.epsilon, diagnostics)


Extractor = Callable[[np.ndarray], "tuple[np.ndarray, list[np.ndarray]]"]


def zen_from_extractor(extract: Extractor, input_shape, batch_size: int, alpha: float, repeats: int,
                       rng: RngState, reinit: Callable[[RngState], None] | None = None,
                       diagnostics: dict | None = None) -> float:
    """log E||f(n) - f(n + alpha*eps)||_F plus the BN variance term.

    ``extract`` maps an input array to (features, per-layer BN variances).
    The BN term ``sum_i log sqrt(mean_j var_ij)`` is taken from the clean
    forward and averaged over repeats. A layer whose mean variance is below
    the BN clamp (constant input, e.g. an all-``none`` cell) uses the clamp.
    """
    deltas, bn_terms, floor_hits = [], [], 0
    for r in range(repeats):
        if reinit is not None:
            reinit(rng)
        n = rng.normal((batch_size, *input_shape))
        eps = rng.normal((batch_size, *input_shape))
        clean, variances = extract(n)
        noisy, _ = extract(n + alpha * eps)
        deltas.append(float(np.linalg.norm((clean - noisy).ravel())))
        means = [float(np.mean(v)) for v in variances]
        floor_hits += sum(m < BN_VARIANCE_FLOOR for m in means)
        bn_terms.append(sum(0.5 * math.log(max(m, BN_VARIANCE_FLOOR)) for m in means))
    mean_delta = float(np.mean(deltas))
    if not mean_delta > 0.0 or not np.isfinite(mean_delta):
        raise ProxyError("degenerate feature extractor: perturbation response is zero")
    if diagnostics is not None:
        diagnostics["expressivity"] = math.log(mean_delta)
        diagnostics["bn_term"] = float(np.mean(bn_terms))
        if floor_hits:
            diagnostics["bn_floor_hits"] = floor_hits
    return math.log(mean_delta) + float(np.mean(bn_terms))


def zen_score(net, cfg: ProxyConfig, diagnostics: dict | None = None) -> float:
    """Zen-score on the feature extractor (no final pooling / classifier)."""
    snap = net.snapshot()
    weights = net.weights()

    def extract(x):
        trace = Trace()
        out = net.features(as_input(x), Context(trace=trace))
        return out.data, [v for _, v in trace.bn_variances]

    def reinit(rng):
        for p in weights:
            p.tensor.data = rng.normal(p.tensor.shape)

    try:
        with frozen(net.tensors()):
            return zen_from_extractor(extract, net.input_shape, cfg.batch_size, cfg.zen_alpha, cfg.zen_repeats,
                                      RngState(cfg.seed).derive("zen"),
                                      reinit if cfg.zen_gaussian_init else None, diagnostics)
    finally:
        net.restore(snap)


def ntk_gram(net, x: np.ndarray) -> np.ndarray:
    """K = J J^T where row s of J is d(sum of logits of sample s)/d(all params)."""
    tensors = net.tensors()
    zero_grad(tensors)
    logits = net.forward(as_input(x))
    m = x.shape[0]
    rows = []
    for s in range(m):
        sel = np.zeros(logits.shape)
        sel[s] = 1.0
        zero_grad(tensors)
        backward(weighted_sum(logits, sel))
        rows.append(np.concatenate([(t.grad if t.grad is not None else np.zeros(t.shape)).ravel() for t in tensors]))
    zero_grad(tensors)
    jac = np.stack(rows)
    k = jac @ jac.T
    return 0.5 * (k + k.T)


def condition_from_gram(k: np.ndarray, diagnostics: dict | None = None) -> float | Sentinel:
    lam = jacobi_eigenvalues(k)
    lo, hi = lam[0], lam[-1]
    if lo < -PSD_TOL * max(hi, 0.0):
        raise ProxyError(f"NTK Gram matrix is not PSD: min eigenvalue {lo!r}, max {hi!r}")
    if diagnostics is not None:
        diagnostics.setdefault("ntk_eigen_extremes", []).append([float(lo), float(hi)])
    if hi <= 0.0 or lo <= NTK_FLOOR * hi:
        if diagnostics is not None:
            diagnostics["eigen_floor_hits"] = diagnostics.get("eigen_floor_hits", 0) + 1
        return Sentinel.ILL_CONDITIONED
    return float(hi / lo)


def ntk_cond(net, cfg: ProxyConfig, diagnostics: dict | None = None) -> float | Sentinel:
    """Mean of lambda_max / lambda_min of the NTK Gram over ``ntk_seeds`` draws.

    Draw 0 uses the network's current parameters; later draws re-initialise.
    Any ill-conditioned draw makes the whole result the sentinel.
    """
    snap = net.snapshot()
    conds = []
    try:
        for e in range(cfg.ntk_seeds):
            rng = RngState(cfg.seed).derive("ntk", e)
            if e > 0:
                net.reset_parameters(rng.derive("init"))
            x = rng.derive("data").normal((cfg.ntk_batch, *net.input_shape))
            c = condition_from_gram(ntk_gram(net, x), diagnostics)
            if c is Sentinel.ILL_CONDITIONED:
                return c
            conds.append(c)
    finally:
        net.restore(snap)
    return float(np.mean(conds))
