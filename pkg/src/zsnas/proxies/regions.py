"""Activation-pattern proxies: number of linear regions and Logdet."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..archspace.network import Context, Trace
from ..linalg import lu_logabsdet
from .config import Batch, ProxyConfig, ProxyError, Sentinel, as_input, frozen, make_batch


def activation_codes(net, cfg: ProxyConfig, batch: Batch | None = None) -> np.ndarray:
    """Binary code per sample: the concatenated ReLU on/off masks, shape (B, N_A)."""
    batch = batch if batch is not None else make_batch(cfg, net.input_shape, net.num_classes)
    trace = Trace()
    with frozen(net.tensors()):
        net.forward(as_input(batch.x), Context(trace=trace))
    if not trace.relu_masks:
        raise ProxyError("network has no ReLU units")
    b = batch.x.shape[0]
    masks = [m.reshape(b, -1) for _, in_cell, m in trace.relu_masks if in_cell or cfg.region_layers == "all"]
    # a cell without ReLUs gives empty codes: every sample shares the one (empty) pattern
    return np.concatenate(masks, axis=1) if masks else np.zeros((b, 0), dtype=bool)


def hamming_kernel(codes: np.ndarray) -> np.ndarray:
    """``N_A - d_H(c_s, c_t)``: positions where two codes agree."""
    c = np.asarray(codes, dtype=np.float64)
    return c @ c.T + (1.0 - c) @ (1.0 - c).T


def pattern_match_matrix(codes: np.ndarray) -> np.ndarray:
    """``11^T - sign[z(1-z)^T + (1-z)z^T]``: 1 where two samples share a pattern."""
    z = np.asarray(codes, dtype=np.float64)
    diff = z @ (1.0 - z).T + (1.0 - z) @ z.T
    return 1.0 - np.sign(diff)


def regions_from_codes(codes: np.ndarray) -> float:
    r = pattern_match_matrix(codes)
    # exact rational sum so the result is integer-valued
    total = sum((Fraction(1, int(round(row.sum()))) for row in r), Fraction(0))
    return float(total)


def logdet_from_codes(codes: np.ndarray) -> float | Sentinel:
    logdet, singular = lu_logabsdet(hamming_kernel(codes))
    return Sentinel.SINGULAR if singular else logdet


def num_linear_regions(net, cfg: ProxyConfig, batch: Batch | None = None) -> float:
    return regions_from_codes(activation_codes(net, cfg, batch))


def logdet_score(net, cfg: ProxyConfig, batch: Batch | None = None) -> float | Sentinel:
    return logdet_from_codes(activation_codes(net, cfg, batch))
