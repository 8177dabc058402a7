from __future__ import annotations

import enum
import hashlib
import json
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from ..tensor_core import RngState, Tensor


class ProxyError(RuntimeError):
    """A proxy could not produce a value for this network."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class Sentinel(str, enum.Enum):
    """Non-numeric proxy outcomes that are ranked worst, never silently numeric."""

    ILL_CONDITIONED = "ill_conditioned"
    SINGULAR = "singular"


@dataclass(frozen=True)
class ProxyConfig:
    batch_size: int = 16
    input_file: str | None = None  # .npy (x) or .npz (x, optional y); default is N(0, 1) inputs
    loss: str = "cross_entropy"  # or "sum" (sum of logits)
    loss_scale: float = 1.0
    seed: int = 0
    zen_alpha: float = 0.01
    zen_repeats: int = 8
    zen_gaussian_init: bool = True
    ntk_batch: int = 8
    ntk_seeds: int = 3
    epsilon: float = 1e-5
    region_layers: str = "cells"  # "cells": in-cell ReLUs only, "all": every ReLU
    hvp_epsilon: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.ntk_batch < 2:
            raise ValueError("ntk_batch must be >= 2")
        if self.ntk_seeds < 1 or self.zen_repeats < 1:
            raise ValueError("ntk_seeds and zen_repeats must be >= 1")
        if self.zen_alpha <= 0 or self.epsilon <= 0:
            raise ValueError("zen_alpha and epsilon must be positive")
        if self.loss not in ("cross_entropy", "sum"):
            raise ValueError(f"unknown loss '{self.loss}'")
        if self.region_layers not in ("cells", "all"):
            raise ValueError(f"unknown region_layers '{self.region_layers}'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ProxyConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown ProxyConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ProxyScore:
    arch: str
    proxy: str
    value: float | None
    fingerprint: str
    seed: int
    sentinel: str | None = None
    error: str | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_record(self) -> dict:
        rec = {"arch": self.arch, "proxy": self.proxy, "seed": self.seed, "fingerprint": self.fingerprint}
        if self.error is not None:
            rec["error"] = self.error
        elif self.sentinel is not None:
            rec["value"] = self.sentinel
        else:
            rec["value"] = self.value
        if self.diagnostics:
            rec["diagnostics"] = self.diagnostics
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> ProxyScore:
        value, sentinel = rec.get("value"), None
        if isinstance(value, str):
            sentinel, value = Sentinel(value).value, None
        return cls(arch=rec["arch"], proxy=rec["proxy"], value=None if value is None else float(value),
                   fingerprint=rec.get("fingerprint", ""), seed=int(rec.get("seed", 0)), sentinel=sentinel,
                   error=rec.get("error"), diagnostics=rec.get("diagnostics", {}))


def fingerprint(proxy: str, arch: str, macro: dict, cfg: ProxyConfig) -> str:
    from .. import __version__

    payload = {"proxy": proxy, "arch": arch, "macro": macro, "config": cfg.to_dict(), "version": __version__}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


class Batch(NamedTuple):
    x: np.ndarray
    labels: np.ndarray


def make_batch(cfg: ProxyConfig, input_shape, num_classes: int, size: int | None = None,
               stream: str = "data") -> Batch:
    """The job's input batch: N(0, I) samples (or the file batch) plus seeded uniform labels."""
    size = cfg.batch_size if size is None else size
    rng = RngState(cfg.seed).derive(stream)
    labels_rng = RngState(cfg.seed).derive(stream, "labels")
    if cfg.input_file is None:
        x = rng.normal((size, *input_shape))
        y = None
    else:
        x, y = _load_inputs(cfg.input_file)
        if x.shape[0] < size or tuple(x.shape[1:]) != tuple(input_shape):
            raise ProxyError(f"input file batch {x.shape} cannot supply {size} samples of shape {input_shape}")
        x = x[:size]
        y = None if y is None else y[:size]
    labels = labels_rng.integers(0, num_classes, size) if y is None else np.asarray(y, dtype=np.int64)
    return Batch(np.asarray(x, dtype=np.float64), np.asarray(labels, dtype=np.int64))


def _load_inputs(path: str):
    data = np.load(path)
    if isinstance(data, np.ndarray):
        return data, None
    return data["x"], data["y"] if "y" in data.files else None


@contextmanager
def frozen(tensors):
    """Temporarily stop tensors from requiring gradients (pure forward passes)."""
    tensors = list(tensors)
    flags = [t.requires_grad for t in tensors]
    for t in tensors:
        t.requires_grad = False
    try:
        yield
    finally:
        for t, f in zip(tensors, flags):
            t.requires_grad = f


def as_input(x: np.ndarray, requires_grad: bool = False) -> Tensor:
    return Tensor(np.array(x, dtype=np.float64), requires_grad=requires_grad)
