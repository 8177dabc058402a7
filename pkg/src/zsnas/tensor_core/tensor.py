"""Dense f64 tensors and the reverse-mode tape that differentiates them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class GradientError(RuntimeError):
    """Raised when a backward pass cannot produce finite gradients."""

    def __init__(self, message: str, op: str | None = None):
        super().__init__(message)
        self.op = op


BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    """A float64 array that can take part in reverse-mode differentiation.

    Leaves are created directly with ``requires_grad=True``. Tensors produced
    by ops remember their parents and an adjoint closure only when at least one
    parent requires a gradient, so pure forward passes record nothing.
    """

    __slots__ = ("data", "grad", "requires_grad", "retains_grad", "op", "parents", "backward_fn", "meta")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.retains_grad = False
        self.op = "leaf"
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: BackwardFn | None = None
        self.meta: dict = {}

    @classmethod
    def from_op(cls, data: np.ndarray, op: str, parents: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
        out = cls(data)
        out.op = op
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out.parents = tuple(parents)
            out.backward_fn = backward_fn
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self.backward_fn is None

    def retain_grad(self) -> Tensor:
        """Keep dL/d(self) after backward even though this is not a leaf."""
        self.retains_grad = True
        return self

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"


@dataclass
class Tape:
    """Topologically ordered record of the ops reachable from a root."""

    nodes: list[Tensor] = field(default_factory=list)

    @classmethod
    def record(cls, root: Tensor) -> Tape:
        order: list[Tensor] = []
        seen: set[int] = set()
        # iterative post-order DFS; parents are visited left to right so the order is reproducible
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in reversed(node.parents):
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if n.is_leaf and n.requires_grad]


def backward(root: Tensor) -> Tape:
    """Populate ``grad`` on every leaf (and retained tensor) reachable from ``root``.

    Gradients are not accumulated across calls: if any reachable leaf already
    holds a gradient the call fails, so callers must ``zero_grad`` first.
    """
    if root.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        raise GradientError("root does not depend on any tensor that requires grad")
    tape = Tape.record(root)
    for node in tape.nodes:
        if (node.is_leaf or node.retains_grad) and node.grad is not None:
            raise GradientError("gradient already populated; call zero_grad before a second backward")

    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf or node.retains_grad:
            node.grad = g
        if node.is_leaf:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if not np.all(np.isfinite(pg)):
                raise GradientError(f"non-finite adjoint produced by op '{node.op}'", op=node.op)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return tape


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None
