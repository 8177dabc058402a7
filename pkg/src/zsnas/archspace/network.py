"""Instantiate a cell spec inside a macro skeleton as a parameterised network.

Layer forms follow the usual cell-space conventions: searched convolutions are
ReLU -> conv -> BN, pooling is 3x3 average with padding excluded, and the
head is BN -> ReLU -> global pool -> linear. There are no biases anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor_core import (
    RngState,
    Tensor,
    add_n,
    avgpool2d,
    batchnorm2d,
    conv2d,
    global_avgpool,
    linear,
    relu,
)
from .cell import EDGES, NUM_NODES, CellSpec, OpKind
from .macro import MacroConfig


@dataclass
class Param:
    name: str
    tensor: Tensor
    kind: str  # conv | linear | bn_weight | bn_bias

    @property
    def is_weight(self) -> bool:
        return self.kind in ("conv", "linear")


@dataclass
class Trace:
    """What a forward pass exposes to the proxies."""

    relu_masks: list[tuple[str, bool, np.ndarray]] = field(default_factory=list)  # (name, in_cell, mask)
    bn_variances: list[tuple[str, np.ndarray]] = field(default_factory=list)
    bn_clamped: list[tuple[str, np.ndarray]] = field(default_factory=list)
    activations: list[tuple[str, Tensor]] = field(default_factory=list)
    macs: int = 0


@dataclass
class Context:
    bn: bool = True  # False: BN layers pass their input through unchanged
    trace: Trace | None = None
    keep_activations: bool = False  # retain grads of conv/linear outputs
    in_cell: bool = False


class ConvBN:
    """Optional ReLU, then conv, then optional BN."""

    def __init__(self, name: str, cin: int, cout: int, kernel: int, stride: int = 1,
                 relu_first: bool = True, bn: bool = True):
        self.name, self.cin, self.cout, self.kernel, self.stride = name, cin, cout, kernel, stride
        self.padding = kernel // 2
        self.relu_first = relu_first
        self.weight = Param(f"{name}.conv", Tensor(np.zeros((cout, cin, kernel, kernel)), requires_grad=True), "conv")
        self.bn = None
        if bn:
            self.bn = (Param(f"{name}.bn.weight", Tensor(np.ones(cout), requires_grad=True), "bn_weight"),
                       Param(f"{name}.bn.bias", Tensor(np.zeros(cout), requires_grad=True), "bn_bias"))

    def params(self) -> list[Param]:
        return [self.weight, *(self.bn or ())]

    def __call__(self, x: Tensor, ctx: Context) -> Tensor:
        if self.relu_first:
            x = _relu(x, f"{self.name}.relu", ctx)
        y = conv2d(x, self.weight.tensor, self.stride, self.padding)
        if ctx.trace is not None:
            ctx.trace.macs += int(np.prod(y.shape[1:])) * self.cin * self.kernel ** 2
        if ctx.keep_activations:
            y.retain_grad()
            ctx.trace.activations.append((self.weight.name, y))
        if self.bn is not None:
            y = _bn(y, self.bn, f"{self.name}.bn", ctx)
        return y


def _relu(x: Tensor, name: str, ctx: Context) -> Tensor:
    out = relu(x)
    if ctx.trace is not None:
        ctx.trace.relu_masks.append((name, ctx.in_cell, out.meta["mask"]))
    return out


def _bn(x: Tensor, params: tuple[Param, Param], name: str, ctx: Context) -> Tensor:
    if not ctx.bn:
        return x
    out, var = batchnorm2d(x, params[0].tensor, params[1].tensor)
    if ctx.trace is not None:
        ctx.trace.bn_variances.append((name, var))
        if out.meta["clamped"].size:
            ctx.trace.bn_clamped.append((name, out.meta["clamped"]))
    return out


class Cell:
    def __init__(self, name: str, spec: CellSpec, channels: int):
        self.name, self.spec, self.channels = name, spec, channels
        self.edges: dict[tuple[int, int], ConvBN | None] = {}
        for (t, s), op in zip(EDGES, spec.ops):
            self.edges[(t, s)] = ConvBN(f"{name}.e{t}{s}", channels, channels, op.kernel) if op.is_conv else None

    def params(self) -> list[Param]:
        return [p for m in self.edges.values() if m is not None for p in m.params()]

    def __call__(self, x: Tensor, ctx: Context) -> Tensor:
        nodes = [x]
        prev, ctx.in_cell = ctx.in_cell, True
        for t in range(1, NUM_NODES):
            terms = []
            for s, op in self.spec.incoming(t):
                if op is OpKind.NONE:
                    continue
                if op is OpKind.SKIP:
                    terms.append(nodes[s])
                elif op is OpKind.POOL:
                    terms.append(avgpool2d(nodes[s], 3, 1, 1, count_include_pad=False))
                else:
                    terms.append(self.edges[(t, s)](nodes[s], ctx))
            nodes.append(add_n(terms) if terms else Tensor(np.zeros(x.shape)))
        ctx.in_cell = prev
        return nodes[-1]


class ResBlock:
    """Stride-2 residual basic block with a pooled 1x1 projection shortcut."""

    def __init__(self, name: str, cin: int, cout: int):
        self.name = name
        self.conv_a = ConvBN(f"{name}.conv_a", cin, cout, 3, stride=2)
        self.conv_b = ConvBN(f"{name}.conv_b", cout, cout, 3)
        self.shortcut = ConvBN(f"{name}.shortcut", cin, cout, 1, relu_first=False, bn=False)

    def params(self) -> list[Param]:
        return self.conv_a.params() + self.conv_b.params() + self.shortcut.params()

    def __call__(self, x: Tensor, ctx: Context) -> Tensor:
        branch = self.conv_b(self.conv_a(x, ctx), ctx)
        return add_n([branch, self.shortcut(avgpool2d(x, 2, 2), ctx)])


class PoolConv:
    def __init__(self, name: str, cin: int, cout: int):
        self.conv = ConvBN(f"{name}.conv", cin, cout, 1)

    def params(self) -> list[Param]:
        return self.conv.params()

    def __call__(self, x: Tensor, ctx: Context) -> Tensor:
        return self.conv(avgpool2d(x, 2, 2), ctx)


class Head:
    def __init__(self, channels: int, num_classes: int):
        self.channels = channels
        self.bn = (Param("head.bn.weight", Tensor(np.ones(channels), requires_grad=True), "bn_weight"),
                   Param("head.bn.bias", Tensor(np.zeros(channels), requires_grad=True), "bn_bias"))
        self.weight = Param("head.linear", Tensor(np.zeros((num_classes, channels)), requires_grad=True), "linear")

    def params(self) -> list[Param]:
        return [*self.bn, self.weight]

    def features(self, x: Tensor, ctx: Context) -> Tensor:
        return _relu(_bn(x, self.bn, "head.bn", ctx), "head.relu", ctx)

    def classify(self, x: Tensor, ctx: Context) -> Tensor:
        y = linear(global_avgpool(x), self.weight.tensor)
        if ctx.trace is not None:
            ctx.trace.macs += self.weight.tensor.size
        if ctx.keep_activations:
            y.retain_grad()
            ctx.trace.activations.append((self.weight.name, y))
        return y


class Network:
    """A cell spec realised in a macro skeleton.

    ``features`` is the extractor up to (not including) the final pooling and
    classifier; ``forward`` adds those two.
    """

    def __init__(self, spec: CellSpec, macro: MacroConfig):
        self.spec, self.macro = spec, macro
        macro.stage_resolutions()
        self.stem = ConvBN("stem", macro.input_channels, macro.stem_channels, 3, relu_first=False)
        self.blocks: list = []
        width = macro.stem_channels
        if width != macro.stages[0].width:
            self.blocks.append(ConvBN("adapter", width, macro.stages[0].width, 1))
            width = macro.stages[0].width
        self.cells: list[Cell] = []
        for si, stage in enumerate(macro.stages):
            if si > 0:
                block_cls = ResBlock if macro.reduction == "resblock" else PoolConv
                self.blocks.append(block_cls(f"stage{si}.reduce", width, stage.width))
                width = stage.width
            for ci in range(stage.cells):
                cell = Cell(f"stage{si}.cell{ci}", spec, width)
                self.cells.append(cell)
                self.blocks.append(cell)
        self.head = Head(width, macro.num_classes)

    def params(self) -> list[Param]:
        out = self.stem.params()
        for b in self.blocks:
            out.extend(b.params())
        out.extend(self.head.params())
        return out

    def tensors(self) -> list[Tensor]:
        return [p.tensor for p in self.params()]

    def weights(self) -> list[Param]:
        """Conv and linear weights, the layers that parameter-saliency proxies sum over."""
        return [p for p in self.params() if p.is_weight]

    @property
    def depth(self) -> int:
        return len(self.weights())

    @property
    def num_params(self) -> int:
        return sum(p.tensor.size for p in self.params())

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.macro.input_shape

    @property
    def num_classes(self) -> int:
        return self.macro.num_classes

    def features(self, x: Tensor, ctx: Context | None = None) -> Tensor:
        ctx = ctx or Context()
        h = self.stem(x, ctx)
        for b in self.blocks:
            h = b(h, ctx)
        return self.head.features(h, ctx)

    def forward(self, x: Tensor, ctx: Context | None = None) -> Tensor:
        ctx = ctx or Context()
        return self.head.classify(self.features(x, ctx), ctx)

    __call__ = forward

    def reset_parameters(self, rng: RngState) -> None:
        """Kaiming-normal (fan-in, ReLU gain) weights; BN gamma=1, beta=0."""
        for p in self.params():
            t = p.tensor
            if p.kind == "conv" or p.kind == "linear":
                fan_in = int(np.prod(t.shape[1:]))
                t.data = rng.normal(t.shape) * np.sqrt(2.0 / fan_in)
            elif p.kind == "bn_weight":
                t.data = np.ones(t.shape)
            else:
                t.data = np.zeros(t.shape)
            t.grad = None

    def snapshot(self) -> list[np.ndarray]:
        return [t.data.copy() for t in self.tensors()]

    def restore(self, snap: list[np.ndarray]) -> None:
        for t, d in zip(self.tensors(), snap):
            t.data = d.copy()
            t.grad = None


def instantiate(spec: CellSpec, macro: MacroConfig | None = None, rng: RngState | int = 0) -> Network:
    macro = macro or MacroConfig()
    if not isinstance(rng, RngState):
        rng = RngState(rng)
    net = Network(spec, macro)
    net.reset_parameters(rng)
    return net
