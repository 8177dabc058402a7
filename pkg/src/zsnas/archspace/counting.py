"""Closed-form #Params and #FLOPs (MACs) without instantiating the network.

MACs cover convolutions and the classifier only: ``C_out*C_in*k*k*H_out*W_out``
per conv and ``in*out`` for the linear layer. BN, pooling and additions are
not counted, in line with NAS benchmark tables.
"""

from __future__ import annotations

from dataclasses import replace

from .cell import CellSpec
from .macro import MacroConfig


def conv_params(cin: int, cout: int, kernel: int, bn: bool = True) -> int:
    return cin * cout * kernel * kernel + (2 * cout if bn else 0)


def conv_macs(cin: int, cout: int, kernel: int, h_out: int, w_out: int) -> int:
    return cout * cin * kernel * kernel * h_out * w_out


def _cell_params(spec: CellSpec, c: int) -> int:
    return sum(conv_params(c, c, op.kernel) for op in spec.ops if op.is_conv)


def _cell_macs(spec: CellSpec, c: int, res: int) -> int:
    return sum(conv_macs(c, c, op.kernel, res, res) for op in spec.ops if op.is_conv)


def count_params(spec: CellSpec, macro: MacroConfig | None = None) -> int:
    """Trainable scalars including BN affine parameters."""
    macro = macro or MacroConfig()
    total = conv_params(macro.input_channels, macro.stem_channels, 3)
    width = macro.stem_channels
    if width != macro.stages[0].width:
        total += conv_params(width, macro.stages[0].width, 1)
        width = macro.stages[0].width
    for si, stage in enumerate(macro.stages):
        if si > 0:
            if macro.reduction == "resblock":
                total += (conv_params(width, stage.width, 3) + conv_params(stage.width, stage.width, 3)
                          + conv_params(width, stage.width, 1, bn=False))
            else:
                total += conv_params(width, stage.width, 1)
            width = stage.width
        total += stage.cells * _cell_params(spec, width)
    return total + 2 * width + width * macro.num_classes


def count_flops(spec: CellSpec, macro: MacroConfig | None = None, input_resolution: int | None = None) -> int:
    """Multiply-accumulate count of one forward pass on a single image."""
    macro = macro or MacroConfig()
    if input_resolution is not None and input_resolution != macro.input_resolution:
        macro = replace(macro, input_resolution=input_resolution)
    res = macro.stage_resolutions()
    total = conv_macs(macro.input_channels, macro.stem_channels, 3, res[0], res[0])
    width = macro.stem_channels
    if width != macro.stages[0].width:
        total += conv_macs(width, macro.stages[0].width, 1, res[0], res[0])
        width = macro.stages[0].width
    for si, stage in enumerate(macro.stages):
        r = res[si]
        if si > 0:
            if macro.reduction == "resblock":
                total += (conv_macs(width, stage.width, 3, r, r) + conv_macs(stage.width, stage.width, 3, r, r)
                          + conv_macs(width, stage.width, 1, r, r))
            else:
                total += conv_macs(width, stage.width, 1, r, r)
            width = stage.width
        total += stage.cells * _cell_macs(spec, width, r)
    return total + width * macro.num_classes
