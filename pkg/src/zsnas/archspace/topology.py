"""NN-Mass and NN-Degree over per-cell topology summaries.

Extraction convention for the 4-node cell (the per-family "possible skip
connections" is not fixed by the metric itself):

* every one of the 6 edges may carry a skip link, so ``possible_skips = 6``;
* a ``skip_connect`` edge is a skip link, and so is any other non-``none``
  edge that bypasses at least one node (``target - source >= 2``), since its
  output is added residually onto a later node; ``none`` edges count for
  neither;
* ``depth`` is the number of convolution edges and ``width`` the channel count;
* ``input_channels`` is the channel total entering the cell and its nodes:
  ``width * (1 + number of non-none edges)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .cell import EDGES, CellSpec, OpKind
from .macro import MacroConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CellTopology:
    width: int
    depth: int
    skips: int
    possible_skips: int
    input_channels: int

    def __post_init__(self):
        if self.skips < 0 or self.possible_skips < 0:
            raise ValueError("skip counts must be non-negative")

    @property
    def density(self) -> float:
        return self.skips / self.possible_skips if self.possible_skips else 0.0


def cell_topology(spec: CellSpec, width: int) -> CellTopology:
    skips = 0
    for (t, s), op in zip(EDGES, spec.ops):
        if op is OpKind.SKIP or (op is not OpKind.NONE and t - s >= 2):
            skips += 1
    live = sum(op is not OpKind.NONE for op in spec.ops)
    depth = sum(op.is_conv for op in spec.ops)
    return CellTopology(width=width, depth=depth, skips=skips, possible_skips=len(EDGES),
                        input_channels=width * (1 + live))


def network_topologies(spec: CellSpec, macro: MacroConfig | None = None) -> list[CellTopology]:
    macro = macro or MacroConfig()
    return [cell_topology(spec, stage.width) for stage in macro.stages for _ in range(stage.cells)]


def nn_mass(topologies, flags: list[str] | None = None) -> float:
    """Sum over cells of density * width * depth."""
    total = 0.0
    for i, c in enumerate(topologies):
        if c.skips > c.possible_skips:
            raise ValueError(f"cell {i}: {c.skips} actual skips exceed {c.possible_skips} possible")
        if c.possible_skips == 0:
            log.warning("cell %d has no possible skip connections; contributes 0", i)
            if flags is not None:
                flags.append(f"cell {i}: no possible skip connections")
            continue
        total += c.density * c.width * c.depth
    return total


def nn_degree(topologies) -> float:
    """Sum over cells of width + skips / total input channels."""
    total = 0.0
    for i, c in enumerate(topologies):
        if c.input_channels <= 0:
            raise ValueError(f"cell {i} has zero total input channels")
        total += c.width + c.skips / c.input_channels
    return total
