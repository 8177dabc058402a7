"""Cell encoding for the 4-node, 6-edge cell space and its arch-string grammar.

An arch-string lists, for each target node 1..3, the incoming edges as
``op~source``::

    |conv_3x3~0|+|none~0|skip_connect~1|+|conv_1x1~0|none~1|avg_pool_3x3~2|
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterator


class OpKind(str, enum.Enum):
    NONE = "none"
    SKIP = "skip_connect"
    CONV1 = "conv_1x1"
    CONV3 = "conv_3x3"
    POOL = "avg_pool_3x3"

    @property
    def is_conv(self) -> bool:
        return self in (OpKind.CONV1, OpKind.CONV3)

    @property
    def kernel(self) -> int:
        return {OpKind.CONV1: 1, OpKind.CONV3: 3}.get(self, 0)


# canonical op order; also the enumeration order
OPS: tuple[OpKind, ...] = (OpKind.NONE, OpKind.SKIP, OpKind.CONV1, OpKind.CONV3, OpKind.POOL)
NUM_NODES = 4
# (target, source) pairs in arch-string order
EDGES: tuple[tuple[int, int], ...] = tuple((t, s) for t in range(1, NUM_NODES) for s in range(t))
SPACE_SIZE = len(OPS) ** len(EDGES)
_BY_NAME = {op.value: op for op in OPS}


class ArchParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class CellSpec:
    """Six edge labels, ordered as :data:`EDGES`."""

    ops: tuple[OpKind, ...]

    def __post_init__(self):
        if len(self.ops) != len(EDGES):
            raise ValueError(f"a cell has {len(EDGES)} edges, got {len(self.ops)}")
        object.__setattr__(self, "ops", tuple(OpKind(o) for o in self.ops))

    def edge(self, target: int, source: int) -> OpKind:
        return self.ops[EDGES.index((target, source))]

    def incoming(self, target: int) -> list[tuple[int, OpKind]]:
        return [(s, op) for (t, s), op in zip(EDGES, self.ops) if t == target]

    def count(self, kind: OpKind) -> int:
        return sum(op is kind for op in self.ops)

    @property
    def index(self) -> int:
        """Position in :func:`enumerate_space` order."""
        idx = 0
        for op in self.ops:
            idx = idx * len(OPS) + OPS.index(op)
        return idx

    @classmethod
    def from_index(cls, index: int) -> CellSpec:
        if not 0 <= index < SPACE_SIZE:
            raise ValueError(f"index {index} outside [0, {SPACE_SIZE})")
        digits = []
        for _ in EDGES:
            index, d = divmod(index, len(OPS))
            digits.append(OPS[d])
        return cls(tuple(reversed(digits)))

    def to_str(self) -> str:
        return serialize(self)

    def __str__(self) -> str:
        return serialize(self)


def serialize(spec: CellSpec) -> str:
    parts = []
    for target in range(1, NUM_NODES):
        parts.append("|" + "|".join(f"{op.value}~{s}" for s, op in spec.incoming(target)) + "|")
    return "+".join(parts)


def parse_arch(text: str) -> CellSpec:
    """Parse an arch-string; errors report the byte offset of the problem."""
    ops: list[OpKind] = []
    pos = 0
    groups = text.split("+")
    if len(groups) != NUM_NODES - 1:
        raise ArchParseError(f"expected {NUM_NODES - 1} node groups separated by '+', found {len(groups)}",
                             len(text) if len(groups) < NUM_NODES - 1 else _nth_plus(text, NUM_NODES - 1))
    for target, group in enumerate(groups, start=1):
        if len(group) < 2 or not group.startswith("|") or not group.endswith("|"):
            raise ArchParseError(f"node group {target} must be wrapped in '|'", pos)
        tokens = group[1:-1].split("|")
        if len(tokens) != target:
            raise ArchParseError(f"node {target} needs {target} incoming edges, found {len(tokens)}", pos)
        tpos = pos + 1
        for source, token in enumerate(tokens):
            name, sep, src = token.partition("~")
            if not sep:
                raise ArchParseError(f"edge '{token}' lacks '~source'", tpos)
            if name not in _BY_NAME:
                raise ArchParseError(f"unknown op '{name}'", tpos)
            if src != str(source):
                raise ArchParseError(f"edge source must be {source}, got '{src}'", tpos + len(name) + 1)
            ops.append(_BY_NAME[name])
            tpos += len(token) + 1
        pos += len(group) + 1
    return CellSpec(tuple(ops))


def _nth_plus(text: str, n: int) -> int:
    idx = -1
    for _ in range(n):
        idx = text.index("+", idx + 1)
    return idx


def enumerate_space() -> Iterator[CellSpec]:
    """All 5**6 cells, lexicographic by edge then op order (all-`none` first)."""
    for combo in itertools.product(OPS, repeat=len(EDGES)):
        yield CellSpec(combo)
