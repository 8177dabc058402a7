from __future__ import annotations

from dataclasses import asdict, dataclass, field

REDUCTION_POLICIES = ("resblock", "pool_conv")


@dataclass(frozen=True)
class Stage:
    cells: int
    width: int


@dataclass(frozen=True)
class MacroConfig:
    """Network skeleton around the searched cell.

    Stages are separated by a stride-2 reduction block; ``reduction`` picks
    its form (``resblock``: residual basic block with a pooled 1x1 shortcut,
    ``pool_conv``: 2x2 average pool followed by a 1x1 ReLU-conv-BN).
    """

    stem_channels: int = 16
    stages: tuple[Stage, ...] = field(default_factory=lambda: (Stage(5, 16), Stage(5, 32), Stage(5, 64)))
    reduction: str = "resblock"
    input_resolution: int = 32
    input_channels: int = 3
    num_classes: int = 10

    def __post_init__(self):
        stages = tuple(s if isinstance(s, Stage) else Stage(*s) if isinstance(s, (list, tuple)) else Stage(**s)
                       for s in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ValueError("MacroConfig needs at least one stage")
        for name in ("stem_channels", "input_resolution", "input_channels", "num_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"MacroConfig.{name} must be >= 1")
        for s in stages:
            if s.cells < 1 or s.width < 1:
                raise ValueError(f"stage counts must be >= 1, got {s}")
        if self.reduction not in REDUCTION_POLICIES:
            raise ValueError(f"unknown reduction policy '{self.reduction}', expected one of {REDUCTION_POLICIES}")

    @property
    def num_reductions(self) -> int:
        return len(self.stages) - 1

    def stage_resolutions(self) -> list[int]:
        """Spatial size of each stage; fails if the reduction stack does not fit."""
        factor = 2 ** self.num_reductions
        if self.input_resolution % factor:
            raise ValueError(f"input resolution {self.input_resolution} is too small or not divisible by "
                             f"{factor} for {self.num_reductions} reduction blocks")
        return [self.input_resolution // 2 ** i for i in range(len(self.stages))]

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.input_channels, self.input_resolution, self.input_resolution)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stages"] = [[s.cells, s.width] for s in self.stages]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MacroConfig:
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown MacroConfig keys: {sorted(unknown)}")
        if "stages" in known:
            known["stages"] = tuple(tuple(s) if isinstance(s, list) else s for s in known["stages"])
        return cls(**known)
