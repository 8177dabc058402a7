"""Proxy-guided selection: constrained argmax, Pareto fronts, regularized evolution.

Objectives are maximised; pass ``higher_is_better=False`` for proxies where a
smaller value is better. Ties are broken by the lowest architecture index (the
base-5 cell index when the arch parses, table position otherwise).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

from .archspace import EDGES, OPS, SPACE_SIZE, ArchParseError, CellSpec, parse_arch
from .benchio import BenchmarkTable
from .tensor_core import RngState


class InfeasibleError(ValueError):
    def __init__(self, message: str, tightest_budget: float | None):
        super().__init__(message)
        self.tightest_budget = tightest_budget


@dataclass(frozen=True)
class HwConstraint:
    metric: str
    budget: float

    def __post_init__(self):
        if not (self.budget > 0 and math.isfinite(self.budget)):
            raise ValueError(f"budget must be positive and finite, got {self.budget}")


@dataclass(frozen=True)
class Candidate:
    arch: str
    index: int
    objective: float | None
    cost: dict = field(default_factory=dict)

    def feasible(self, constraint: HwConstraint | None) -> bool:
        if constraint is None:
            return True
        c = self.cost.get(constraint.metric)
        return c is not None and c <= constraint.budget


def arch_index(arch: str, fallback: int) -> int:
    try:
        return parse_arch(arch).index
    except ArchParseError:
        return SPACE_SIZE + fallback


def table_candidates(table: BenchmarkTable, dataset: str | None = None, scores: dict | None = None) -> list[Candidate]:
    """Candidates scored by true accuracy on ``dataset`` or by ``scores`` (arch -> value)."""
    if (dataset is None) == (scores is None):
        raise ValueError("give exactly one of dataset or scores")
    out = []
    for i, r in enumerate(table.records):
        value = r.accuracy.get(dataset) if scores is None else scores.get(r.arch)
        out.append(Candidate(r.arch, arch_index(r.arch, i), value, r.cost))
    return out


def _key(value: float | None, higher_is_better: bool) -> float:
    if value is None or math.isnan(value):
        return -math.inf
    return value if higher_is_better else -value


def constrained_argmax(candidates: Sequence[Candidate], constraint: HwConstraint | None = None,
                       higher_is_better: bool = True) -> Candidate:
    """Best feasible candidate; ties go to the lowest index.

    Candidates without a value are ignored. Raises ``InfeasibleError`` carrying
    the smallest budget that would admit any candidate.
    """
    best = None
    for c in candidates:
        if c.objective is None or not c.feasible(constraint):
            continue
        if best is None or (_key(c.objective, higher_is_better), -c.index) > (_key(best.objective, higher_is_better), -best.index):
            best = c
    if best is None:
        costs = [c.cost[constraint.metric] for c in candidates
                 if constraint is not None and constraint.metric in c.cost and c.objective is not None]
        tightest = min(costs) if costs else None
        where = f"under {constraint.metric} <= {constraint.budget}" if constraint else "(no scored candidates)"
        raise InfeasibleError(f"no feasible architecture {where}; tightest feasible budget is {tightest}", tightest)
    return best


@dataclass(frozen=True)
class ParetoPoint:
    arch: str
    index: int
    cost: float
    objective: float


@dataclass
class ParetoResult:
    front: list[ParetoPoint]
    objective: str  # "accuracy:<dataset>" or "proxy:<name>"
    metric: str = ""
    fingerprint: str = ""

    def to_dict(self) -> dict:
        return {"objective": self.objective, "metric": self.metric, "fingerprint": self.fingerprint,
                "front": [asdict(p) for p in self.front]}


def pareto_front(points: Sequence[ParetoPoint], objective: str = "", metric: str = "") -> ParetoResult:
    """Non-dominated subset under (minimise cost, maximise objective), sorted by cost.

    Identical (cost, objective) points are collapsed to the lowest index.
    """
    if not points:
        raise ValueError("pareto_front needs at least one point")
    order = sorted(points, key=lambda p: (p.cost, -p.objective, p.index))
    front: list[ParetoPoint] = []
    best = -math.inf
    for p in order:
        if not front or p.objective > best:
            front.append(p)
            best = p.objective
    return ParetoResult(front, objective, metric)


@dataclass
class GapRecord:
    budget: float
    truth_arch: str | None
    truth_cost: float | None
    truth_accuracy: float | None
    proxy_arch: str | None
    proxy_cost: float | None
    proxy_accuracy: float | None
    gap: float | None
    flagged: str | None = None


@dataclass
class ParetoComparison:
    truth: ParetoResult
    proxy: ParetoResult
    gaps: list[GapRecord]

    def to_dict(self) -> dict:
        return {"truth": self.truth.to_dict(), "proxy": self.proxy.to_dict(), "gaps": [asdict(g) for g in self.gaps]}


def _fingerprint(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def proxy_pareto_vs_truth(table: BenchmarkTable, scores: dict, metric: str, budgets: Sequence[float],
                          dataset: str, proxy: str = "proxy", higher_is_better: bool = True) -> ParetoComparison:
    """Per-budget picks by the proxy and by true accuracy, their fronts, and the accuracy gaps.

    ``scores`` maps arch -> rank value (infinite for sentinels, None for
    failures). The proxy pick is re-scored with its true accuracy. A band
    where the proxy has no finite score is flagged and gets no proxy pick.
    """
    if not budgets:
        raise ValueError("empty budget list")
    truth_c = [c for c in table_candidates(table, dataset=dataset) if metric in c.cost]
    if not truth_c:
        raise ValueError(f"no record has both {dataset!r} accuracy and cost {metric!r}")
    acc = {c.arch: c.objective for c in truth_c}
    proxy_c = [Candidate(c.arch, c.index, scores.get(c.arch), c.cost) for c in truth_c]
    gaps, truth_pts, proxy_pts = [], {}, {}
    for b in sorted(budgets):
        con = HwConstraint(metric, b)
        try:
            t = constrained_argmax(truth_c, con)
        except InfeasibleError as exc:
            gaps.append(GapRecord(b, None, None, None, None, None, None, None, f"infeasible: {exc}"))
            continue
        truth_pts[t.arch] = ParetoPoint(t.arch, t.index, t.cost[metric], t.objective)
        finite = [c for c in proxy_c if c.feasible(con) and c.objective is not None and math.isfinite(c.objective)]
        if not finite:
            gaps.append(GapRecord(b, t.arch, t.cost[metric], t.objective, None, None, None, None,
                                  "no finite proxy score in band"))
            continue
        p = constrained_argmax(finite, con, higher_is_better)
        pa = acc[p.arch]
        proxy_pts[p.arch] = ParetoPoint(p.arch, p.index, p.cost[metric], pa)
        gaps.append(GapRecord(b, t.arch, t.cost[metric], t.objective, p.arch, p.cost[metric], pa, t.objective - pa))
    fp = _fingerprint({"table": table.checksum or table.source, "metric": metric, "budgets": sorted(budgets),
                       "dataset": dataset, "proxy": proxy})
    truth = pareto_front(list(truth_pts.values()), f"accuracy:{dataset}", metric) if truth_pts else ParetoResult([], f"accuracy:{dataset}", metric)
    prox = pareto_front(list(proxy_pts.values()), f"proxy:{proxy}", metric) if proxy_pts else ParetoResult([], f"proxy:{proxy}", metric)
    truth.fingerprint = prox.fingerprint = fp
    return ParetoComparison(truth, prox, gaps)


def write_gaps_csv(gaps: Sequence[GapRecord], path) -> None:
    cols = list(GapRecord.__dataclass_fields__)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for g in gaps:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in asdict(g).values()])


@dataclass(frozen=True)
class EvoConfig:
    """Regularized evolution settings. Defaults are conventions, not published values."""

    population: int = 64
    tournament: int = 10
    steps: int = 10000
    seed: int = 0
    max_retries: int = 1000

    def __post_init__(self):
        if not self.population >= self.tournament >= 2:
            raise ValueError(f"need population >= tournament >= 2, got {self.population}, {self.tournament}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")


@dataclass
class EvoResult:
    best_arch: str
    best_score: float
    trajectory: list[float]  # best-ever score after step k; entry 0 is the initial population
    evaluations: int
    config: EvoConfig
    fingerprint: str = ""

    def to_dict(self) -> dict:
        return {"best_arch": self.best_arch, "best_score": self.best_score, "trajectory": self.trajectory,
                "evaluations": self.evaluations, "config": asdict(self.config), "fingerprint": self.fingerprint,
                "defaults_are_conventions": True}


def mutate(spec: CellSpec, rng: RngState) -> CellSpec:
    """Replace the op on one uniformly chosen edge by a different op."""
    edge = int(rng.integers(0, len(EDGES)))
    current = OPS.index(spec.ops[edge])
    new = (current + 1 + int(rng.integers(0, len(OPS) - 1))) % len(OPS)
    ops = list(spec.ops)
    ops[edge] = OPS[new]
    return CellSpec(tuple(ops))


def evolutionary_search(objective: Callable[[CellSpec], float | None], cfg: EvoConfig = EvoConfig(),
                        constraint: Callable[[CellSpec], bool] | None = None,
                        higher_is_better: bool = True) -> EvoResult:
    """Tournament selection, single-edge mutation, oldest member removed each step.

    Scores are memoised per cell so revisits cost nothing. A missing score
    (None) or NaN ranks worst.
    """
    rng = RngState(cfg.seed).derive("evolution")
    cache: dict[int, float] = {}

    def score(spec: CellSpec) -> float:
        i = spec.index
        if i not in cache:
            cache[i] = _key(objective(spec), higher_is_better)
        return cache[i]

    def feasible_sample(make) -> CellSpec:
        for _ in range(cfg.max_retries):
            spec = make()
            if constraint is None or constraint(spec):
                return spec
        raise InfeasibleError(f"no feasible architecture after {cfg.max_retries} draws", None)

    population: deque[CellSpec] = deque()
    for _ in range(cfg.population):
        population.append(feasible_sample(lambda: CellSpec.from_index(int(rng.integers(0, SPACE_SIZE)))))
    best = min(population, key=lambda s: (-score(s), s.index))
    trajectory = [score(best)]
    for _ in range(cfg.steps):
        picks = rng.choice(len(population), cfg.tournament, replace=False)
        parent = min((population[int(i)] for i in picks), key=lambda s: (-score(s), s.index))
        child = feasible_sample(lambda: mutate(parent, rng))
        population.append(child)
        population.popleft()
        if (score(child), -child.index) > (score(best), -best.index):
            best = child
        trajectory.append(score(best))
    sign = 1.0 if higher_is_better else -1.0
    fp = _fingerprint({"config": asdict(cfg), "higher_is_better": higher_is_better})
    return EvoResult(str(best), sign * score(best), [sign * v for v in trajectory], len(cache), cfg, fp)


def write_trajectory_csv(result: EvoResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "best_score", "fingerprint"])
        for k, v in enumerate(result.trajectory):
            w.writerow([k, repr(v), result.fingerprint])
