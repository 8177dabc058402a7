"""Benchmark tables: accuracy and hardware cost per architecture.

Canonical format is JSONL, one record per line::

    {"arch": "|conv_3x3~0|+...", "accuracy": {"cifar100": 71.11},
     "cost": {"edgegpu_energy_mj": 9.5, "gtx1080_latency_ms": 12.1},
     "params_m": 0.83, "flops_m": 113.9}

Accuracy is in percent. Cost keys are ``<device>_latency_ms`` or
``<device>_energy_mj``. ``flops_m`` is millions of MACs. Unknown fields are
kept and written back on export.

The CSV form has a header with ``arch``, ``params_m``, ``flops_m``,
``acc.<dataset>`` and ``cost.<device_metric>`` columns; any other column is
carried as an extra field. Empty cells mean "absent".
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .archspace import (
    SPACE_SIZE,
    ArchParseError,
    CellSpec,
    MacroConfig,
    OpKind,
    count_flops,
    count_params,
    parse_arch,
)
from .proxies.config import ProxyScore
from .proxies.evaluate import rank_value
from .tensor_core import RngState

COST_SUFFIXES = ("_latency_ms", "_energy_mj")
_CORE_FIELDS = ("arch", "accuracy", "cost", "params_m", "flops_m")


class BenchmarkError(ValueError):
    def __init__(self, message: str, errors: list[str] | None = None):
        super().__init__(message if not errors else message + ":\n  " + "\n  ".join(errors))
        self.errors = errors or []


@dataclass(frozen=True)
class BenchmarkRecord:
    arch: str
    accuracy: dict
    cost: dict
    params_m: float | None = None
    flops_m: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {"arch": self.arch, "accuracy": dict(sorted(self.accuracy.items())),
             "cost": dict(sorted(self.cost.items()))}
        if self.params_m is not None:
            d["params_m"] = self.params_m
        if self.flops_m is not None:
            d["flops_m"] = self.flops_m
        d.update(sorted(self.extra.items()))
        return d


@dataclass(frozen=True)
class BenchmarkTable:
    records: tuple[BenchmarkRecord, ...]
    source: str = ""
    checksum: str = ""
    errors: tuple[str, ...] = ()

    def __post_init__(self):
        index = {}
        for i, r in enumerate(self.records):
            if r.arch in index:
                raise BenchmarkError(f"duplicate arch {r.arch!r} at records {index[r.arch]} and {i}")
            index[r.arch] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def index_of(self, arch: str) -> int:
        return self._index[arch]

    def get(self, arch: str) -> BenchmarkRecord:
        return self.records[self._index[arch]]

    @property
    def archs(self) -> list[str]:
        return [r.arch for r in self.records]

    def datasets(self) -> list[str]:
        return sorted({d for r in self.records for d in r.accuracy})

    def cost_keys(self) -> list[str]:
        return sorted({k for r in self.records for k in r.cost})

    def accuracy(self, dataset: str) -> dict[str, float]:
        """arch -> accuracy in table order, for records that report the dataset."""
        return {r.arch: r.accuracy[dataset] for r in self.records if dataset in r.accuracy}


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError(f"{what} must be a finite number, got {value!r}")
    return float(value)


def validate_record(raw: dict, arch_format: str = "nb201") -> BenchmarkRecord:
    if not isinstance(raw, dict):
        raise ValueError("record must be a JSON object")
    arch = raw.get("arch")
    if not isinstance(arch, str) or not arch:
        raise ValueError("missing or empty 'arch'")
    if arch_format == "nb201":
        try:
            parse_arch(arch)
        except ArchParseError as exc:
            raise ValueError(f"arch does not parse: {exc}") from None
    acc = raw.get("accuracy", {})
    if not isinstance(acc, dict):
        raise ValueError("'accuracy' must be an object")
    accuracy = {}
    for k, v in acc.items():
        v = _number(v, f"accuracy[{k}]")
        if not 0.0 <= v <= 100.0:
            raise ValueError(f"accuracy[{k}] = {v} outside [0, 100]")
        accuracy[str(k)] = v
    cost_raw = raw.get("cost", {})
    if not isinstance(cost_raw, dict):
        raise ValueError("'cost' must be an object")
    cost = {}
    for k, v in cost_raw.items():
        if not str(k).endswith(COST_SUFFIXES):
            raise ValueError(f"unknown unit suffix in cost key {k!r}; expected one of {COST_SUFFIXES}")
        v = _number(v, f"cost[{k}]")
        if v < 0:
            raise ValueError(f"cost[{k}] = {v} is negative")
        cost[str(k)] = v
    sizes = {}
    for key in ("params_m", "flops_m"):
        if raw.get(key) is not None:
            sizes[key] = _number(raw[key], key)
            if sizes[key] < 0:
                raise ValueError(f"{key} is negative")
    extra = {k: v for k, v in raw.items() if k not in _CORE_FIELDS}
    return BenchmarkRecord(arch, accuracy, cost, sizes.get("params_m"), sizes.get("flops_m"), extra)


def _csv_rows(text: str):
    reader = csv.DictReader(text.splitlines())
    for lineno, row in enumerate(reader, start=2):
        raw: dict = {"accuracy": {}, "cost": {}}
        for col, cell in row.items():
            if col is None or cell is None or cell == "":
                continue
            if col == "arch":
                raw["arch"] = cell
            elif col.startswith("acc."):
                raw["accuracy"][col[4:]] = _parse_cell(cell)
            elif col.startswith("cost."):
                raw["cost"][col[5:]] = _parse_cell(cell)
            elif col in ("params_m", "flops_m"):
                raw[col] = _parse_cell(cell)
            else:
                raw[col] = cell
        yield lineno, raw


def _parse_cell(cell: str):
    try:
        return float(cell)
    except ValueError:
        return cell


def load_table(path, fmt: str | None = None, lenient: bool = False, arch_format: str = "nb201") -> BenchmarkTable:
    """Load and validate a benchmark file.

    Malformed records are collected with their line numbers; the load fails if
    any exist unless ``lenient`` is set, in which case they are skipped and
    listed in ``table.errors``. Duplicate archs always fail.
    """
    path = Path(path)
    data = path.read_bytes()
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    text = data.decode("utf-8")
    if fmt == "jsonl":
        rows = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rows.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                rows.append((lineno, exc))
    elif fmt == "csv":
        rows = list(_csv_rows(text))
    else:
        raise ValueError(f"unknown format {fmt!r}")

    records, errors, seen = [], [], {}
    for lineno, raw in rows:
        try:
            if isinstance(raw, Exception):
                raise ValueError(f"invalid JSON: {raw.msg}")
            rec = validate_record(raw, arch_format)
        except ValueError as exc:
            errors.append(f"line {lineno}: {exc}")
            continue
        if rec.arch in seen:
            raise BenchmarkError(f"{path}: duplicate arch {rec.arch!r} on lines {seen[rec.arch]} and {lineno}")
        seen[rec.arch] = lineno
        records.append(rec)
    if errors and not lenient:
        raise BenchmarkError(f"{path}: {len(errors)} malformed record(s)", errors)
    return BenchmarkTable(tuple(records), str(path), hashlib.sha256(data).hexdigest(), tuple(errors))


def export_table(table: BenchmarkTable, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    if fmt == "jsonl":
        with open(path, "w") as fh:
            for r in table.records:
                fh.write(json.dumps(r.to_json()) + "\n")
        return
    datasets = table.datasets()
    costs = table.cost_keys()
    extras = sorted({k for r in table.records for k in r.extra})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arch", "params_m", "flops_m"] + [f"acc.{d}" for d in datasets]
                   + [f"cost.{c}" for c in costs] + extras)
        for r in table.records:
            w.writerow([r.arch, _cell(r.params_m), _cell(r.flops_m)]
                       + [_cell(r.accuracy.get(d)) for d in datasets]
                       + [_cell(r.cost.get(c)) for c in costs]
                       + [_cell(r.extra.get(e)) for e in extras])


def _cell(v) -> str:
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


# fixture calibration: accuracy spans [lo, hi] over the log-#Params range of the space
FIXTURE_DATASETS = {"cifar10": (80.0, 94.0), "cifar100": (30.0, 73.0)}
DEFAULT_NOISE = 1.0


def generate_fixture(n: int, seed: int = 0, noise: float = DEFAULT_NOISE,
                     macro: MacroConfig | None = None) -> BenchmarkTable:
    """Synthetic benchmark over ``n`` distinct cells.

    Accuracy is an increasing affine function of log #Params (calibrated so the
    space's smallest and largest networks hit each dataset's range) plus
    Gaussian noise, clipped to [1, 99]. ``noise`` is the standard deviation in
    percentage points on the widest-range dataset; narrower datasets get noise
    scaled by their range so every dataset has the same rank structure.
    Latency and energy are affine in MACs with 3% multiplicative jitter.
    """
    if not 1 <= n <= SPACE_SIZE:
        raise ValueError(f"n must be in [1, {SPACE_SIZE}], got {n}")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    macro = macro or MacroConfig()
    rng = RngState(seed).derive("fixture")
    indices = np.sort(rng.choice(SPACE_SIZE, n, replace=False))

    lo_p = math.log(count_params(CellSpec((OpKind.NONE,) * 6), macro))
    hi_p = math.log(count_params(CellSpec((OpKind.CONV3,) * 6), macro))
    widest = max(hi - lo for lo, hi in FIXTURE_DATASETS.values())
    records = []
    noise_rngs = {d: rng.derive("noise", d) for d in FIXTURE_DATASETS}
    jitter = rng.derive("jitter")
    for idx in indices:
        spec = CellSpec.from_index(int(idx))
        params = count_params(spec, macro)
        flops_m = count_flops(spec, macro) / 1e6
        t = (math.log(params) - lo_p) / (hi_p - lo_p)
        acc = {}
        for d, (a_lo, a_hi) in FIXTURE_DATASETS.items():
            eps = float(noise_rngs[d].normal(())) * noise * (a_hi - a_lo) / widest
            acc[d] = float(min(99.0, max(1.0, a_lo + (a_hi - a_lo) * t + eps)))
        j = jitter.normal((2,))
        cost = {"edgegpu_latency_ms": max(0.0, (2.0 + 0.05 * flops_m) * (1 + 0.03 * float(j[0]))),
                "edgegpu_energy_mj": max(0.0, (1.0 + 0.12 * flops_m) * (1 + 0.03 * float(j[1])))}
        records.append(BenchmarkRecord(str(spec), acc, cost, params / 1e6, flops_m))
    return BenchmarkTable(tuple(records), f"fixture(n={n}, seed={seed}, noise={noise})")


def load_scores(path) -> list[ProxyScore]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(ProxyScore.from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise BenchmarkError(f"{path}: line {lineno}: malformed score record ({exc})") from None
    return out


@dataclass
class JoinedView:
    archs: list[str]
    accuracy: dict  # dataset -> {arch: acc}
    cost: dict  # metric -> {arch: cost}
    scores: dict  # proxy -> seed -> {arch: rank value or None}
    unmatched: list[str]


def attach_scores(table: BenchmarkTable, scores) -> JoinedView:
    """Inner-join score records (or score files) onto the table by arch-string."""
    records: list[ProxyScore] = []
    for item in scores:
        if isinstance(item, ProxyScore):
            records.append(item)
        else:
            records.extend(load_scores(item))
    by_proxy: dict = {}
    unmatched = set()
    matched = set()
    for s in records:
        if s.arch not in table._index:
            unmatched.add(s.arch)
            continue
        matched.add(s.arch)
        by_proxy.setdefault(s.proxy, {}).setdefault(s.seed, {})[s.arch] = rank_value(s)
    if not matched:
        raise BenchmarkError("score records share no architecture with the benchmark table")
    archs = [a for a in table.archs if a in matched]
    acc = {d: {a: v for a, v in table.accuracy(d).items() if a in matched} for d in table.datasets()}
    cost = {k: {r.arch: r.cost[k] for r in table.records if r.arch in matched and k in r.cost}
            for k in table.cost_keys()}
    return JoinedView(archs, acc, cost, by_proxy, sorted(unmatched))
