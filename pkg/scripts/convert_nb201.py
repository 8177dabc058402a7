"""Convert a flat NASBench-201 export into a benchmark JSONL table.

The official benchmark ships as a torch pickle that this package does not
read. Export it once with the benchmark's own API, for example::

    from nas_201_api import NASBench201API
    api = NASBench201API("NAS-Bench-201-v1_1-096897.pth")
    rows = {}
    for i, arch in enumerate(api.meta_archs):
        rows[arch] = {d: api.get_more_info(i, d, hp="200", is_random=False)["test-accuracy"]
                      for d in ("cifar10", "cifar100", "ImageNet16-120")}
        rows[arch]["params_m"] = api.get_cost_info(i, "cifar100")["params"]
    json.dump(rows, open("nb201.json", "w"))

then run ``python scripts/convert_nb201.py nb201.json nb201.jsonl``.

Input is either that JSON object (arch -> {column: value}) or a CSV with an
``arch`` column. Columns named ``params_m``/``flops_m`` become sizes, columns
ending in ``_latency_ms``/``_energy_mj`` become costs, every other numeric
column is an accuracy in percent. Op names are mapped to the package's
vocabulary (``nor_conv_3x3`` -> ``conv_3x3``).
"""

import argparse
import csv
import json
from pathlib import Path

from zsnas.benchio import BenchmarkRecord, BenchmarkTable, export_table
from zsnas.archspace import parse_arch

OP_NAMES = {"nor_conv_3x3": "conv_3x3", "nor_conv_1x1": "conv_1x1"}
SIZES = ("params_m", "flops_m")
COST_SUFFIXES = ("_latency_ms", "_energy_mj")


def canonical_arch(arch: str) -> str:
    for old, new in OP_NAMES.items():
        arch = arch.replace(old, new)
    return str(parse_arch(arch))


def read_rows(path: Path) -> dict[str, dict[str, float]]:
    if path.suffix == ".json":
        return json.loads(path.read_text())
    with open(path, newline="") as fh:
        return {row.pop("arch"): {k: float(v) for k, v in row.items() if v != ""} for row in csv.DictReader(fh)}


def to_record(arch: str, cols: dict[str, float]) -> BenchmarkRecord:
    accuracy, cost, sizes = {}, {}, {}
    for key, value in cols.items():
        if key in SIZES:
            sizes[key] = float(value)
        elif key.endswith(COST_SUFFIXES):
            cost[key] = float(value)
        else:
            accuracy[key] = float(value)
    return BenchmarkRecord(canonical_arch(arch), accuracy, cost, sizes.get("params_m"), sizes.get("flops_m"))


def main(argv=None):
    ap = argparse.ArgumentParser(description="convert a flat NASBench-201 export to benchmark JSONL")
    ap.add_argument("source", type=Path, help=".json (arch -> columns) or .csv with an arch column")
    ap.add_argument("out", type=Path, help=".jsonl or .csv")
    args = ap.parse_args(argv)
    rows = read_rows(args.source)
    table = BenchmarkTable(tuple(to_record(a, c) for a, c in rows.items()))
    export_table(table, args.out)
    print(f"wrote {len(table)} records to {args.out}")


if __name__ == "__main__":
    main()
