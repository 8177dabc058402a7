"""Synthetic end-to-end study: fixture -> rank -> correlate -> pareto.

Writes everything under --out (default ./study) and prints the correlation
table. Each step goes through the CLI so every output has a replayable
manifest next to it.

    python scripts/fixture_study.py --n 256 --proxies params,snip,regions
"""

import argparse
import json
import sys
from pathlib import Path

from zsnas.benchio import load_table
from zsnas.cli import EXIT_OK, EXIT_SENTINEL, main


def run(argv):
    print("$ zsnas " + " ".join(argv), flush=True)
    code = main(argv)
    if code not in (EXIT_OK, EXIT_SENTINEL):
        sys.exit(code)


def budgets(bench: Path, metric: str, k: int) -> str:
    costs = sorted(r.cost[metric] for r in load_table(bench).records if metric in r.cost)
    return ",".join(f"{costs[round(q * (len(costs) - 1))]:.6g}" for q in [(i + 1) / k for i in range(k)])


def main_cli(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--proxies", default="params,snip,regions")
    ap.add_argument("--config", help="JSON config passed to rank")
    ap.add_argument("--metric", default="edgegpu_energy_mj")
    ap.add_argument("--bands", type=int, default=5)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="study")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench = out / "bench.jsonl"
    run(["fixture", "--n", str(args.n), "--seed", str(args.seed), "--out", str(bench)])
    rank = ["rank", "--bench", str(bench), "--proxies", args.proxies, "--out", str(out / "scores"),
            "--jobs", str(args.jobs)]
    run(rank + (["--config", args.config] if args.config else []))
    run(["correlate", "--bench", str(bench), "--scores", str(out / "scores"), "--out", str(out / "corr")])
    b = budgets(bench, args.metric, args.bands)
    for proxy in args.proxies.split(","):
        run(["pareto", "--bench", str(bench), "--scores", str(out / "scores" / f"{proxy}.jsonl"),
             "--metric", args.metric, "--budgets", b, "--svg", str(out / f"pareto_{proxy}.svg"),
             "--out", str(out / f"pareto_{proxy}")])

    reports = json.loads((out / "corr" / "correlation.json").read_text())["reports"]
    print(f"\n{'proxy':<10} {'dataset':<16} {'subset':<7} {'spr':>7} {'kt':>7}")
    for r in reports:
        print(f"{r['proxy']:<10} {r['dataset']:<16} {r['subset']:<7} {r['spr']:>7.3f} {r['kt']:>7.3f}")


if __name__ == "__main__":
    main_cli()
