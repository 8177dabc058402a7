"""Command-line interface.

Exit codes: 0 success, 2 usage or config error, 3 a score is a numeric
sentinel (or failed), 4 input/output error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import multiprocessing
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from xml.sax.saxutils import escape

from . import __version__
from .archspace import ArchParseError, enumerate_space, parse_arch
from .benchio import BenchmarkError, attach_scores, export_table, generate_fixture, load_scores, load_table
from .config import RunConfig, load_config
from .metrics import correlation_matrix, write_reports
from .proxies import PROXIES, evaluate_all, rank_value
from .search import (
    EvoConfig,
    HwConstraint,
    InfeasibleError,
    constrained_argmax,
    evolutionary_search,
    proxy_pareto_vs_truth,
    table_candidates,
    write_gaps_csv,
    write_trajectory_csv,
)

log = logging.getLogger("zsnas")

EXIT_OK, EXIT_USAGE, EXIT_SENTINEL, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


class Run:
    """Bookkeeping for one command: inputs read, outputs written, manifest."""

    def __init__(self, argv: list[str], config: RunConfig):
        self.argv, self.config = argv, config
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.start = time.perf_counter()
        self.manifest_path: Path | None = None

    def read(self, path) -> Path:
        path = Path(path)
        if not path.exists():
            raise InputError(f"input not found: {path}")
        self.inputs[str(path)] = sha256_file(path)
        return path

    def wrote(self, path) -> None:
        if str(path) not in self.outputs:
            self.outputs.append(str(path))

    def manifest(self) -> dict:
        return {
            "command": self.argv,
            "cwd": os.getcwd(),
            "config": self.config.to_dict(),
            "seeds": {"proxy": self.config.proxy.seed},
            "input_checksums": dict(sorted(self.inputs.items())),
            "output_checksums": {p: sha256_file(p) for p in self.outputs if Path(p).is_file()},
            "version": __version__,
            "duration_s": round(time.perf_counter() - self.start, 3),
        }

    def write_manifest(self) -> None:
        if self.manifest_path is None:
            return
        self.manifest_path.parent.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


# ---- score ---------------------------------------------------------------

def cmd_score(args, run: Run) -> int:
    if args.proxy not in PROXIES:
        raise UsageError(f"unknown proxy {args.proxy!r}; choose from {', '.join(PROXIES)}")
    spec = _parse_arch(args.arch)
    score = evaluate_all(spec, run.config.proxy, [args.proxy], run.config.macro)[0]
    rec = score.to_record()
    token = score.error and "error" or score.sentinel or repr(score.value)
    print(token)
    print(_dump(rec))
    if args.out:
        out = Path(args.out)
        out.write_text(_dump(rec) + "\n")
        run.wrote(out)
        run.manifest_path = Path(args.manifest or f"{out}.manifest.json")
    return EXIT_OK if score.value is not None else EXIT_SENTINEL


def _parse_arch(text: str):
    try:
        return parse_arch(text)
    except ArchParseError as exc:
        raise UsageError(f"bad --arch: {exc}") from None


# ---- rank ----------------------------------------------------------------

def _rank_job(job) -> tuple[str, list[dict]]:
    arch, proxies, cfg_dict = job
    cfg = RunConfig.from_dict(cfg_dict)
    return arch, [s.to_record() for s in evaluate_all(arch, cfg.proxy, proxies, cfg.macro)]


def _split_list(text: str, what: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError(f"empty {what} list")
    return items


def cmd_rank(args, run: Run) -> int:
    proxies = _split_list(args.proxies, "proxy")
    unknown = [p for p in proxies if p not in PROXIES]
    if unknown:
        raise UsageError(f"unknown proxies {unknown}; choose from {', '.join(PROXIES)}")
    if args.space != "nb201-like":
        raise UsageError(f"unknown space {args.space!r}")
    if args.bench:
        archs = [r.arch for r in _load_table(args.bench, run)]
        for a in archs:
            _parse_arch(a)
    else:
        archs = [str(s) for s in enumerate_space()]
    if args.limit is not None:
        archs = archs[:args.limit]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    progress = out / "progress.jsonl"
    done = _resume(out, progress, proxies)
    todo = [a for a in archs if a not in done]
    log.info("ranking %d archs (%d already done) with %s", len(todo), len(archs) - len(todo), ",".join(proxies))
    files = {p: open(out / f"{p}.jsonl", "a") for p in proxies}
    bad = 0
    cfg_dict = run.config.to_dict()
    jobs = [(a, proxies, cfg_dict) for a in todo]
    try:
        if args.jobs > 1 and len(jobs) > 1:
            pool = multiprocessing.get_context("spawn").Pool(args.jobs)
            results = pool.imap(_rank_job, jobs)  # ordered: writes follow arch order
        else:
            pool, results = None, map(_rank_job, jobs)
        with open(progress, "a") as prog:
            for k, (arch, recs) in enumerate(results, start=1):
                for rec in recs:
                    files[rec["proxy"]].write(_dump(rec) + "\n")
                    bad += "value" not in rec or isinstance(rec["value"], str)
                for fh in files.values():
                    fh.flush()
                prog.write(_dump({"arch": arch, "proxies": proxies}) + "\n")
                prog.flush()
                log.info("[%d/%d] %s", k, len(todo), arch)
        if pool is not None:
            pool.close()
            pool.join()
    finally:
        for fh in files.values():
            fh.close()
    for p in proxies:
        run.wrote(out / f"{p}.jsonl")
    run.wrote(progress)
    run.manifest_path = Path(args.manifest or out / "manifest.json")
    bad += _count_bad(out, proxies, done)
    return EXIT_SENTINEL if bad else EXIT_OK


def _resume(out: Path, progress: Path, proxies: list[str]) -> set[str]:
    """Archs completed by an earlier run; drops any partial records they left behind."""
    if not progress.exists():
        return set()
    keep = set()
    for line in progress.read_text().splitlines():
        rec = json.loads(line) if line.strip() else None
        if rec and set(proxies) <= set(rec.get("proxies", ())):
            keep.add(rec["arch"])
    for p in proxies:
        f = out / f"{p}.jsonl"
        if f.exists():
            lines = [ln for ln in f.read_text().splitlines() if ln.strip() and json.loads(ln)["arch"] in keep]
            f.write_text("".join(ln + "\n" for ln in lines))
    return keep


def _count_bad(out: Path, proxies: list[str], done: set[str]) -> int:
    bad = 0
    for p in proxies:
        for line in (out / f"{p}.jsonl").read_text().splitlines():
            rec = json.loads(line)
            if rec["arch"] in done and ("value" not in rec or isinstance(rec["value"], str)):
                bad += 1
    return bad


# ---- correlate -----------------------------------------------------------

def _load_table(path, run: Run, lenient: bool = False):
    p = run.read(path)
    try:
        return load_table(p, lenient=lenient)
    except BenchmarkError as exc:
        raise InputError(str(exc)) from None


def _score_files(spec: str, run: Run) -> list[Path]:
    p = Path(spec)
    if p.is_dir():
        files = sorted(f for f in p.glob("*.jsonl") if f.name != "progress.jsonl")
        if not files:
            raise InputError(f"no score files (*.jsonl) in {p}")
    else:
        files = [Path(s) for s in spec.split(",")]
    return [run.read(f) for f in files]


def cmd_correlate(args, run: Run) -> int:
    table = _load_table(args.bench, run)
    files = _score_files(args.scores, run)
    try:
        view = attach_scores(table, files)
    except BenchmarkError as exc:
        raise InputError(str(exc)) from None
    if view.unmatched:
        log.warning("%d scored archs are not in the benchmark table", len(view.unmatched))
    subsets = [None] + [None if p == 100 else p for p in (args.top_percent or [5])]
    subsets = list(dict.fromkeys(subsets))
    for p in subsets:
        if p is not None and not 0 < p <= 100:
            raise UsageError(f"--top-percent must be in (0, 100], got {p}")
    accuracy = {d: {a: v for a, v in view.accuracy[d].items()} for d in view.accuracy}
    if args.dataset:
        if args.dataset not in accuracy:
            raise UsageError(f"dataset {args.dataset!r} not in table; have {sorted(accuracy)}")
        accuracy = {args.dataset: accuracy[args.dataset]}
    reports, warnings = correlation_matrix(view.scores, accuracy, subsets)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_reports(reports, warnings, out / "correlation.json", out / "correlation.csv")
    run.wrote(out / "correlation.json")
    run.wrote(out / "correlation.csv")
    run.manifest_path = Path(args.manifest or out / "correlate.manifest.json")
    print(f"{'proxy':<12} {'dataset':<10} {'subset':<8} {'SPR':>8} {'KT':>8} {'n':>6}")
    for r in reports:
        print(f"{r.proxy:<12} {r.dataset:<10} {r.subset:<8} {r.spr:>8.4f} {r.kt:>8.4f} {r.n:>6}")
    for w in warnings:
        log.warning("%s/%s/%s: %s", w.proxy, w.dataset, w.subset, w.message)
    return EXIT_OK


# ---- pareto --------------------------------------------------------------

def _budgets(text: str) -> list[float]:
    try:
        vals = [float(t) for t in _split_list(text, "budget")]
    except ValueError:
        raise UsageError(f"malformed budget list {text!r}; expected comma-separated numbers") from None
    if any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise UsageError("budgets must be positive and finite")
    return vals


def _unit(metric: str) -> str:
    return "ms" if metric.endswith("_latency_ms") else "mJ" if metric.endswith("_energy_mj") else ""


def _proxy_scores(args, run: Run, table, dataset: str) -> tuple[str, dict, bool]:
    if args.proxy == "accuracy":
        return "accuracy", table.accuracy(dataset), True
    if not args.scores:
        raise UsageError("--scores is required unless --proxy accuracy")
    recs = load_scores(run.read(args.scores))
    names = sorted({r.proxy for r in recs})
    name = args.proxy or (names[0] if len(names) == 1 else None)
    if name is None or name not in names:
        raise UsageError(f"choose --proxy from {names}")
    seed = min(r.seed for r in recs if r.proxy == name)
    scores = {r.arch: rank_value(r) for r in recs if r.proxy == name and r.seed == seed}
    return name, scores, PROXIES[name].higher_is_better if name in PROXIES else True


def cmd_pareto(args, run: Run) -> int:
    budgets = _budgets(args.budgets)
    table = _load_table(args.bench, run)
    dataset = args.dataset or (table.datasets()[0] if table.datasets() else None)
    if dataset is None:
        raise InputError("benchmark table has no accuracy columns")
    name, scores, hib = _proxy_scores(args, run, table, dataset)
    try:
        cmp = proxy_pareto_vs_truth(table, scores, args.metric, budgets, dataset, name, hib)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fronts, gaps = out / "fronts.json", out / "gaps.csv"
    fronts.write_text(json.dumps(cmp.to_dict(), indent=2, sort_keys=True) + "\n")
    write_gaps_csv(cmp.gaps, gaps)
    svg = Path(args.svg) if args.svg else out / "pareto.svg"
    points = [(r.cost[args.metric], r.accuracy[dataset]) for r in table.records
              if args.metric in r.cost and dataset in r.accuracy]
    svg.write_text(render_svg(points, cmp, args.metric, dataset))
    for p in (fronts, gaps, svg):
        run.wrote(p)
    run.manifest_path = Path(args.manifest or out / "pareto.manifest.json")
    for g in cmp.gaps:
        print(f"budget {g.budget:g}: truth {g.truth_accuracy} proxy {g.proxy_accuracy} gap {g.gap}"
              + (f" [{g.flagged}]" if g.flagged else ""))
    return EXIT_OK


def render_svg(points, cmp, metric: str, dataset: str, width: int = 640, height: int = 480) -> str:
    """Scatter of all candidates with the ground-truth and proxy fronts overlaid."""
    left, right, top, bottom = 70, 20, 30, 60
    xs = [p[0] for p in points] or [0.0, 1.0]
    ys = [p[1] for p in points] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return left + (v - x0) / (x1 - x0) * (width - left - right)

    def sy(v):
        return height - bottom - (v - y0) / (y1 - y0) * (height - top - bottom)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>']
    for i in range(5):
        xv, yv = x0 + (x1 - x0) * i / 4, y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.2f}" y="{height - bottom + 16}" font-size="10" '
                   f'text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 3:.2f}" font-size="10" text-anchor="end">{yv:.3g}</text>')
    unit = _unit(metric)
    out.append(f'<text x="{(left + width - right) / 2}" y="{height - 15}" font-size="12" text-anchor="middle">'
               f'{escape(metric)}{f" ({unit})" if unit else ""}</text>')
    out.append(f'<text x="15" y="{(top + height - bottom) / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 15 {(top + height - bottom) / 2})">{escape(dataset)} accuracy (%)</text>')
    out.append('<g fill="#bbbbbb">')
    out.extend(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2"/>' for x, y in points)
    out.append('</g>')
    for res, colour, label in ((cmp.truth, "#d62728", "ground truth"), (cmp.proxy, "#1f77b4", cmp.proxy.objective)):
        pts = " ".join(f"{sx(p.cost):.2f},{sy(p.objective):.2f}" for p in res.front)
        out.append(f'<g><title>{escape(label)}</title>')
        if pts:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        out.extend(f'<circle cx="{sx(p.cost):.2f}" cy="{sy(p.objective):.2f}" r="4" fill="none" '
                   f'stroke="{colour}"/>' for p in res.front)
        out.append('</g>')
    out.append(f'<text x="{width - right - 150}" y="{top}" font-size="11" fill="#d62728">ground truth</text>')
    out.append(f'<text x="{width - right - 150}" y="{top + 14}" font-size="11" fill="#1f77b4">'
               f'{escape(cmp.proxy.objective)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---- argmax / evolve -----------------------------------------------------

def cmd_argmax(args, run: Run) -> int:
    table = _load_table(args.bench, run)
    dataset = args.dataset or table.datasets()[0]
    if args.proxy == "accuracy":
        name, cands, hib = "accuracy", table_candidates(table, dataset=dataset), True
    else:
        name, scores, hib = _proxy_scores(args, run, table, dataset)
        cands = table_candidates(table, scores=scores)
    con = HwConstraint(args.metric, args.budget) if args.metric else None
    try:
        best = constrained_argmax(cands, con, hib)
    except InfeasibleError as exc:
        raise UsageError(str(exc)) from None
    rec = table.get(best.arch)
    result = {"objective": name, "arch": best.arch, "score": best.objective,
              "accuracy": rec.accuracy.get(dataset), "dataset": dataset,
              "constraint": None if con is None else {"metric": con.metric, "budget": con.budget}}
    print(_dump(result))
    if args.out:
        Path(args.out).write_text(_dump(result) + "\n")
        run.wrote(args.out)
        run.manifest_path = Path(args.manifest or f"{args.out}.manifest.json")
    return EXIT_OK


def cmd_evolve(args, run: Run) -> int:
    if args.proxy not in PROXIES:
        raise UsageError(f"unknown proxy {args.proxy!r}")
    try:
        evo = EvoConfig(args.population, args.tournament, args.steps, args.seed if args.seed is not None else 0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg, macro = run.config.proxy, run.config.macro

    def objective(spec):
        return rank_value(evaluate_all(spec, cfg, [args.proxy], macro)[0])

    constraint = None
    if args.max_params is not None or args.max_flops is not None:
        from .archspace import count_flops, count_params

        def constraint(spec):
            return ((args.max_params is None or count_params(spec, macro) <= args.max_params)
                    and (args.max_flops is None or count_flops(spec, macro) <= args.max_flops))
    try:
        res = evolutionary_search(objective, evo, constraint, PROXIES[args.proxy].higher_is_better)
    except InfeasibleError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "evolution.json").write_text(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n")
    write_trajectory_csv(res, out / "trajectory.csv")
    run.wrote(out / "evolution.json")
    run.wrote(out / "trajectory.csv")
    run.manifest_path = Path(args.manifest or out / "evolve.manifest.json")
    print(_dump({"best_arch": res.best_arch, "best_score": res.best_score}))
    return EXIT_OK


# ---- fixture -------------------------------------------------------------

def cmd_fixture(args, run: Run) -> int:
    try:
        table = generate_fixture(args.n, args.seed, args.noise, run.config.macro)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_table(table, out)
    run.wrote(out)
    run.manifest_path = Path(args.manifest or f"{out}.manifest.json")
    print(f"wrote {len(table)} records to {out}")
    return EXIT_OK


# ---- entry point ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zsnas", description="Training-free architecture scoring and search.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--replay", metavar="MANIFEST", help="re-run the command recorded in a manifest and verify outputs")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")

    def common(p, seed=True):
        p.add_argument("--config", help="JSON config with macro/proxy sections (default: $ZSNAS_CONFIG)")
        if seed:
            p.add_argument("--seed", type=int, help="override proxy.seed")
        p.add_argument("--manifest", help="where to write the run manifest")

    p = sub.add_parser("score", help="score one architecture with one proxy")
    common(p)
    p.add_argument("--arch", required=True)
    p.add_argument("--proxy", required=True)
    p.add_argument("--out", help="also write the JSON record here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rank", help="score every architecture of a space, one JSONL file per proxy")
    common(p)
    p.add_argument("--space", default="nb201-like")
    p.add_argument("--proxies", required=True, help="comma-separated proxy names")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bench", help="rank only the archs of this benchmark file, in its order")
    p.add_argument("--limit", type=int, help="rank only the first N archs")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("correlate", help="rank correlation of scores against benchmark accuracy")
    common(p)
    p.add_argument("--bench", required=True)
    p.add_argument("--scores", required=True, help="score directory or comma-separated score files")
    p.add_argument("--top-percent", type=float, action="append", help="constrained subset(s), default 5")
    p.add_argument("--dataset")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("pareto", help="proxy-selected vs ground-truth fronts under cost budgets")
    common(p)
    p.add_argument("--bench", required=True)
    p.add_argument("--scores", help="score file for the proxy")
    p.add_argument("--proxy", help="proxy name, or 'accuracy' for the self-comparison")
    p.add_argument("--metric", required=True, help="cost column, e.g. edgegpu_energy_mj")
    p.add_argument("--budgets", required=True, help="comma-separated budgets in the metric's units")
    p.add_argument("--dataset")
    p.add_argument("--svg")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("argmax", help="best architecture in a table under one cost budget")
    common(p)
    p.add_argument("--bench", required=True)
    p.add_argument("--scores")
    p.add_argument("--proxy", default="accuracy")
    p.add_argument("--metric")
    p.add_argument("--budget", type=float)
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.set_defaults(func=cmd_argmax)

    p = sub.add_parser("evolve", help="regularized evolution over the cell space")
    common(p)
    p.add_argument("--proxy", required=True)
    p.add_argument("--steps", type=int, default=EvoConfig.steps)
    p.add_argument("--population", type=int, default=EvoConfig.population)
    p.add_argument("--tournament", type=int, default=EvoConfig.tournament)
    p.add_argument("--max-params", type=float)
    p.add_argument("--max-flops", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("fixture", help="write a synthetic benchmark table")
    common(p, seed=False)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture)
    return ap


def _resolve_config(args, override: dict | None) -> RunConfig:
    cfg = RunConfig.from_dict(override) if override is not None else load_config(args.config)
    if args.seed is not None and args.command != "fixture":
        cfg = replace(cfg, proxy=replace(cfg.proxy, seed=args.seed))
    return cfg


def run_command(argv: list[str], config_override: dict | None = None) -> tuple[int, Run | None]:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    if args.replay:
        return replay(args.replay), None
    if args.command is None:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE, None
    if args.command == "fixture" and args.noise is None:
        from .benchio import DEFAULT_NOISE
        args.noise = DEFAULT_NOISE
    run = None
    try:
        run = Run(argv, _resolve_config(args, config_override))
        code = args.func(args, run)
        run.write_manifest()
        return code, run
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE, run
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO, run
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE, run


def replay(manifest_path) -> int:
    """Re-run a recorded command with its resolved config and compare output checksums."""
    manifest_path = Path(manifest_path).resolve()
    try:
        m = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_IO
    prev = os.getcwd()
    os.chdir(m.get("cwd", prev))
    try:
        return _replay(m, manifest_path)
    finally:
        os.chdir(prev)


def _replay(m: dict, manifest_path: Path) -> int:
    for path, digest in m.get("input_checksums", {}).items():
        if not Path(path).exists() or sha256_file(path) != digest:
            print(f"error: input {path} is missing or changed since the recorded run", file=sys.stderr)
            return EXIT_IO
    argv = list(m["command"])
    # a resumable rank would skip everything already done; start from clean outputs
    for path in m.get("output_checksums", {}):
        Path(path).unlink(missing_ok=True)
    code, _ = run_command(argv, config_override=m["config"])
    mismatched = [p for p, d in m.get("output_checksums", {}).items()
                  if not Path(p).exists() or sha256_file(p) != d]
    for p in mismatched:
        print(f"replay mismatch: {p}", file=sys.stderr)
    # the replay wrote a fresh manifest over the old one; put the original back
    Path(manifest_path).write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")
    return EXIT_IO if mismatched else code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    code, _ = run_command(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
