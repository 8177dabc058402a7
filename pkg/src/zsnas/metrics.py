"""Rank correlation between proxy scores and benchmark accuracy."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import kendalltau, rankdata


class DegenerateRanking(ValueError):
    pass


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"expected two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ValueError("NaN entries are not allowed; map sentinel outcomes before ranking")
    return x, y


def spearman_rho(x, y) -> float:
    """Pearson correlation of average ranks."""
    x, y = _check_pair(x, y)
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sxx, syy = float(rx @ rx), float(ry @ ry)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateRanking("degenerate ranking: all values tied")
    return float(np.clip((rx @ ry) / math.sqrt(sxx * syy), -1.0, 1.0))


def _tie_pairs(v: np.ndarray) -> int:
    _, counts = np.unique(v, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall tau-b (scipy's O(n log n) pair counting)."""
    x, y = _check_pair(x, y)
    # ranks keep order and ties exactly and make infinite sentinels comparable
    x, y = rankdata(x), rankdata(y)
    n0 = x.size * (x.size - 1) // 2
    n1, n2 = _tie_pairs(x), _tie_pairs(y)
    if n1 == n0 or n2 == n0:
        raise DegenerateRanking("degenerate ranking: all values tied")
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    # concordant minus discordant is an integer; recover it and divide once so
    # small cases come out exact (1/3 rather than scipy's 0.33333333333333337)
    s = round(kendalltau(x, y, variant="b").statistic * denom)
    return float(np.clip(s / denom, -1.0, 1.0))


def tie_count(v) -> int:
    """Number of tied pairs in ``v``."""
    return _tie_pairs(np.asarray(v, dtype=np.float64))


def top_k_count(n: int, p_percent: float) -> int:
    return math.ceil(Fraction(str(p_percent)) * n / 100)


def constrained_subset(accuracies, p_percent: float) -> list[int]:
    """Indices of the ceil(p*N/100) most accurate entries.

    Ties at the cut are broken by index ascending; the result is sorted by index.
    """
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.size == 0:
        raise ValueError("empty table")
    if not 0 < p_percent <= 100:
        raise ValueError(f"p_percent must be in (0, 100], got {p_percent}")
    k = top_k_count(acc.size, p_percent)
    order = np.lexsort((np.arange(acc.size), -acc))
    return sorted(int(i) for i in order[:k])


def subset_label(p_percent: float | None) -> str:
    if p_percent is None or p_percent == 100:
        return "All"
    return f"Top{p_percent:g}%"


@dataclass
class CorrelationReport:
    proxy: str
    dataset: str
    subset: str
    spr: float
    kt: float
    n: int
    proxy_ties: int = 0
    accuracy_ties: int = 0
    seeds: list[int] = field(default_factory=list)
    # statistics of the seed-averaged scores, kept alongside the per-seed average
    spr_of_mean_scores: float | None = None
    kt_of_mean_scores: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d[f"SPR@{self.subset}"] = self.spr
        d[f"KT@{self.subset}"] = self.kt
        return d


@dataclass
class CorrelationWarning:
    proxy: str
    dataset: str
    subset: str
    message: str


def correlation_matrix(scores: dict, accuracy: dict, subsets=(None, 5)) -> tuple[list[CorrelationReport], list[CorrelationWarning]]:
    """One report per (proxy, dataset, subset).

    ``scores`` maps proxy -> seed -> {arch: rank value (inf/-inf for sentinels)}.
    ``accuracy`` maps dataset -> {arch: accuracy}. Subsets are percentages of
    the whole table (``None`` means all). Correlations are computed per seed
    and averaged; the correlation of seed-averaged scores is reported too.
    """
    reports, warnings = [], []
    for dataset in sorted(accuracy):
        acc = accuracy[dataset]
        archs = list(acc)  # table order; ties at the top-k cut go to the lower index
        acc_vec = np.array([acc[a] for a in archs])
        for p in subsets:
            label = subset_label(p)
            keep = [archs[i] for i in constrained_subset(acc_vec, 100 if p is None else p)]
            for proxy in sorted(scores):
                per_seed = scores[proxy]
                sprs, kts, used, ns = [], [], [], []
                common = None
                for seed in sorted(per_seed):
                    vals = per_seed[seed]
                    sel = [a for a in keep if a in vals and vals[a] is not None]
                    if len(sel) < 2:
                        continue
                    xv = np.array([vals[a] for a in sel])
                    yv = np.array([acc[a] for a in sel])
                    try:
                        sprs.append(spearman_rho(xv, yv))
                        kts.append(kendall_tau(xv, yv))
                    except DegenerateRanking as exc:
                        warnings.append(CorrelationWarning(proxy, dataset, label, f"seed {seed}: {exc}"))
                        continue
                    used.append(seed)
                    ns.append(len(sel))
                    common = set(sel) if common is None else common & set(sel)
                if not used:
                    warnings.append(CorrelationWarning(proxy, dataset, label, "fewer than 2 valid scores"))
                    continue
                sel = sorted(common)
                xm = np.array([np.mean([per_seed[s][a] for s in used]) for a in sel]) if len(sel) >= 2 else None
                ym = np.array([acc[a] for a in sel])
                spr_m = kt_m = None
                if xm is not None and np.all(np.isfinite(xm)):
                    try:
                        spr_m, kt_m = spearman_rho(xm, ym), kendall_tau(xm, ym)
                    except DegenerateRanking:
                        pass
                first = per_seed[used[0]]
                sel0 = [a for a in keep if a in first and first[a] is not None]
                reports.append(CorrelationReport(
                    proxy=proxy, dataset=dataset, subset=label,
                    spr=float(np.mean(sprs)), kt=float(np.mean(kts)), n=min(ns),
                    proxy_ties=tie_count([first[a] for a in sel0]), accuracy_ties=tie_count([acc[a] for a in sel0]),
                    seeds=used, spr_of_mean_scores=spr_m, kt_of_mean_scores=kt_m))
    return reports, warnings


def write_reports(reports: list[CorrelationReport], warnings: list[CorrelationWarning], json_path, csv_path) -> None:
    payload = {
        "seed_averaging": "correlations computed per seed, then averaged; *_of_mean_scores correlate seed-averaged scores",
        "reports": [r.to_dict() for r in reports],
        "warnings": [asdict(w) for w in warnings],
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["proxy", "dataset", "subset", "spr", "kt", "n"])
        for r in reports:
            w.writerow([r.proxy, r.dataset, r.subset, repr(r.spr), repr(r.kt), r.n])
