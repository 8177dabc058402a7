import json
import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zsnas.metrics import (
    CorrelationReport,
    DegenerateRanking,
    constrained_subset,
    correlation_matrix,
    kendall_tau,
    spearman_rho,
    subset_label,
    tie_count,
    write_reports,
)


def average_ranks(v):
    """1-based ranks; tied values share the mean of the positions they occupy."""
    order = sorted(range(len(v)), key=lambda i: v[i])
    ranks = [0.0] * len(v)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and v[order[j + 1]] == v[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def pearson(a, b):
    ma, mb = sum(a) / len(a), sum(b) / len(b)
    num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    return num / math.sqrt(sum((x - ma) ** 2 for x in a) * sum((y - mb) ** 2 for y in b))


def tau_b_pairs(x, y):
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if dx == 0 and dy == 0:
                tx += 1
                ty += 1
            elif dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif (dx > 0) == (dy > 0):
                conc += 1
            else:
                disc += 1
    n0 = n * (n - 1) // 2
    return (conc - disc) / math.sqrt((n0 - tx) * (n0 - ty))


def test_trivial_orderings():
    x = [1, 2, 3, 4]
    assert spearman_rho(x, x) == 1.0 and kendall_tau(x, x) == 1.0
    assert spearman_rho(x, x[::-1]) == -1.0 and kendall_tau(x, x[::-1]) == -1.0


def test_kendall_hand_case():
    assert kendall_tau([1, 2, 3], [1, 3, 2]) == 1 / 3


def test_spearman_matches_oracle_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(3, 40))
        x = rng.integers(0, 6, n).astype(float)
        y = rng.standard_normal(n).round(1)
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        assert abs(spearman_rho(x, y) - pearson(average_ranks(list(x)), average_ranks(list(y)))) < 1e-12


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=40))
def test_kendall_matches_pair_counting(pairs):
    x, y = [p[0] for p in pairs], [p[1] for p in pairs]
    if len(set(x)) < 2 or len(set(y)) < 2:
        with pytest.raises(DegenerateRanking):
            kendall_tau(x, y)
        return
    assert abs(kendall_tau(x, y) - tau_b_pairs(x, y)) < 1e-12


@given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=30), st.integers(0, 2**31 - 1))
def test_invariant_under_increasing_transforms(x, seed):
    if len(set(x)) < 2:
        return
    y = list(np.random.default_rng(seed).standard_normal(len(x)))
    fx = [v ** 3 + 5 * v + 7 for v in x]
    assert kendall_tau(fx, y) == kendall_tau(x, y)
    assert spearman_rho(fx, y) == spearman_rho(x, y)
    for f in (kendall_tau(x, y), spearman_rho(x, y)):
        assert -1.0 <= f <= 1.0


def test_sentinels_rank_worst_and_tie():
    x = [-math.inf, 1.0, 2.0, -math.inf]
    y = [0.0, 2.0, 3.0, 1.0]
    assert kendall_tau(x, y) == pytest.approx(tau_b_pairs([0, 1, 2, 0], y))


def test_degenerate_and_invalid_inputs():
    with pytest.raises(DegenerateRanking, match="degenerate ranking"):
        spearman_rho([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateRanking):
        kendall_tau([1, 2, 3], [5, 5, 5])
    with pytest.raises(ValueError):
        spearman_rho([1], [2])
    with pytest.raises(ValueError):
        kendall_tau([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman_rho([1, float("nan")], [1, 2])


def test_kendall_full_space_speed():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(15625)
    y = x + rng.standard_normal(15625)
    t0 = time.perf_counter()
    kendall_tau(x, y)
    assert time.perf_counter() - t0 < 0.5


def test_constrained_subset_examples():
    assert constrained_subset([3.0, 1.0, 2.0], 100) == [0, 1, 2]
    acc = np.random.default_rng(2).uniform(0, 100, 100)
    keep = constrained_subset(acc, 5)
    assert len(keep) == 5
    rest = np.delete(acc, keep)
    assert acc[keep].min() >= rest.max()
    assert constrained_subset([1.0] * 10, 25) == [0, 1, 2]
    with pytest.raises(ValueError):
        constrained_subset([], 5)
    with pytest.raises(ValueError):
        constrained_subset([1.0], 0)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=50), st.floats(0.1, 100))
def test_constrained_subset_matches_sort_then_cut(acc, p):
    k = math.ceil(p * len(acc) / 100 - 1e-12)
    ref = sorted(sorted(range(len(acc)), key=lambda i: (-acc[i], i))[:k])
    got = constrained_subset(acc, p)
    # p*N/100 is computed exactly; float p only matters within rounding of an integer boundary
    assert got == ref or abs(p * len(acc) / 100 - round(p * len(acc) / 100)) < 1e-9


def test_tie_count():
    assert tie_count([1, 1, 1, 2, 2]) == 4
    assert tie_count([1, 2, 3]) == 0


def _toy_scores(rng, n=60):
    archs = [f"a{i}" for i in range(n)]
    acc = rng.uniform(50, 90, n)
    scores = {
        "good": {0: {a: float(v + rng.normal()) for a, v in zip(archs, acc)},
                 1: {a: float(v + rng.normal()) for a, v in zip(archs, acc)}},
        "flat": {0: {a: 1.0 for a in archs}},
    }
    return archs, {"d1": dict(zip(archs, acc))}, scores


def test_correlation_matrix_reports_and_warnings():
    archs, accuracy, scores = _toy_scores(np.random.default_rng(3))
    reports, warnings = correlation_matrix(scores, accuracy, subsets=(None, 5, 100))
    good = {r.subset: r for r in reports if r.proxy == "good"}
    assert set(good) == {"All", "Top5%"}
    assert good["All"].seeds == [0, 1] and good["All"].n == 60 and good["Top5%"].n == 3
    assert all(w.proxy == "flat" for w in warnings)
    assert not any(r.proxy == "flat" for r in reports)
    # correlations are averaged over seeds
    per_seed = [spearman_rho([scores["good"][s][a] for a in archs], [accuracy["d1"][a] for a in archs]) for s in (0, 1)]
    assert good["All"].spr == pytest.approx(np.mean(per_seed), abs=1e-15)


def test_top_100_equals_unconstrained():
    archs, accuracy, scores = _toy_scores(np.random.default_rng(4))
    reports, _ = correlation_matrix({"good": scores["good"]}, accuracy, subsets=(None, 100))
    assert len(reports) == 2 and reports[0].spr == reports[1].spr and reports[0].kt == reports[1].kt
    assert subset_label(100) == "All" and subset_label(5) == "Top5%" and subset_label(0.5) == "Top0.5%"


def test_write_reports(tmp_path):
    r = CorrelationReport("p", "d", "All", 0.5, 0.25, 10)
    write_reports([r], [], tmp_path / "c.json", tmp_path / "c.csv")
    payload = json.loads((tmp_path / "c.json").read_text())
    assert payload["reports"][0]["SPR@All"] == 0.5
    assert "seed_averaging" in payload
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "proxy,dataset,subset,spr,kt,n"
