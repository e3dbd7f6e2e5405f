import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from synthod.core import DataError
from synthod.evalkit import (EloConfig, ReportConfig, ScoreTable, auprc, auroc, avg_rank,
                             champion_delta, elo, evaluate, expected_score, permutation_test,
                             rauc, read_score_table, wilcoxon_test, win_lose_tie, winrate,
                             write_report, write_score_table)


def brute_auroc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def brute_sign_flip(d):
    d = [x for x in d if x != 0]
    T = sum(d)
    pats = list(itertools.product((1, -1), repeat=len(d)))
    tol = 1e-12 * max(1.0, sum(abs(x) for x in d))
    return sum(sum(s * x for s, x in zip(p, d)) >= T - tol for p in pats) / len(pats)


def brute_signed_rank(d):
    d = np.array([x for x in d if x != 0])
    r = stats.rankdata(np.abs(d))
    W = r[d > 0].sum()
    pats = itertools.product((0, 1), repeat=len(d))
    return sum(np.dot(p, r) >= W - 1e-9 for p in pats) / 2 ** len(d)


def table(values, models=None):
    values = np.asarray(values, dtype=float)
    models = models or [f"m{j}" for j in range(values.shape[1])]
    return ScoreTable([f"d{i}" for i in range(len(values))], models, values, "auroc")


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.75
    assert auroc([0, 1, 1, 0], [0, 1, 1, 0]) == 1.0
    assert auroc([0.3] * 6, [0, 1] * 3) == 0.5
    with pytest.raises(DataError):
        auroc([1, 2], [0, 0])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**32))
def test_auroc_matches_pairwise(n, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    s = rng.integers(0, 5, n).astype(float)  # many ties
    assert auroc(s, y) == brute_auroc(s, y)


def test_auprc_examples():
    assert auprc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == pytest.approx((1 + 2 / 3) / 2)
    assert auprc([1.0, 1.0, 1.0, 1.0], [1, 0, 0, 0]) == 0.25


def test_avg_rank_examples():
    t = table([[0.9, 0.8, 0.7], [0.8, 0.7, 0.6]])
    assert avg_rank(t)["m0"] == 1.0
    t = table([[0.8, 0.8], [0.6, 0.6]])
    assert avg_rank(t) == {"m0": 1.5, "m1": 1.5}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_avg_rank_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    V = rng.random((6, 4))
    t1 = table(V)
    t2 = table(V**3)  # errors 1 - V^3 are an increasing map of 1 - V
    assert avg_rank(t1) == avg_rank(t2)


def test_elo_single_match():
    t = table([[0.9, 0.5]])
    r = elo(t, EloConfig())
    assert r == {"m0": 1016.0, "m1": 984.0}
    assert expected_score(1000, 1000) == 0.5


def test_elo_all_ties():
    t = table([[0.8, 0.802, 0.799]] * 4)
    assert set(elo(t).values()) == {1000.0}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 3))
def test_elo_conserves_total(seed, shuffles):
    rng = np.random.default_rng(seed)
    t = table(rng.random((8, 5)))
    r = elo(t, EloConfig(shuffles=shuffles, seed=seed % 100))
    assert sum(r.values()) == pytest.approx(5000.0, abs=1e-9)


def test_winrate_examples():
    assert winrate(table([[0.9, 0.5, 0.4]] * 3))["m0"] == 1.0
    assert set(winrate(table([[0.5, 0.5]] * 3)).values()) == {0.5}
    cyc = table([[0.9, 0.8, 0.7], [0.7, 0.9, 0.8], [0.8, 0.7, 0.9]])
    assert set(winrate(cyc).values()) == {0.5}
    assert math.isnan(winrate(table([[0.5]]))["m0"])


def test_rauc_and_delta_examples():
    t = table([[0.9, 0.8, 0.6], [0.5, 0.7, 0.6]])
    r = rauc(t)
    assert r == pytest.approx({"m0": 0.5, "m1": (2 / 3 + 1) / 2, "m2": 0.25})
    t = table([[0.9, 0.8]])
    cd = champion_delta(t)
    assert cd.values["m0"] == 0 and cd.values["m1"] == pytest.approx(50.0)
    assert cd.champion == "m0"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_rauc_bounds(seed):
    V = np.random.default_rng(seed).random((5, 4))
    r = rauc(table(V))
    assert all(0 <= v <= 1 for v in r.values())
    best = rauc(table(V[:1]))
    assert max(best.values()) == 1.0 and min(best.values()) == 0.0


def test_permutation_examples():
    res = permutation_test([0.1, 0.2, 0.3])
    assert res.p == 0.125 and res.method == "exact"
    assert permutation_test([0.1, -0.1, 0.2, -0.2]).p >= 0.5


def test_permutation_monte_carlo_close_to_exact():
    d = np.random.default_rng(3).normal(0.02, 0.05, 15)
    exact = permutation_test(d).p
    mc = permutation_test(d, n_resamples=20_000, seed=1, exact_max_n=5).p
    se = math.sqrt(exact * (1 - exact) / 20_000)
    assert abs(mc - exact) <= 3 * se + 1 / 20_001
    assert 0 < mc <= 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=12))
def test_exact_tests_match_enumeration(ints):
    d = np.array(ints, dtype=float) / 7
    if not np.any(d != 0):
        return
    assert abs(permutation_test(d).p - brute_sign_flip(d)) <= 1e-12
    assert abs(wilcoxon_test(d).p - brute_signed_rank(d)) <= 1e-12


def test_wilcoxon_examples():
    res = wilcoxon_test([0.1, 0.2, 0.3])
    assert res.statistic == 6 and res.p == 0.125
    assert 0.4 <= wilcoxon_test([0.1, -0.1, 0.2, -0.2]).p <= 0.75


def test_wilcoxon_normal_agrees_with_exact():
    rng = np.random.default_rng(4)
    for _ in range(10):
        d = rng.normal(0.1, 1.0, 25)
        exact = wilcoxon_test(d, method="exact").p
        approx = wilcoxon_test(d, method="normal").p
        assert abs(exact - approx) < 0.01


def test_win_lose_tie_sums_to_one():
    rng = np.random.default_rng(5)
    t = table(rng.random((20, 3)))
    w, l, ti = win_lose_tie(t, "m0", "m1")
    assert abs(w + l + ti - 1) < 1e-12


def test_incomplete_table_lists_cells(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("dataset,model,metric,value\na,x,auroc,0.5\na,y,auroc,0.6\nb,x,auroc,0.7\n")
    with pytest.raises(DataError, match=r"\(b, y\)"):
        read_score_table(p)


def test_table_roundtrip(tmp_path):
    t = table(np.random.default_rng(6).random((3, 2)))
    write_score_table(t, tmp_path / "t.csv")
    back = read_score_table(tmp_path / "t.csv")
    assert np.array_equal(back.values, t.values) and back.models == t.models


def test_single_model_report(tmp_path):
    rep = evaluate(table([[0.7], [0.8]]))
    assert rep["models"]["m0"]["avg_rank"] == 1.0
    assert any("winrate" in f for f in rep["flags"])
    write_report(rep, tmp_path)
    assert json.loads((tmp_path / "report.json").read_text())["models"]["m0"]["winrate"] is None


def test_baseline_side_columns():
    rng = np.random.default_rng(7)
    V = rng.uniform(0, 0.9, (10, 3))
    V[:, 0] = V.max(axis=1) + 0.05
    rep = evaluate(table(V), baseline="m0", cfg=ReportConfig(n_resamples=1000))
    row = rep["models"]["m1"]
    assert row["win"] == 1.0 and row["p_permutation"] < 0.01
    assert "win" not in rep["models"]["m0"]
