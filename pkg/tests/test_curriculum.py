import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scripted import ConstantLearner, bandit_sampler, run_bandit
from synthod.core import ConfigError, SeedPath
from synthod.curriculum import (PACE_FUNCTIONS, CategoryState, PaceConfig, SecConfig,
                                binary_category_reward, build_batch, category_reward, ema_update,
                                filter_by_loss, pace, pace_value, plan_batch, run_sec_epoch,
                                sample_category, softmax_probs)
from synthod.detectors.learner import LearnerConfig, ReferenceLearner


def test_default_categories_bin_major():
    st_ = CategoryState()
    assert len(st_.categories) == 25
    assert st_.categories[0] == (0, "gmm") and st_.categories[5][0] == 1
    assert np.allclose(st_.weights, 1 / 25)
    assert st_.name(0) == "gmm@[2,21)"


def test_overlapping_bins_rejected():
    with pytest.raises(ConfigError):
        CategoryState(bins=((2, 10), (9, 20)))


def test_equal_weights_sample_uniformly():
    st_ = CategoryState()
    rng = np.random.default_rng(0)
    draws = np.array([sample_category(st_, rng)[0] for _ in range(10_000)])
    freq = np.bincount(draws, minlength=25)
    p = 1 / 25
    assert np.all(np.abs(freq - 10_000 * p) <= 3 * math.sqrt(10_000 * p * (1 - p)) + 1)


def test_sampled_dimension_inside_bin():
    st_ = CategoryState(bins=((2, 5), (5, 9)), priors=("gmm",))
    rng = np.random.default_rng(1)
    for _ in range(200):
        c, d = sample_category(st_, rng)
        lo, hi = st_.bins[c]
        assert lo <= d < hi


def test_softmax_examples():
    assert softmax_probs([1.0, 0.0], 0.5)[0] == pytest.approx(math.e**2 / (math.e**2 + 1))
    assert softmax_probs([1.0, 0.0], 0.5)[0] == pytest.approx(0.881, abs=5e-4)
    assert softmax_probs([1.0, 0.0], 1e-3)[0] == 1.0
    assert np.all(np.isfinite(softmax_probs([1e300, -1e300], 1e-3)))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=30),
       st.floats(0.05, 5.0), st.floats(0.05, 5.0))
def test_softmax_sum_and_temperature(w, t1, t2):
    p = softmax_probs(w, t1)
    assert abs(p.sum() - 1) <= 1e-12
    lo, hi = sorted((t1, t2))
    top = int(np.argmax(w))
    assert softmax_probs(w, lo)[top] >= softmax_probs(w, hi)[top] - 1e-12


def test_reward_examples():
    assert category_reward([0.3] * 5) == 0.0
    assert category_reward([0, 2, 0, 2]) == 1.0
    assert category_reward([math.log(2)] * 7) == 0.0
    assert binary_category_reward([1, 1, 1]) == 0.0
    assert binary_category_reward([1, 1, 0, 0]) == 2.0
    assert binary_category_reward([0]) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=40))
def test_reward_is_two_pass_variance(losses):
    r = category_reward(losses)
    mean = sum(losses) / len(losses)
    two_pass = sum((x - mean) ** 2 for x in losses) / len(losses)
    assert r >= 0
    assert abs(r - two_pass) <= 1e-12 * max(1.0, two_pass) + 1e-12
    if len(set(losses)) == 1:
        assert r == 0


def test_ema_examples():
    s = CategoryState(priors=("gmm",), bins=((2, 3), (3, 4)), weights=np.array([0.4, 0.7]))
    ema_update(s, {0: 0.8}, gamma=0.1)
    assert s.weights[0] == pytest.approx(0.44) and s.weights[1] == 0.7
    ema_update(s, {1: 0.3}, gamma=1.0)
    assert s.weights[1] == 0.3
    ema_update(s, {1: 0.3})
    assert s.weights[1] == 0.3


def test_pace_examples():
    cfg = PaceConfig("linear", a=0.8, b=0.2)
    assert pace(cfg, 1000, 0, 100) == 200
    assert pace_value("root", 1000, 80, 100, 0.8, 0.2) == 1000
    for fn in PACE_FUNCTIONS:
        assert pace(PaceConfig(fn), 1000, 100, 100) == 1000


def test_pace_cap_floor():
    cfg = PaceConfig("linear", b=0.0, cap=0.95)
    assert pace(cfg, 1000, 0, 100) == 50
    assert pace(cfg, 999, 0, 100) == math.ceil(0.05 * 999)


@pytest.mark.parametrize("fn", PACE_FUNCTIONS)
@pytest.mark.parametrize("a", [0.2, 0.5, 0.8, 1.0])
@pytest.mark.parametrize("b", [0.05, 0.2, 0.5, 0.9])
def test_pace_monotone_and_endpoints(fn, a, b):
    N, T = 2000, 200
    cfg = PaceConfig(fn, a=a, b=b)
    g = [pace(cfg, N, t, T) for t in range(T + 1)]
    assert all(y >= x for x, y in zip(g, g[1:]))
    assert g[0] == round(N * b)
    assert all(v == N for v in g[math.ceil(a * T):])


def test_filter_examples():
    assert filter_by_loss([5, 1, 3], 2).tolist() == [1, 2]
    assert filter_by_loss([5, 1, 3], 3).tolist() == [0, 1, 2]
    assert filter_by_loss([1, 1, 1], 2).tolist() == [0, 1]


def test_batch_has_exact_point_count():
    st_ = CategoryState()
    cfg = SecConfig(batch_points=450, n_query=200)
    plan = plan_batch(st_, cfg, SeedPath(0))
    assert [p[2] for p in plan] == [200, 200, 50]
    tasks = build_batch(st_, cfg, SeedPath(0), sampler=bandit_sampler(200))
    assert sum(len(t.labels) for t in tasks) == 450


def test_constant_learner_zero_rewards():
    st_ = CategoryState()
    cfg = SecConfig(batch_points=400, n_query=100, epochs=30)
    lrn = ConstantLearner()
    K = len(st_.categories)
    for _ in range(30):
        prev = st_.weights.copy()
        st_, lrn, rep = run_sec_epoch(st_, lrn, cfg, SeedPath(1), sampler=bandit_sampler(100))
        rewards = [v["reward"] for v in rep["categories"].values() if v["reward"] is not None]
        assert rewards and all(r == 0.0 for r in rewards)
        assert np.all(st_.weights <= prev) and np.all(st_.weights >= 0)
    # weights stay in [0, 1/K], which bounds how far sampling can drift from uniform
    p = softmax_probs(st_.weights, st_.tau)
    assert p.max() / p.min() <= math.exp(1 / (K * st_.tau)) + 1e-12


def test_bimodal_category_preferred():
    counts = run_bandit(seed=3)
    assert counts[0] > counts[1]


def test_epoch_reproducible():
    def run():
        st_ = CategoryState(bins=((2, 5),), priors=("gmm", "copula-probabilistic"))
        cfg = SecConfig(batch_points=120, n_query=40, n_context=40, epochs=3)
        lrn = ReferenceLearner(LearnerConfig(input_dim=5, hidden=4), SeedPath(2))
        reps = []
        for _ in range(2):
            st_, lrn, rep = run_sec_epoch(st_, lrn, cfg, SeedPath(9))
            reps.append(rep)
        return reps, lrn.params
    (r1, p1), (r2, p2) = run(), run()
    assert r1 == r2
    assert all(np.array_equal(p1[k], p2[k]) for k in p1)


@pytest.mark.parametrize("policy", ["naive", "spl", "ac"])
def test_policies_run(policy):
    st_ = CategoryState(bins=((2, 4),), priors=("gmm", "scm-structural"))
    cfg = SecConfig(policy=policy, batch_points=80, n_query=40, n_context=40, epochs=4)
    lrn = ReferenceLearner(LearnerConfig(input_dim=4, hidden=3), SeedPath(3))
    w0 = st_.weights.copy()
    st_, lrn, rep = run_sec_epoch(st_, lrn, cfg, SeedPath(4))
    if policy in ("naive", "spl"):
        assert np.array_equal(st_.weights, w0)
    if policy in ("naive", "ac"):
        assert rep["kept_fraction"] == 1.0
    else:
        assert rep["kept_fraction"] < 1.0


def test_state_roundtrip():
    s = CategoryState(tau=0.3, weights=np.linspace(0, 1, 25), t=7)
    assert CategoryState.from_dict(s.to_dict()).to_dict() == s.to_dict()
