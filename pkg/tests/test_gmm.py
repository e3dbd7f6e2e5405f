import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from synthod.core import ConfigError, GenerationStalled, SeedPath
from synthod.priors.gmm import (GmmConfig, GmmSpec, apply_affine, generate_gmm_dataset,
                                _rejection, inflate_subspace, mixture_nll, nll_threshold, sample_gmm_spec,
                                sample_points)

LOG_2PI = np.log(2 * np.pi)


def one_d(W=1.0, b=0.0):
    return GmmSpec(np.ones(1), np.zeros((1, 1)), np.ones((1, 1)), np.array([[W]]), np.array([b]))


def test_degenerate_ranges():
    spec = sample_gmm_spec(GmmConfig(m_range=(1, 1), d_range=(2, 2)), SeedPath(0))
    assert spec.m == 1 and spec.d == 2


def test_default_ranges_and_determinism():
    cfg = GmmConfig()
    for i in range(20):
        spec = sample_gmm_spec(cfg, SeedPath(i))
        assert 1 <= spec.m <= 5 and 2 <= spec.d <= 100
        assert np.all(spec.variances > 0) and np.all(spec.variances <= 5)
    a, b = sample_gmm_spec(cfg, SeedPath(4)), sample_gmm_spec(cfg, SeedPath(4))
    assert a.to_dict() == b.to_dict()


def test_bad_config():
    with pytest.raises(ConfigError):
        GmmConfig(m_range=(0, 3))


def test_sample_mean_and_shift():
    n = 40_000
    x = sample_points(one_d(), n, SeedPath(1))
    assert abs(x.mean()) < 4 / np.sqrt(n)
    y = sample_points(one_d(b=5.0), n, SeedPath(1))
    assert np.allclose(y - x, 5.0)


def test_sample_variance_scaled():
    x = sample_points(one_d(W=2.0), 40_000, SeedPath(2))
    # sd of the sample variance of N(0, 4) at n = 40000 is about 0.028
    assert abs(x.var() - 4.0) < 0.15


def test_threshold_1d_matches_normal_quantile():
    thr = nll_threshold(one_d(), 0.90, 100_000, SeedPath(3))
    z = stats.norm.ppf(0.95)
    assert abs(z - 1.6449) < 1e-4
    assert thr == pytest.approx(0.5 * LOG_2PI + 0.5 * z**2, rel=0.02)


def test_threshold_median_splits_fresh_draws():
    spec = one_d()
    thr = nll_threshold(spec, 0.5, 100_000, SeedPath(4))
    fresh = mixture_nll(spec, sample_points(spec, 50_000, SeedPath(5)))
    assert abs(np.mean(fresh <= thr) - 0.5) < 0.01


def test_threshold_2d_chi_square_radius():
    spec = GmmSpec(np.ones(1), np.zeros((1, 2)), np.ones((1, 2)))
    thr = nll_threshold(spec, 0.90, 100_000, SeedPath(6))
    radius = 2 * (thr - LOG_2PI)
    assert radius == pytest.approx(stats.chi2.ppf(0.9, 2), rel=0.02)
    assert stats.chi2.ppf(0.9, 2) == pytest.approx(4.605, abs=1e-3)


def test_threshold_converges_with_n_ref():
    spec = one_d()
    a = nll_threshold(spec, 0.9, 50_000, SeedPath(7))
    b = nll_threshold(spec, 0.9, 100_000, SeedPath(7))
    assert abs(a - b) / abs(b) < 0.02


def test_inflate_full_subspace():
    spec = GmmSpec(np.ones(1), np.zeros((1, 4)), np.full((1, 4), 0.5))
    out, k, dims = inflate_subspace(spec, 1.0, 5.0, SeedPath(0))
    assert k == 0 and len(dims) == 4
    assert np.allclose(out.variances, 2.5)


def test_inflate_single_dim_and_determinant():
    rng = np.random.default_rng(0)
    spec = GmmSpec(np.array([0.5, 0.5]), rng.normal(size=(2, 7)), rng.uniform(0.5, 2, (2, 7)))
    out, k, dims = inflate_subspace(spec, 1 / 7, 5.0, SeedPath(1))
    assert len(dims) == 1
    out, k, dims = inflate_subspace(spec, 0.4, 5.0, SeedPath(2))
    ratio = np.prod(out.variances[k]) / np.prod(spec.variances[k])
    assert ratio == pytest.approx(5.0 ** np.ceil(0.4 * 7), rel=1e-12)
    other = 1 - k
    assert np.array_equal(out.variances[other], spec.variances[other])


def test_no_outliers_all_below_threshold():
    ds, lat, spec = generate_gmm_dataset(GmmConfig(n_ref=10_000), 200, 0, SeedPath(8), d=3,
                                         return_latent=True)
    assert ds.labels.sum() == 0
    assert np.all(mixture_nll(spec, lat) <= ds.meta["hyper"]["nll_threshold"])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12))
def test_label_soundness(seed, d):
    ds, lat, spec = generate_gmm_dataset(GmmConfig(n_ref=10_000), 100, 20, SeedPath(seed), d=d,
                                         return_latent=True)
    nll = mixture_nll(spec, lat)
    thr = ds.meta["hyper"]["nll_threshold"]
    assert np.all(nll[ds.labels == 1] > thr)
    assert np.all(nll[ds.labels == 0] <= thr)
    assert np.allclose(apply_affine(spec, lat), ds.features)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_affine_preserves_mahalanobis(seed, d):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(d, d)) + 3 * np.eye(d)
    b = rng.normal(size=d)
    mu = rng.normal(size=d)
    S = np.diag(rng.uniform(0.5, 2, d))
    x = rng.normal(size=d)
    pre = (x - mu) @ np.linalg.solve(S, x - mu)
    y, m2, S2 = W @ x + b, W @ mu + b, W @ S @ W.T
    post = (y - m2) @ np.linalg.solve(S2, y - m2)
    assert abs(pre - post) <= 1e-8 * max(1.0, pre)


def test_stall_raises():
    cfg = GmmConfig(n_ref=10_000, max_proposals=20_000)
    spec = one_d()
    with pytest.raises(GenerationStalled):
        _rejection(spec, spec, 10, -1e9, True, SeedPath(1), cfg)


def test_same_seed_same_dataset():
    a = generate_gmm_dataset(GmmConfig(n_ref=10_000), 50, 5, SeedPath(9), d=4)
    b = generate_gmm_dataset(GmmConfig(n_ref=10_000), 50, 5, SeedPath(9), d=4)
    assert np.array_equal(a.features, b.features)
