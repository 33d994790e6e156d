import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import trapezoid
from scipy.ndimage import gaussian_filter

from balanced_mse.numerics import log_gaussian_full
from balanced_mse.priors import (
    BatchPrior,
    BinnedPrior,
    DiscretePrior,
    GmmPrior,
    _smooth_local_linear,
    fit_binned,
    fit_gmm,
    gmm_log_density,
    prior_from_json,
    prior_to_json,
)

seeds = st.integers(0, 2**32 - 1)


def random_gmm(rng, d, K):
    A = rng.normal(size=(K, d, d))
    covs = A @ np.swapaxes(A, 1, 2) + 0.3 * np.eye(d)
    return GmmPrior(rng.dirichlet(np.ones(K)), rng.normal(0, 2, (K, d)), covs)


# -- GmmPrior ---------------------------------------------------------------

def test_gmm_weights_must_sum_to_one():
    with pytest.raises(ValueError, match="sum to 1"):
        GmmPrior([0.5, 0.6], [[0.0], [1.0]], [[[1.0]], [[1.0]]])


def test_gmm_negative_weight():
    with pytest.raises(ValueError):
        GmmPrior([1.5, -0.5], [[0.0], [1.0]], [[[1.0]], [[1.0]]])


def test_gmm_shape_mismatch():
    with pytest.raises(ValueError, match="inconsistent"):
        GmmPrior([1.0], [[0.0, 0.0]], [[[1.0]]])


def test_gmm_asymmetric_cov():
    with pytest.raises(ValueError, match="symmetric"):
        GmmPrior([1.0], [[0.0, 0.0]], [[[1.0, 0.1], [0.0, 1.0]]])


def test_gmm_log_density_single_at_mode():
    prior = GmmPrior([1.0], [[0.0]], [[[1.0]]])
    assert gmm_log_density(prior, [0.0]) == pytest.approx(-0.9189385, abs=1e-7)


def test_gmm_log_density_symmetric_pair():
    # mpmath: log(0.5 N(0;-1,1) + 0.5 N(0;1,1))
    prior = GmmPrior([0.5, 0.5], [[-1.0], [1.0]], [[[1.0]], [[1.0]]])
    np.testing.assert_allclose(gmm_log_density(prior, [0.0]), -1.4189385332046727, atol=1e-14)


def test_gmm_log_density_dimension_mismatch():
    prior = GmmPrior([1.0], [[0.0]], [[[1.0]]])
    with pytest.raises(ValueError, match="dimension"):
        gmm_log_density(prior, [0.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), seeds)
def test_single_component_matches_full_gaussian(d, seed):
    rng = np.random.default_rng(seed)
    prior = random_gmm(rng, d, 1)
    point = rng.normal(0, 2, d)
    ref = log_gaussian_full(point, prior.means[0], prior.covs[0])
    assert abs(gmm_log_density(prior, point) - ref) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), seeds)
def test_gmm_density_integrates_to_one(K, seed):
    rng = np.random.default_rng(seed)
    prior = random_gmm(rng, 1, K)
    grid = np.linspace(-40, 40, 80001)
    dens = prior.density(grid[:, None])
    assert np.all(dens >= 0)
    assert abs(trapezoid(dens, grid) - 1.0) < 1e-3


def test_gmm_density_matches_scipy_mixture():
    rng = np.random.default_rng(5)
    prior = random_gmm(rng, 2, 3)
    pts = rng.normal(0, 2, (20, 2))
    ref = sum(w * stats.multivariate_normal(m, c).pdf(pts)
              for w, m, c in zip(prior.weights, prior.means, prior.covs))
    np.testing.assert_allclose(prior.density(pts), ref, rtol=1e-12)


def test_gmm_sample_moments():
    prior = GmmPrior([0.3, 0.7], [[-2.0], [1.0]], [[[0.5]], [[1.5]]])
    draws = prior.sample(200_000, np.random.default_rng(0))
    mean = 0.3 * -2 + 0.7 * 1
    var = 0.3 * (0.5 + 4) + 0.7 * (1.5 + 1) - mean**2
    assert abs(draws.mean() - mean) < 0.02
    assert abs(draws.var() - var) < 0.05


# -- fit_gmm ----------------------------------------------------------------

def test_fit_two_points_single_component():
    prior = fit_gmm([[-1.0], [1.0]], K=1)
    assert prior.means[0, 0] == pytest.approx(0.0, abs=1e-12)
    # biased ML variance plus the 1e-6 ridge
    assert prior.covs[0, 0, 0] == pytest.approx(1.0, abs=2e-6)


def test_fit_recovers_normal():
    y = np.random.default_rng(1).normal(5, 2, 10_000)
    prior = fit_gmm(y, K=1)
    assert abs(prior.means[0, 0] - 5) < 0.1
    assert abs(np.sqrt(prior.covs[0, 0, 0]) - 2) < 0.1


def test_fit_recovers_two_modes():
    rng = np.random.default_rng(2)
    y = np.concatenate([rng.normal(-3, 1, 5000), rng.normal(3, 1, 5000)])
    prior = fit_gmm(y, K=2, seed=0)
    order = np.argsort(prior.means[:, 0])
    np.testing.assert_allclose(prior.means[order, 0], [-3, 3], atol=0.2)
    np.testing.assert_allclose(prior.weights, [0.5, 0.5], atol=0.05)


def test_fit_needs_k_distinct_labels():
    with pytest.raises(ValueError, match="distinct"):
        fit_gmm([[1.0], [1.0], [1.0]], K=2)


def test_fit_rejects_zero_components():
    with pytest.raises(ValueError):
        fit_gmm([[0.0], [1.0]], K=0)


def test_fit_duplicated_labels_do_not_collapse():
    y = np.array([0.0] * 50 + [5.0] * 50 + [2.0])
    prior = fit_gmm(y, K=3, seed=0)
    assert np.all(np.linalg.eigvalsh(prior.covs) > 0)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 2), st.integers(1, 4), seeds)
def test_em_log_likelihood_non_decreasing(d, K, seed):
    rng = np.random.default_rng(seed)
    y = random_gmm(rng, d, 3).sample(400, rng)
    prior = fit_gmm(y, K, seed=seed % 1000)
    ll = np.asarray(prior.log_likelihoods)
    assert 1 <= ll.size <= 200
    assert np.all(np.diff(ll) >= -1e-9)


def test_fit_is_deterministic():
    y = np.random.default_rng(3).exponential(1.0, (500, 1))
    a, b = fit_gmm(y, 3, seed=11), fit_gmm(y, 3, seed=11)
    for field in ("weights", "means", "covs"):
        assert getattr(a, field).tobytes() == getattr(b, field).tobytes()


def test_fit_2d_labels():
    rng = np.random.default_rng(4)
    y = rng.multivariate_normal([1.0, -1.0], [[1.0, 0.5], [0.5, 2.0]], 20_000)
    prior = fit_gmm(y, K=1)
    np.testing.assert_allclose(prior.means[0], [1, -1], atol=0.05)
    np.testing.assert_allclose(prior.covs[0], [[1, 0.5], [0.5, 2]], atol=0.08)


# -- BinnedPrior / fit_binned -----------------------------------------------

def test_binned_single_bin_mass():
    prior = fit_binned([0.5] * 10, n_bins=2, range=(0, 1), smoothing_bandwidth=0)
    np.testing.assert_allclose(prior.densities, [0.0, 2.0])
    np.testing.assert_allclose(prior.bin_width, [0.5])
    np.testing.assert_allclose(prior.centers[:, 0], [0.25, 0.75])


def test_binned_uniform_grid():
    labels = (np.arange(8) + 0.5) / 8
    prior = fit_binned(labels, n_bins=4, range=(0, 1), smoothing_bandwidth=0)
    np.testing.assert_allclose(prior.densities, 1.0)


def test_binned_smoothing_is_plain_gaussian_in_interior():
    counts = np.random.default_rng(0).poisson(20, 80).astype(float)
    ref = gaussian_filter(counts, 2.0, mode="constant", truncate=4.0)
    np.testing.assert_allclose(_smooth_local_linear(counts, [2.0])[10:-10], ref[10:-10], rtol=1e-12)


def test_binned_smoothing_keeps_linear_trend_at_edges():
    counts = 5.0 + 2.0 * np.arange(30)
    np.testing.assert_allclose(_smooth_local_linear(counts, [1.5]), counts, rtol=1e-10)


def test_binned_exponential_first_bin():
    y = np.clip(np.random.default_rng(0).exponential(1.0, 10_000), 0, 5)
    prior = fit_binned(y, n_bins=50, range=(0, 5), smoothing_bandwidth=0.1)
    assert abs(prior.densities[0] - 1.0) < 0.1


def test_binned_all_outside_range():
    with pytest.raises(ValueError, match="outside"):
        fit_binned([5.0, 6.0], n_bins=4, range=(0, 1))


def test_binned_clamps_outliers():
    prior = fit_binned([-3.0, 0.1, 0.9, 7.0], n_bins=2, range=(0, 1), smoothing_bandwidth=0)
    # two labels land in each edge bin
    np.testing.assert_allclose(prior.densities, [1.0, 1.0])


def test_binned_needs_two_bins():
    with pytest.raises(ValueError):
        fit_binned([0.5], n_bins=1, range=(0, 1))


def test_binned_range_order():
    with pytest.raises(ValueError):
        fit_binned([0.5], n_bins=4, range=(1, 0))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(2, 40), st.sampled_from([None, 0.0, 0.3, 2.0]), seeds)
def test_binned_normalized(d, n_bins, bandwidth, seed):
    y = np.random.default_rng(seed).normal(0, 1, (300, d))
    prior = fit_binned(y, n_bins, (-3, 3), bandwidth)
    assert abs(prior.total_mass - 1.0) < 1e-6
    assert np.all(prior.densities >= 0)


def test_binned_regular_grid_2d():
    y = np.random.default_rng(0).normal(0, 1, (100, 2))
    prior = fit_binned(y, 5, ((-2, 2), (0, 10)))
    assert prior.centers.shape == (25, 2)
    np.testing.assert_allclose(np.diff(np.unique(prior.centers[:, 0])), 0.8, rtol=1e-12)
    np.testing.assert_allclose(np.diff(np.unique(prior.centers[:, 1])), 2.0, rtol=1e-12)


def test_binned_density_lookup():
    prior = BinnedPrior([[0.25], [0.75]], [0.4, 1.6], [0.5])
    np.testing.assert_allclose(prior.density([[0.1], [0.6], [0.99], [-4.0]]), [0.4, 1.6, 1.6, 0.4])


def test_binned_rejects_negative_density():
    with pytest.raises(ValueError):
        BinnedPrior([[0.0], [1.0]], [-0.1, 1.1], [1.0])


# -- BatchPrior / DiscretePrior ---------------------------------------------

def test_batch_prior_needs_two_labels():
    with pytest.raises(ValueError, match="at least 2"):
        BatchPrior([[1.0]])


def test_discrete_prior_validation():
    with pytest.raises(ValueError):
        DiscretePrior((0, 1), [0.7, 0.7])
    with pytest.raises(ValueError):
        DiscretePrior((0, 1, 2), [0.5, 0.5])


def test_discrete_from_counts():
    prior = DiscretePrior.from_counts([30, 10])
    np.testing.assert_allclose(prior.probs, [0.75, 0.25])
    assert prior.classes == (0, 1)


# -- serialization ----------------------------------------------------------

def test_gmm_json_round_trip_is_lossless():
    prior = random_gmm(np.random.default_rng(9), 2, 3)
    back = prior_from_json(prior_to_json(prior))
    for field in ("weights", "means", "covs"):
        assert getattr(back, field).tobytes() == getattr(prior, field).tobytes()


def test_binned_and_discrete_round_trip():
    binned = fit_binned(np.random.default_rng(0).normal(size=200), 7, (-3, 3))
    back = prior_from_json(prior_to_json(binned))
    assert back.densities.tobytes() == binned.densities.tobytes()
    assert back.centers.tobytes() == binned.centers.tobytes()
    disc = DiscretePrior(("a", "b", "c"), [0.1, 0.2, 0.7])
    back = prior_from_json(prior_to_json(disc))
    assert back.classes == disc.classes and back.probs.tobytes() == disc.probs.tobytes()


def test_json_document_shape():
    doc = json.loads(prior_to_json(GmmPrior([1.0], [[0.0]], [[[1.0]]])))
    assert doc == {"kind": "gmm", "weights": [1.0], "means": [[0.0]], "covs": [[[1.0]]]}


def test_unknown_prior_kind():
    with pytest.raises(ValueError, match="unknown"):
        prior_from_json('{"kind": "kde"}')
