import numpy as np
import pytest

from modelmarket.clustering import ClusterAssignment, cluster
from modelmarket.errors import InvalidInputError

from oracles import adjusted_rand_index, make_blobs


@pytest.fixture(scope="module")
def two_blobs():
    return make_blobs([(-6.0, -6.0), (6.0, 6.0)], points_per_blob=20,
                      spread=0.5, seed=1)


@pytest.mark.parametrize("method", ["kmeans", "spectral", "agglomerative"])
def test_separated_blobs_recovered(two_blobs, method):
    X, truth = two_blobs
    result = cluster(X, 2, method, seed=0)
    assert adjusted_rand_index(result.labels, truth) == 1.0


@pytest.mark.parametrize("method", ["kmeans", "spectral", "agglomerative"])
def test_k_equals_rows_gives_singletons(method):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(6, 3))
    result = cluster(X, 6, method, seed=0)
    assert sorted(result.labels) == list(range(6))


def test_k_one_inertia_is_total_scatter():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(15, 4))
    result = cluster(X, 1, "kmeans", seed=0)
    scatter = float(np.sum((X - X.mean(axis=0)) ** 2))
    assert result.inertia == pytest.approx(scatter, rel=1e-9)
    assert np.all(result.labels == 0)


def test_inertia_trace_non_increasing():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 5))
    for k in (2, 3, 7):
        result = cluster(X, k, "kmeans", seed=11)
        trace = np.array(result.inertia_trace)
        assert trace.size >= 1
        assert np.all(np.diff(trace) <= 1e-12)
        assert result.inertia == trace[-1]


@pytest.mark.parametrize("method", ["kmeans", "spectral", "agglomerative"])
def test_identical_rows_split_without_error(method):
    X = np.ones((7, 3))
    result = cluster(X, 3, method, seed=5)
    assert len(np.unique(result.labels)) == 3


@pytest.mark.parametrize("method", ["kmeans", "spectral", "agglomerative"])
def test_deterministic_per_seed(two_blobs, method):
    X, _ = two_blobs
    first = cluster(X, 4, method, seed=9)
    second = cluster(X, 4, method, seed=9)
    np.testing.assert_array_equal(first.labels, second.labels)


def test_k_out_of_range():
    X = np.zeros((4, 2))
    with pytest.raises(InvalidInputError):
        cluster(X, 0, "kmeans", seed=0)
    with pytest.raises(InvalidInputError):
        cluster(X, 5, "kmeans", seed=0)


def test_unknown_method():
    with pytest.raises(InvalidInputError):
        cluster(np.zeros((3, 2)), 2, "dbscan", seed=0)


def test_assignment_requires_full_label_coverage():
    with pytest.raises(InvalidInputError):
        ClusterAssignment(np.array([0, 0, 2]), k=3)


def test_agglomerative_tie_break_is_low_index():
    # Four corners of a square: two equal-distance merge options; the
    # deterministic rule merges the smallest id pair first.
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    first = cluster(X, 2, "agglomerative", seed=0)
    second = cluster(X, 2, "agglomerative", seed=99)
    np.testing.assert_array_equal(first.labels, second.labels)


def test_ari_oracle_sanity():
    assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) < 0.01
