import numpy as np
import pytest

from fenec import kmeans
from fenec.errors import CardinalityError


class TestContracts:
    def test_k_equal_n_recovers_inputs(self, rng):
        x = rng.normal(size=(8, 3))
        result = kmeans(x, 8, seed=0)
        assert result.objective == 0.0
        got = sorted(map(tuple, result.centroids.tolist()))
        want = sorted(map(tuple, x.tolist()))
        np.testing.assert_allclose(got, want)

    def test_k_one_recovers_column_mean(self, rng):
        x = rng.normal(size=(40, 6))
        result = kmeans(x, 1, seed=3)
        np.testing.assert_allclose(result.centroids[0], x.mean(axis=0), atol=1e-10)

    def test_two_separated_blobs(self, rng):
        a = rng.normal([0.0, 0.0], 0.3, size=(50, 2))
        b = rng.normal([10.0, 10.0], 0.3, size=(50, 2))
        result = kmeans(np.vstack([a, b]), 2, seed=1)
        want = sorted([a.mean(axis=0).tolist(), b.mean(axis=0).tolist()])
        got = sorted(result.centroids.tolist())
        for g, w in zip(got, want):
            assert np.linalg.norm(np.array(g) - np.array(w)) < 0.5

    def test_k_larger_than_n_rejected(self, rng):
        with pytest.raises(CardinalityError):
            kmeans(rng.normal(size=(3, 2)), 4, seed=0)

    def test_k_must_be_positive(self, rng):
        with pytest.raises(CardinalityError):
            kmeans(rng.normal(size=(3, 2)), 0, seed=0)


class TestDeterminism:
    def test_same_seed_bit_identical(self, rng):
        x = rng.normal(size=(60, 4))
        r1 = kmeans(x, 5, seed=42)
        r2 = kmeans(x, 5, seed=42)
        assert np.array_equal(r1.centroids, r2.centroids)
        assert r1.objective_history == r2.objective_history

    def test_seed_changes_initialization(self, rng):
        x = rng.normal(size=(60, 4))
        r1 = kmeans(x, 5, seed=0, max_iter=1)
        r2 = kmeans(x, 5, seed=99, max_iter=1)
        assert not np.array_equal(r1.centroids, r2.centroids)


class TestObjective:
    def test_history_non_increasing_over_seeds(self, rng):
        x = rng.normal(size=(80, 3))
        x[:40] += 4.0
        for seed in range(20):
            hist = kmeans(x, 6, seed=seed).objective_history
            assert all(b <= a for a, b in zip(hist, hist[1:]))

    def test_objective_matches_final_assignment(self, rng):
        x = rng.normal(size=(30, 2))
        result = kmeans(x, 3, seed=7)
        recomputed = sum(
            np.sum((x[result.labels == j] - result.centroids[j]) ** 2)
            for j in range(3)
        )
        assert result.objective == pytest.approx(recomputed, abs=1e-9)


class TestEmptyClusters:
    def test_forced_empty_cluster_is_repaired(self):
        x = np.array([[0.0], [0.4], [1.0]])
        # The third centroid starts far away and captures no points.
        result = kmeans(x, 3, seed=0, init_centroids=np.array([[0.0], [0.4], [100.0]]))
        assert len(np.unique(result.labels)) == 3
        assert result.objective == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(sorted(result.centroids.ravel()), [0.0, 0.4, 1.0])

    def test_duplicate_points_with_k_equal_n(self):
        x = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
        result = kmeans(x, 3, seed=5)
        assert result.centroids.shape == (3, 2)
        assert np.isfinite(result.centroids).all()
        assert result.objective == pytest.approx(0.0, abs=1e-12)
