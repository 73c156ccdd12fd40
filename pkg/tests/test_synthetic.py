"""
Tests for the synthetic data generator.
"""

import numpy as np
import pytest

from gwntf.evaluation import evaluate_embedding
from gwntf.exceptions import ConfigError
from gwntf.synthetic import make_synthetic
from gwntf.tensor import matricize


class TestMakeSynthetic:
    """Test the clustered rank-1 template generator."""

    def test_shapes_and_labels(self):
        tensor, labels = make_synthetic(clusters=3, per_cluster=4, shape=(5, 6), seed=1)
        assert tensor.shape == (5, 6, 12)
        assert sorted(np.bincount(labels).tolist()) == [4, 4, 4]

    def test_seeded(self):
        first = make_synthetic(2, 3, (4, 4), seed=7)
        second = make_synthetic(2, 3, (4, 4), seed=7)
        assert first[0].equals(second[0])
        np.testing.assert_array_equal(first[1], second[1])

    def test_noise_free_samples_are_rank_one(self):
        tensor, labels = make_synthetic(2, 3, (4, 5), noise=0.0, seed=2)
        for j in range(tensor.shape[-1]):
            singular = np.linalg.svd(tensor.data[:, :, j], compute_uv=False)
            assert singular[1] < 1e-12 * singular[0]

    def test_noise_free_clusters_repeat_templates(self):
        tensor, labels = make_synthetic(2, 3, (4, 5), noise=0.0, seed=2)
        samples = matricize(tensor, 2)
        for label in (0, 1):
            rows = samples[labels == label]
            np.testing.assert_array_equal(rows, np.tile(rows[0], (3, 1)))

    def test_nonnegative_with_noise(self):
        tensor, _ = make_synthetic(2, 5, (3, 3), noise=1.0, seed=3)
        assert np.all(tensor.data >= 0)

    @pytest.mark.parametrize("kwargs", [
        {"clusters": 0, "per_cluster": 2, "shape": (2, 2)},
        {"clusters": 2, "per_cluster": 0, "shape": (2, 2)},
        {"clusters": 2, "per_cluster": 2, "shape": ()},
        {"clusters": 2, "per_cluster": 2, "shape": (2, 2), "noise": -0.1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            make_synthetic(**kwargs)

    def test_single_cluster(self):
        _, labels = make_synthetic(1, 4, (3, 3), seed=0)
        assert labels.tolist() == [0, 0, 0, 0]

    def test_kmeans_separates_raw_samples(self):
        tensor, labels = make_synthetic(3, 20, (8, 8), noise=0.05, seed=0)
        summary = evaluate_embedding(matricize(tensor, 2), labels, 3, range(3))
        assert summary.mean("acc") >= 0.8
