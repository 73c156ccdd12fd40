"""
Pytest configuration and fixtures for the gwntf tests.
"""

import os

# must be set before gwntf.database creates its engine
os.environ["DATABASE_URL"] = "sqlite://"
os.environ.setdefault("WNTF_THREADS", "1")

import numpy as np
import pytest

from gwntf.graph import build_knn
from gwntf.synthetic import make_synthetic
from gwntf.tensor import DataTensor
from gwntf.tensor_io import write_labels, write_wntf


@pytest.fixture
def cube_tensor():
    """2x2x2 tensor holding 1..8 in column-major order."""
    return DataTensor.from_flat((2, 2, 2), np.arange(1, 9))


@pytest.fixture
def random_tensor():
    """Strictly positive 4x5x6 tensor."""
    rng = np.random.default_rng(7)
    return DataTensor(0.1 + rng.random((4, 5, 6)))


@pytest.fixture
def synthetic_data():
    """Three well separated clusters of 6x6 samples."""
    return make_synthetic(clusters=3, per_cluster=8, shape=(6, 6), noise=0.01, seed=3)


@pytest.fixture
def synthetic_graph(synthetic_data):
    tensor, _ = synthetic_data
    return build_knn(tensor, p=3)


@pytest.fixture
def dataset_files(tmp_path, synthetic_data):
    """Synthetic tensor and labels written to disk."""
    tensor, labels = synthetic_data
    data_path = write_wntf(tensor, tmp_path / "synthetic.wntf")
    labels_path = write_labels(labels, tmp_path / "synthetic.wntf.labels")
    return data_path, labels_path
