"""
Desk-scale clustered test data.

Recipe: for each cluster draw one rank-1 template, the outer product of one
vector per sample mode with entries uniform on (0, 1]. Each sample is its
cluster's template plus i.i.d. Gaussian noise with standard deviation
`noise`, clipped at zero. Samples are shuffled with the same seeded
generator and stacked along a new last mode.
"""

from functools import reduce
from typing import Sequence, Tuple

import numpy as np

from .exceptions import ConfigError
from .tensor import DataTensor


def make_synthetic(
    clusters: int,
    per_cluster: int,
    shape: Sequence[int],
    noise: float = 0.05,
    seed: int = 0,
) -> Tuple[DataTensor, np.ndarray]:
    """
    Generate noisy rank-1 cluster templates.

    Args:
        clusters: Number of clusters k
        per_cluster: Samples per cluster
        shape: Extents of one sample (at least one mode)
        noise: Standard deviation of the additive Gaussian noise
        seed: Generator seed

    Returns:
        (tensor of shape shape + (k * per_cluster,), label per sample)
    """
    shape = tuple(int(s) for s in shape)
    if clusters < 1 or per_cluster < 1:
        raise ConfigError("clusters and per_cluster must be positive")
    if not shape or any(s < 1 for s in shape):
        raise ConfigError(f"Invalid sample shape {shape}")
    if noise < 0:
        raise ConfigError(f"noise must be nonnegative, got {noise}")

    rng = np.random.default_rng(seed)
    templates = [
        reduce(np.multiply.outer, [1.0 - rng.random(extent) for extent in shape])
        for _ in range(clusters)
    ]
    labels = np.repeat(np.arange(clusters), per_cluster)
    labels = labels[rng.permutation(labels.size)]

    samples = []
    for label in labels:
        sample = templates[label]
        if noise > 0:
            sample = np.maximum(sample + noise * rng.standard_normal(shape), 0.0)
        samples.append(sample)
    return DataTensor(np.stack(samples, axis=-1)), labels
