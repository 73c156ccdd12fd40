"""
Clustering of the sample factor and the ACC / NMI / MI / Purity scores.
"""

import logging
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import entropy
from sklearn.cluster import KMeans
from sklearn.metrics import mutual_info_score
from sklearn.metrics.cluster import contingency_matrix

from .exceptions import ConfigError, ShapeError
from .models import ClusteringResult, ClusteringSummary

logger = logging.getLogger(__name__)

__all__ = [
    "ClusteringResult",
    "ClusteringSummary",
    "kmeans",
    "accuracy",
    "mutual_information",
    "normalized_mi",
    "max_normalized_mi",
    "purity",
    "score_clustering",
    "evaluate_embedding",
]


def kmeans(points: np.ndarray, k: int, seed: int = 0, restarts: int = 10) -> np.ndarray:
    """
    Lloyd k-means, best of `restarts` k-means++ initializations by inertia.

    Args:
        points: n x d matrix
        k: Number of clusters, 1 <= k <= n
        seed: Random state, so labels are reproducible
        restarts: Number of initializations

    Returns:
        Integer label per point
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError(f"kmeans needs an n x d matrix, got {points.ndim} dimensions")
    if not 1 <= k <= points.shape[0]:
        raise ConfigError(f"k must satisfy 1 <= k <= {points.shape[0]}, got {k}")
    model = KMeans(n_clusters=k, n_init=restarts, random_state=seed)
    return model.fit_predict(points)


def _check_labels(predicted: Sequence[int], truth: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    predicted = np.asarray(predicted).ravel()
    truth = np.asarray(truth).ravel()
    if predicted.size != truth.size:
        raise ShapeError(f"Label lengths differ: {predicted.size} predicted vs {truth.size} truth")
    if predicted.size == 0:
        raise ShapeError("Cannot score an empty labeling")
    return predicted, truth


def accuracy(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction matched under the best one-to-one relabeling of the predictions."""
    predicted, truth = _check_labels(predicted, truth)
    counts = contingency_matrix(truth, predicted)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return float(counts[rows, cols].sum() / truth.size)


def _entropies(predicted: np.ndarray, truth: np.ndarray) -> Tuple[float, float]:
    return (
        float(entropy(np.unique(predicted, return_counts=True)[1])),
        float(entropy(np.unique(truth, return_counts=True)[1])),
    )


def mutual_information(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """Mutual information of the two labelings, in nats."""
    predicted, truth = _check_labels(predicted, truth)
    return max(float(mutual_info_score(truth, predicted)), 0.0)


def normalized_mi(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """
    MI / sqrt(H(pred) H(truth)).

    If either labeling has a single label the score is 1 when both do and 0 otherwise.
    """
    predicted, truth = _check_labels(predicted, truth)
    h_pred, h_truth = _entropies(predicted, truth)
    if h_pred == 0 or h_truth == 0:
        return 1.0 if h_pred == h_truth else 0.0
    return float(np.clip(mutual_information(predicted, truth) / np.sqrt(h_pred * h_truth), 0.0, 1.0))


def max_normalized_mi(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """MI / max(H(pred), H(truth)), the reported MI score."""
    predicted, truth = _check_labels(predicted, truth)
    h_pred, h_truth = _entropies(predicted, truth)
    if max(h_pred, h_truth) == 0:
        return 1.0
    return float(np.clip(mutual_information(predicted, truth) / max(h_pred, h_truth), 0.0, 1.0))


def purity(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """Sum over predicted clusters of their majority class count, over n."""
    predicted, truth = _check_labels(predicted, truth)
    counts = contingency_matrix(truth, predicted)
    return float(counts.max(axis=0).sum() / truth.size)


def score_clustering(predicted: Sequence[int], truth: Sequence[int], seed: int = 0) -> ClusteringResult:
    predicted, truth = _check_labels(predicted, truth)
    return ClusteringResult(
        seed=seed,
        predicted=predicted,
        truth=truth,
        acc=accuracy(predicted, truth),
        nmi=normalized_mi(predicted, truth),
        mi=max_normalized_mi(predicted, truth),
        mi_raw=mutual_information(predicted, truth),
        purity=purity(predicted, truth),
    )


def evaluate_embedding(
    a_n: np.ndarray,
    truth: Sequence[int],
    k: int,
    seeds: Iterable[int],
    restarts: int = 10,
) -> ClusteringSummary:
    """
    Cluster the rows of a sample factor once per seed and score each clustering.

    Args:
        a_n: Sample factor, one row per sample
        truth: Ground-truth label per sample
        k: Number of clusters
        seeds: k-means seeds; results are ordered by seed
        restarts: k-means initializations per seed

    Returns:
        ClusteringSummary with per-seed results, means and standard deviations
    """
    a_n = np.asarray(a_n, dtype=np.float64)
    truth = np.asarray(truth).ravel()
    if a_n.ndim != 2 or a_n.shape[0] != truth.size:
        raise ShapeError(f"Embedding shape {a_n.shape} does not match {truth.size} labels")
    results = []
    for seed in sorted(set(int(s) for s in seeds)):
        labels = kmeans(a_n, k, seed=seed, restarts=restarts)
        results.append(score_clustering(labels, truth, seed=seed))
        logger.debug("Seed %d: ACC %.4f NMI %.4f", seed, results[-1].acc, results[-1].nmi)
    return ClusteringSummary(results)
