"""
p-nearest-neighbour affinity graph over samples and the smoothness penalty
sum_ij V_ij ||a_i - a_j||^2 on the sample factor.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from sklearn.metrics import pairwise_distances

from .exceptions import ConfigError, ShapeError
from .tensor import DataTensor, matricize

logger = logging.getLogger(__name__)

HEAT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class AffinityGraph:
    """Symmetric sample affinity matrix V with zero diagonal."""

    weights: np.ndarray
    p: int
    weighting: str = "binary"
    sigma: float = 1.0

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise ShapeError(f"Affinity matrix must be square, got shape {weights.shape}")
        if np.any(weights < 0) or np.any(np.diag(weights) != 0):
            raise ShapeError("Affinity matrix must be nonnegative with a zero diagonal")
        if not np.array_equal(weights, weights.T):
            raise ShapeError("Affinity matrix must be symmetric")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def n_samples(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Diagonal of D (row sums of V)."""
        return self.weights.sum(axis=1)

    @property
    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees) - self.weights

    def edges(self):
        """Upper-triangle edges as (i, j, weight) rows."""
        rows, cols = np.nonzero(np.triu(self.weights))
        return np.column_stack([rows, cols, self.weights[rows, cols]])

    def write_edge_list(self, path: Union[str, Path]) -> Path:
        """Export the graph as CSV rows i,j,weight (i < j)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, self.edges(), delimiter=",", fmt=["%d", "%d", "%.17g"], header="i,j,weight", comments="")
        return path


def build_knn(
    samples: Union[np.ndarray, DataTensor],
    p: int = 5,
    weighting: str = "binary",
    sigma: float = 1.0,
) -> AffinityGraph:
    """
    Union-symmetrized p-nearest-neighbour graph under the Euclidean distance.

    Args:
        samples: n x d matrix with one flattened sample per row, or a tensor
            whose last mode indexes the samples
        p: Neighbours per sample, 1 <= p < n
        weighting: "binary" (weight 1) or "heat" (exp(-d^2 / sigma^2), never
            below HEAT_FLOOR so distant neighbours keep their edge)
        sigma: Heat kernel width

    Returns:
        AffinityGraph instance
    """
    if isinstance(samples, DataTensor):
        samples = matricize(samples, samples.order - 1)
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ShapeError(f"Samples must be a matrix, got {samples.ndim} dimensions")
    n = samples.shape[0]
    if not 1 <= p < n:
        raise ConfigError(f"p must satisfy 1 <= p < {n}, got {p}")
    if weighting not in ("binary", "heat"):
        raise ConfigError(f"Unknown weighting {weighting!r}")
    if weighting == "heat" and not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")

    distances = pairwise_distances(samples, metric="euclidean")
    distances = 0.5 * (distances + distances.T)
    np.fill_diagonal(distances, np.inf)
    # stable sort: equal distances resolve to the lower index
    neighbours = np.argsort(distances, axis=1, kind="stable")[:, :p]
    adjacency = np.zeros((n, n), dtype=bool)
    adjacency[np.repeat(np.arange(n), p), neighbours.ravel()] = True
    adjacency |= adjacency.T

    if weighting == "binary":
        weights = adjacency.astype(np.float64)
    else:
        np.fill_diagonal(distances, 0.0)
        heat = np.exp(-(distances ** 2) / sigma ** 2)
        clamped = int(np.sum(adjacency & (heat < HEAT_FLOOR))) // 2
        if clamped:
            logger.warning(
                "%d heat weights fell below %g and were clamped; sigma=%g may be too small",
                clamped,
                HEAT_FLOOR,
                sigma,
            )
        weights = np.where(adjacency, np.maximum(heat, HEAT_FLOOR), 0.0)
    logger.debug("Built %d-NN graph on %d samples with %d edges", p, n, int(adjacency.sum()) // 2)
    return AffinityGraph(weights=weights, p=p, weighting=weighting, sigma=sigma)


def _check_rows(graph: AffinityGraph, a_n: np.ndarray) -> np.ndarray:
    a_n = np.asarray(a_n, dtype=np.float64)
    if a_n.ndim != 2 or a_n.shape[0] != graph.n_samples:
        raise ShapeError(f"Sample factor shape {a_n.shape} does not match a graph on {graph.n_samples} samples")
    return a_n


def smoothness(graph: AffinityGraph, a_n: np.ndarray) -> float:
    """2 * trace(A^T (D - V) A), clipped at zero against rounding."""
    a_n = _check_rows(graph, a_n)
    return max(2.0 * float(np.sum(a_n * (graph.laplacian @ a_n))), 0.0)


def smoothness_pairwise(graph: AffinityGraph, a_n: np.ndarray) -> float:
    """The same penalty as an explicit double sum over sample pairs."""
    a_n = _check_rows(graph, a_n)
    diff = a_n[:, None, :] - a_n[None, :, :]
    return float(np.sum(graph.weights[:, :, None] * diff ** 2))
