"""
Dense nonnegative tensors, unfoldings, Khatri-Rao products and the Kruskal (CP) model.

Element order is column-major throughout: in a flat view of a tensor the
first index varies fastest, and the columns of a mode-n unfolding enumerate
the remaining indices in the same order. All values are float64.
"""

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import khatri_rao as _khatri_rao_pair

from .exceptions import ShapeError, TensorFormatError


@dataclass(frozen=True, eq=False)
class DataTensor:
    """An N-way (N >= 2) nonnegative array.

    The array is copied on construction and made read-only.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="F", copy=True)
        if data.ndim < 2:
            raise ShapeError(f"A tensor needs at least 2 modes, got {data.ndim}")
        if 0 in data.shape:
            raise ShapeError(f"Tensor extents must be positive, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise TensorFormatError("Tensor contains NaN or infinite entries")
        if np.any(data < 0):
            raise TensorFormatError("Tensor entries must be nonnegative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_flat(cls, shape: Sequence[int], values: Sequence[float]) -> "DataTensor":
        """
        Build a tensor from a flat column-major value sequence.

        Args:
            shape: Extents (I_1, ..., I_N)
            values: Flat values, first index fastest

        Returns:
            DataTensor instance
        """
        shape = tuple(int(s) for s in shape)
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != int(np.prod(shape)):
            raise ShapeError(
                f"Got {values.size} values for shape {shape} ({int(np.prod(shape))} expected)"
            )
        return cls(np.reshape(values, shape, order="F"))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        """Number of modes N."""
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def total_mass(self) -> float:
        return float(self.data.sum())

    def flat_values(self) -> np.ndarray:
        """Values in column-major order."""
        return self.data.ravel(order="F")

    def matricize(self, mode: int) -> np.ndarray:
        return matricize(self, mode)

    def scaled_to_unit(self) -> "DataTensor":
        """Divide by the global maximum so entries land in [0, 1]."""
        peak = self.data.max()
        if peak <= 0:
            return self
        return DataTensor(self.data / peak)

    def floored(self, eps: float) -> "DataTensor":
        return DataTensor(np.maximum(self.data, eps))

    def equals(self, other: "DataTensor") -> bool:
        return self.shape == other.shape and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class KruskalFactors:
    """Rank-R CP model: one nonnegative I_n x R factor matrix per mode."""

    factors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        factors = tuple(np.array(f, dtype=np.float64, copy=True) for f in self.factors)
        if len(factors) < 2:
            raise ShapeError(f"A Kruskal model needs at least 2 factors, got {len(factors)}")
        for n, factor in enumerate(factors):
            if factor.ndim != 2:
                raise ShapeError(f"Factor {n} must be a matrix, got {factor.ndim} dimensions")
        ranks = {factor.shape[1] for factor in factors}
        if len(ranks) != 1 or 0 in ranks:
            raise ShapeError(f"All factors must share a positive column count, got {sorted(ranks)}")
        for n, factor in enumerate(factors):
            if np.any(factor < 0):
                raise ShapeError(f"Factor {n} has negative entries")
            factor.setflags(write=False)
        object.__setattr__(self, "factors", factors)

    @classmethod
    def random(cls, shape: Sequence[int], rank: int, seed: Optional[int] = None) -> "KruskalFactors":
        """
        Draw factors i.i.d. uniform on (0, 1] from a seeded generator.

        Args:
            shape: Tensor extents the model reconstructs
            rank: Number of components R
            seed: Seed for numpy's default generator

        Returns:
            KruskalFactors instance
        """
        if rank < 1:
            raise ShapeError(f"Rank must be positive, got {rank}")
        rng = np.random.default_rng(seed)
        return cls(tuple(1.0 - rng.random((extent, rank)) for extent in shape))

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def sample_factor(self) -> np.ndarray:
        """The factor of the last mode (one row per sample)."""
        return self.factors[-1]

    @property
    def total_mass(self) -> float:
        """Sum of all entries of the reconstruction, without forming it."""
        column_mass = np.ones(self.rank)
        for factor in self.factors:
            column_mass = column_mass * factor.sum(axis=0)
        return float(column_mass.sum())

    def with_factor(self, mode: int, factor: np.ndarray) -> "KruskalFactors":
        _check_mode(mode, self.order)
        factors = list(self.factors)
        factors[mode] = factor
        return KruskalFactors(tuple(factors))

    def mass_matched(self, total: float) -> "KruskalFactors":
        """Rescale every factor equally so the reconstruction sums to `total`."""
        current = self.total_mass
        if current <= 0 or total <= 0:
            return self
        scale = (total / current) ** (1.0 / self.order)
        return KruskalFactors(tuple(f * scale for f in self.factors))


TensorLike = Union[DataTensor, np.ndarray]


def _as_array(tensor: TensorLike) -> np.ndarray:
    return tensor.data if isinstance(tensor, DataTensor) else np.asarray(tensor, dtype=np.float64)


def _check_mode(mode: int, order: int) -> None:
    if not 0 <= mode < order:
        raise ShapeError(f"Mode {mode} out of range for a {order}-way tensor")


def matricize(tensor: TensorLike, mode: int) -> np.ndarray:
    """
    Mode-n unfolding: the mode-n fibers become the columns of an I_n x I_-n matrix.

    Args:
        tensor: Tensor to unfold
        mode: 0-based mode index

    Returns:
        Matrix whose column j is the fiber at the j-th remaining multi-index,
        remaining indices enumerated column-major
    """
    data = _as_array(tensor)
    _check_mode(mode, data.ndim)
    return np.reshape(np.moveaxis(data, mode, 0), (data.shape[mode], -1), order="F")


def refold(matrix: np.ndarray, shape: Sequence[int], mode: int) -> DataTensor:
    """
    Inverse of `matricize`.

    Args:
        matrix: I_n x I_-n unfolding
        shape: Target tensor extents
        mode: Mode the matrix was unfolded along

    Returns:
        DataTensor of the given shape
    """
    shape = tuple(int(s) for s in shape)
    _check_mode(mode, len(shape))
    matrix = np.asarray(matrix, dtype=np.float64)
    rest = tuple(extent for m, extent in enumerate(shape) if m != mode)
    expected = (shape[mode], int(np.prod(rest)))
    if matrix.shape != expected:
        raise ShapeError(f"Unfolding has shape {matrix.shape}, expected {expected} for mode {mode}")
    moved = np.reshape(matrix, (shape[mode],) + rest, order="F")
    return DataTensor(np.moveaxis(moved, 0, mode))


def khatri_rao(mats: Iterable[np.ndarray]) -> np.ndarray:
    """
    Column-wise Kronecker product of the matrices, in the order given.

    The first matrix's row index varies slowest in the result.
    """
    mats = [np.asarray(m, dtype=np.float64) for m in mats]
    if not mats:
        raise ShapeError("khatri_rao needs at least one matrix")
    if any(m.ndim != 2 for m in mats):
        raise ShapeError("khatri_rao operands must be matrices")
    ranks = {m.shape[1] for m in mats}
    if len(ranks) != 1:
        raise ShapeError(f"khatri_rao operands must share a column count, got {sorted(ranks)}")
    if len(mats) == 1:
        return mats[0].copy()
    return reduce(_khatri_rao_pair, mats)


def coproduct_matrix(model: KruskalFactors, mode: int) -> np.ndarray:
    """
    Khatri-Rao product of every factor except `mode`, shape I_-n x R.

    With column-major unfoldings the factors enter in decreasing mode order,
    so that matricize(reconstruct(model), n) == A_n @ coproduct_matrix(model, n).T.
    """
    _check_mode(mode, model.order)
    return khatri_rao([model.factors[m] for m in reversed(range(model.order)) if m != mode])


def unfolded_reconstruction(model: KruskalFactors, mode: int) -> np.ndarray:
    return model.factors[mode] @ coproduct_matrix(model, mode).T


def reconstruct(model: KruskalFactors) -> DataTensor:
    """Full tensor sum_r a_r^(1) o ... o a_r^(N)."""
    return refold(unfolded_reconstruction(model, 0), model.shape, 0)
