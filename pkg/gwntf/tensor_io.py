"""
Reading and writing tensors: the WNTF binary format and CSV sample files.

WNTF layout (little-endian): magic b"WNTF", u32 version (1), u32 N,
N x u64 extents, then prod(extents) f64 values in column-major order.
"""

import logging
import struct
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ShapeError, TensorFormatError
from .tensor import DataTensor, KruskalFactors, refold

logger = logging.getLogger(__name__)

MAGIC = b"WNTF"
VERSION = 1
_HEADER = struct.Struct("<4sII")

PathLike = Union[str, Path]


def write_wntf(tensor: DataTensor, path: PathLike) -> Path:
    """
    Write a tensor in the WNTF binary format.

    Args:
        tensor: Tensor to store
        path: Destination file

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, tensor.order))
        f.write(np.asarray(tensor.shape, dtype="<u8").tobytes())
        f.write(tensor.flat_values().astype("<f8").tobytes())
    return path


def read_wntf(path: PathLike) -> DataTensor:
    """
    Read a tensor written by `write_wntf`.

    Args:
        path: Source file

    Returns:
        DataTensor instance
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TensorFormatError(f"{path}: file too short for a WNTF header")
    magic, version, order = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TensorFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TensorFormatError(f"{path}: unsupported WNTF version {version}")
    offset = _HEADER.size
    extents_end = offset + 8 * order
    if len(raw) < extents_end:
        raise TensorFormatError(f"{path}: truncated extents")
    shape = tuple(int(s) for s in np.frombuffer(raw, dtype="<u8", count=order, offset=offset))
    count = int(np.prod(shape))
    if len(raw) != extents_end + 8 * count:
        raise TensorFormatError(
            f"{path}: expected {count} values for shape {shape}, "
            f"found {(len(raw) - extents_end) / 8:g}"
        )
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=extents_end)
    return DataTensor.from_flat(shape, values)


def parse_shape(text: str) -> Tuple[int, ...]:
    """Parse '32x32' or '32,32' into a tuple of positive extents."""
    parts = [p for p in text.replace("x", ",").replace("X", ",").split(",") if p.strip()]
    try:
        shape = tuple(int(p) for p in parts)
    except ValueError as e:
        raise ShapeError(f"Invalid shape declaration {text!r}") from e
    if not shape or any(s <= 0 for s in shape):
        raise ShapeError(f"Invalid shape declaration {text!r}")
    return shape


def read_csv_samples(path: PathLike, sample_shape: Optional[Sequence[int]] = None) -> DataTensor:
    """
    Read one flattened sample per CSV row and stack the samples along the last mode.

    Args:
        path: CSV file, comma separated, no header
        sample_shape: Extents of one sample; read from the sidecar `<path>.shape`
            when omitted

    Returns:
        DataTensor of shape sample_shape + (n_samples,)
    """
    path = Path(path)
    if sample_shape is None:
        sidecar = Path(f"{path}.shape")
        if not sidecar.exists():
            raise ShapeError(f"No --shape given and no sidecar {sidecar}")
        sample_shape = parse_shape(sidecar.read_text().strip())
    sample_shape = tuple(int(s) for s in sample_shape)
    try:
        rows = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise TensorFormatError(f"{path}: {e}") from e
    features = int(np.prod(sample_shape))
    if rows.shape[1] != features:
        raise ShapeError(
            f"{path}: rows have {rows.shape[1]} values, shape {sample_shape} needs {features}"
        )
    full_shape = sample_shape + (rows.shape[0],)
    # rows are exactly the unfolding along the sample mode
    return refold(rows, full_shape, len(full_shape) - 1)


def read_labels(path: PathLike) -> np.ndarray:
    """Read one integer label per line."""
    try:
        return np.loadtxt(path, dtype=np.int64, ndmin=1)
    except ValueError as e:
        raise TensorFormatError(f"{path}: labels must be integers ({e})") from e


def write_labels(labels: Sequence[int], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")
    return path


def ingest(
    path: PathLike,
    fmt: str = "wntf",
    shape: Optional[Sequence[int]] = None,
    labels_path: Optional[PathLike] = None,
) -> Tuple[DataTensor, Optional[np.ndarray]]:
    """
    Load a dataset, samples on the last mode, values scaled to [0, 1].

    Args:
        path: Dataset file
        fmt: "wntf" or "csv"
        shape: Sample extents (csv only)
        labels_path: Optional labels file, one label per sample

    Returns:
        (tensor, labels or None)
    """
    if fmt == "wntf":
        tensor = read_wntf(path)
    elif fmt == "csv":
        tensor = read_csv_samples(path, shape)
    else:
        raise TensorFormatError(f"Unknown dataset format {fmt!r} (expected 'wntf' or 'csv')")

    labels = None
    if labels_path is not None:
        labels = read_labels(labels_path)
        if labels.size != tensor.shape[-1]:
            raise ShapeError(
                f"{labels.size} labels for {tensor.shape[-1]} samples in {path}"
            )
    logger.info("Ingested %s: shape %s", path, tensor.shape)
    return tensor.scaled_to_unit(), labels


def dump_factors(model: KruskalFactors, directory: PathLike, prefix: str) -> List[Path]:
    """Write each factor matrix as a 2-way WNTF file `<prefix>_mode<n>.wntf`."""
    directory = Path(directory)
    return [
        write_wntf(DataTensor(factor), directory / f"{prefix}_mode{n}.wntf")
        for n, factor in enumerate(model.factors)
    ]
