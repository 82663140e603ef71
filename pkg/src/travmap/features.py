"""Dense per-pixel feature grids and per-segment mean aggregation.

A feature grid is an (H, W, D) block of 32-bit floats, nominally 50x50x384.
Per-segment means are computed with a scatter-reduce: one pass accumulating
sums and counts keyed by segment id, then a divide.  Accumulation happens
in 64-bit floats; results are returned as 32-bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    DimensionError,
    MissingInputError,
    NonFiniteDataError,
    TruncatedFileError,
    VersionMismatchError,
)
from .geometry import PixelCoord
from .superpixel import SegmentMask, downscale_mask, traversed_segment_ids

FEATURE_DIM = 384
FEATURE_GRID_HEIGHT = 50
FEATURE_GRID_WIDTH = 50

GRID_MAGIC = b"STEPPFTR"
GRID_VERSION = 1
_HEADER = struct.Struct("<8sIIII")  # magic, version, height, width, dim


@dataclass
class FeatureGrid:
    """Row-major (H, W, D) grid of finite float32 embeddings."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError(f"feature grid must be (H, W, D), got {self.data.shape}")
        if not all(s > 0 for s in self.data.shape):
            raise ValueError("feature grid dimensions must be positive")
        if not np.isfinite(self.data).all():
            raise NonFiniteDataError("feature grid contains non-finite values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


def write_feature_grid(grid: FeatureGrid, path) -> None:
    h, w, d = grid.data.shape
    header = _HEADER.pack(GRID_MAGIC, GRID_VERSION, h, w, d)
    Path(path).write_bytes(header + grid.data.astype("<f4").tobytes())


def read_feature_grid(path) -> FeatureGrid:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"feature grid not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise TruncatedFileError(f"{path}: shorter than header")
    magic, version, h, w, d = _HEADER.unpack_from(blob)
    if magic != GRID_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != GRID_VERSION:
        raise VersionMismatchError(f"{path}: unsupported version {version}")
    expected = h * w * d * 4
    payload = blob[_HEADER.size :]
    if len(payload) != expected:
        raise TruncatedFileError(
            f"{path}: payload is {len(payload)} bytes, header promises {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, d)
    if not np.isfinite(data).all():
        raise NonFiniteDataError(f"{path}: payload contains non-finite values")
    return FeatureGrid(data.copy())


# Convenience wrappers for single-channel grids (cost maps, depth images)
# that share the same on-disk header scheme with dim = 1.


def write_plane(values: np.ndarray, path) -> None:
    write_feature_grid(FeatureGrid(np.asarray(values, dtype=np.float32)[..., None]), path)


def read_plane(path) -> np.ndarray:
    grid = read_feature_grid(path)
    if grid.dim != 1:
        raise DimensionError(f"{path}: expected a dim-1 grid, got dim {grid.dim}")
    return grid.data[..., 0]


# ---------------------------------------------------------------------------
# Aggregation


def segment_mean_features(
    grid: FeatureGrid, mask: SegmentMask, ids: Iterable[int]
) -> dict[int, np.ndarray]:
    """Per-dimension mean feature vector for each requested segment id.

    Ids without pixels at grid resolution are omitted.  A single scatter
    pass accumulates sums and counts for every id, so the cost does not
    grow with the number of requested ids.
    """
    if mask.shape != (grid.height, grid.width):
        raise DimensionError(
            f"mask shape {mask.shape} does not match grid {grid.height}x{grid.width}"
        )
    flat = mask.labels.ravel()
    nbins = int(flat.max()) + 1 if flat.size else 0
    counts = np.bincount(flat, minlength=nbins)
    data = grid.data.reshape(-1, grid.dim).astype(np.float64)
    sums = np.zeros((nbins, grid.dim), dtype=np.float64)
    np.add.at(sums, flat, data)
    out: dict[int, np.ndarray] = {}
    for sid in sorted(set(int(i) for i in ids)):
        if 0 <= sid < nbins and counts[sid] > 0:
            out[sid] = (sums[sid] / counts[sid]).astype(np.float32)
    return out


@dataclass
class PathFeatures:
    """Per-segment mean vectors for the segments touched by a projected path."""

    vectors: list[np.ndarray]
    segment_ids: list[int]  # ids matching `vectors`, ascending
    dropped_ids: set[int] = field(default_factory=set)  # vanished under downscale

    def __len__(self) -> int:
        return len(self.vectors)


def masked_path_features(
    grid: FeatureGrid,
    full_mask: SegmentMask,
    path_pixels: Sequence[PixelCoord],
) -> PathFeatures:
    """Mean feature vector of every segment the projected path touches.

    Composes traversed-id lookup on the full-resolution mask, nearest-
    neighbor downscale to the grid resolution, and scatter-reduce means.
    Segments whose pixels all vanish under the downscale are dropped and
    reported in ``dropped_ids``.
    """
    ids = traversed_segment_ids(full_mask, path_pixels)
    if not ids:
        return PathFeatures([], [])
    small = downscale_mask(full_mask, grid.height, grid.width)
    means = segment_mean_features(grid, small, ids)
    kept = sorted(means)
    return PathFeatures([means[i] for i in kept], kept, ids - set(kept))


# ---------------------------------------------------------------------------
# Training-vector files: a grid of shape (N, 1, D) reuses the same format.


def save_vectors(vectors: Sequence[np.ndarray], path) -> None:
    arr = np.asarray(vectors, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("expected a non-empty list of equal-length vectors")
    write_feature_grid(FeatureGrid(arr[:, None, :]), path)


def load_vectors(path) -> np.ndarray:
    grid = read_feature_grid(path)
    if grid.width != 1:
        raise DimensionError(f"{path}: vector files must have width 1")
    return grid.data[:, 0, :]
