"""Cost-annotated point clouds for a local planner.

A depth image is unprojected through the intrinsics, each point picks up
the traversability cost of its pixel, and points closer than the minimum
range (default 2 m, guarding against momentary close-range occlusions)
are discarded rather than clamped.  Output is ASCII PLY with float
x, y, z, cost vertex properties, row-major pixel order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .costmap import CostMap
from .errors import DimensionError, FormatError, MissingInputError
from .features import read_plane, write_plane
from .geometry import CameraIntrinsics, PixelCoord

DEFAULT_MIN_RANGE = 2.0


@dataclass
class DepthImage:
    """Depths in meters along the optical axis; <= 0 or non-finite marks invalid."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError("depth image must be 2-D")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def valid(self) -> np.ndarray:
        return np.isfinite(self.values) & (self.values > 0)


@dataclass
class CostCloud:
    """(N, 4) array of x, y, z, cost in the camera frame."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 4:
            raise ValueError("cost cloud must be an (N, 4) array")

    def __len__(self) -> int:
        return self.points.shape[0]


def unproject(pixel: PixelCoord, depth: float, K: CameraIntrinsics) -> np.ndarray:
    """Camera-frame point for a pixel at the given optical-axis depth."""
    if depth <= 0:
        raise ValueError(f"depth must be positive, got {depth}")
    return np.array(
        [
            (pixel.u - K.cx) * depth / K.fx,
            (pixel.v - K.cy) * depth / K.fy,
            depth,
        ]
    )


def build_cost_cloud(
    cost: CostMap,
    depth: DepthImage,
    K: CameraIntrinsics,
    min_range: float = DEFAULT_MIN_RANGE,
    cost_scale: float = 1.0,
    cost_offset: float = 0.0,
) -> CostCloud:
    """One point per valid-depth pixel at Euclidean range >= min_range.

    ``cost_scale``/``cost_offset`` optionally remap the cost channel into a
    planner-specific value range; the defaults leave costs in [0, 1].
    Upsample the cost map to the depth resolution beforehand if needed
    (see ``costmap.resize_nearest``).
    """
    if cost.shape != depth.shape:
        raise DimensionError(f"cost shape {cost.shape} != depth shape {depth.shape}")
    if (depth.shape[0], depth.shape[1]) != (K.height, K.width):
        raise DimensionError(
            f"depth shape {depth.shape} != intrinsics {K.height}x{K.width}"
        )
    valid = depth.valid()
    rows, cols = np.nonzero(valid)  # row-major order for deterministic output
    d = depth.values[rows, cols].astype(np.float64)
    x = (cols - K.cx) * d / K.fx
    y = (rows - K.cy) * d / K.fy
    keep = np.sqrt(x * x + y * y + d * d) >= min_range
    c = cost.values[rows, cols].astype(np.float64) * cost_scale + cost_offset
    pts = np.stack([x[keep], y[keep], d[keep], c[keep]], axis=1)
    return CostCloud(pts)


# ---------------------------------------------------------------------------
# PLY I/O


def write_cloud(cloud: CostCloud, path) -> None:
    """ASCII PLY with float x, y, z, cost properties, %.6e precision."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property float cost",
        "end_header",
    ]
    for x, y, z, c in cloud.points:
        lines.append(f"{x:.6e} {y:.6e} {z:.6e} {c:.6e}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_cloud(path) -> CostCloud:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"point cloud not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise FormatError(f"{path}: not a PLY file")
    count = None
    body_at = None
    for i, line in enumerate(lines[1:], start=1):
        token = line.strip()
        if token.startswith("element vertex"):
            count = int(token.split()[-1])
        elif token == "end_header":
            body_at = i + 1
            break
    if count is None or body_at is None:
        raise FormatError(f"{path}: missing vertex element or end_header")
    rows = []
    for line in lines[body_at : body_at + count]:
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"{path}: vertex line with {len(parts)} fields")
        rows.append([float(p) for p in parts])
    if len(rows) != count:
        raise FormatError(f"{path}: header promises {count} vertices, found {len(rows)}")
    return CostCloud(np.array(rows).reshape(count, 4))


# ---------------------------------------------------------------------------
# Depth I/O: float32 binary grid (shared header scheme) or 16-bit PNG in mm


def save_depth(depth: DepthImage, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".png":
        mm = np.clip(np.nan_to_num(depth.values, nan=0.0) * 1000.0, 0, 65535)
        Image.fromarray(np.round(mm).astype(np.uint16)).save(path)
    else:
        write_plane(np.nan_to_num(depth.values, nan=0.0, posinf=0.0, neginf=0.0), path)


def load_depth(path) -> DepthImage:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"depth file not found: {path}")
    if path.suffix.lower() == ".png":
        with Image.open(path) as img:
            raw = np.asarray(img)
        if raw.ndim != 2:
            raise FormatError(f"{path}: depth PNG must be single-channel")
        return DepthImage(raw.astype(np.float32) / 1000.0)
    return DepthImage(read_plane(path))
