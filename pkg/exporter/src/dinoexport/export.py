"""Image preprocessing, feature export, and the binary grid writer.

The on-disk format is the downstream pipeline's feature-grid contract:
magic `STEPPFTR` | u32 version=1 | u32 height | u32 width | u32 dim |
little-endian f32 payload, row-major, innermost dim contiguous.  The
writer here is an independent implementation of that byte layout; the
compatibility tests parse its output with the downstream reader.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from PIL import Image

GRID_MAGIC = b"STEPPFTR"
GRID_VERSION = 1

# Measured max |half - full| on the checked-in fixture is ~2.4e-4 with the
# patch-statistics backbone; the asserted bound is 10x that measurement.
HALF_PRECISION_MAX_ABS_DIFF = 2.5e-3


@dataclass(frozen=True)
class ExportSettings:
    input_size: int = 700
    patch_size: int = 14
    output_size: int = 50
    dim: int = 384
    half: bool = False

    def __post_init__(self):
        if self.input_size % self.patch_size != 0:
            raise ValueError("input_size must be divisible by patch_size")
        if self.output_size != self.input_size // self.patch_size:
            raise ValueError("output_size must equal input_size / patch_size")


def preprocess_image(path, settings: ExportSettings) -> np.ndarray:
    """Shortest-side resize then center crop to the square input size.
    Returns float RGB in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            w, h = rgb.size
            scale = settings.input_size / min(w, h)
            rgb = rgb.resize(
                (max(settings.input_size, round(w * scale)),
                 max(settings.input_size, round(h * scale))),
                Image.BILINEAR,
            )
            left = (rgb.size[0] - settings.input_size) // 2
            top = (rgb.size[1] - settings.input_size) // 2
            rgb = rgb.crop(
                (left, top, left + settings.input_size, top + settings.input_size)
            )
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    except OSError as exc:
        raise OSError(f"unreadable image {path}: {exc}") from exc
    return arr


def write_grid(grid: np.ndarray, path) -> None:
    grid = np.ascontiguousarray(grid, dtype="<f4")
    if grid.ndim != 3:
        raise ValueError("grid must be (H, W, D)")
    h, w, d = grid.shape
    header = struct.pack("<8sIIII", GRID_MAGIC, GRID_VERSION, h, w, d)
    Path(path).write_bytes(header + grid.tobytes())


def export_features(
    image_paths: Sequence,
    settings: ExportSettings,
    backbone: Callable[[np.ndarray], np.ndarray],
    out_dir,
) -> list[tuple[str, str]]:
    """Exports one feature grid per image; returns (image, feature) pairs
    and writes them to a manifest CSV in the output directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[tuple[str, str]] = []
    for image_path in image_paths:
        image_path = Path(image_path)
        arr = preprocess_image(image_path, settings)
        grid = backbone(arr)
        expected = (settings.output_size, settings.output_size, settings.dim)
        if grid.shape != expected:
            raise ValueError(
                f"backbone produced {grid.shape}, settings require {expected}"
            )
        feature_path = out_dir / f"{image_path.stem}.ftr"
        write_grid(grid, feature_path)
        rows.append((str(image_path), str(feature_path)))
    with open(out_dir / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image", "features"])
        writer.writerows(rows)
    return rows


def find_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"input directory not found: {directory}")
    exts = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}
    images = sorted(p for p in directory.iterdir() if p.suffix.lower() in exts)
    if not images:
        raise FileNotFoundError(f"no images under {directory}")
    return images
