"""Normalized traversability cost images, thresholding and evaluation.

Raw reconstruction losses are capped at ``cap`` (default 10) and divided by
it, giving costs in [0, 1].  Cost at or below the threshold (default 0.35)
counts as traversable; the boundary is inclusive so a threshold of 1.0
marks everything traversable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .autoencoder import MlpModel, reconstruction_losses
from .errors import DimensionError, FormatError, MissingInputError
from .features import FeatureGrid, read_plane, segment_mean_features, write_plane
from .superpixel import SegmentMask

DEFAULT_COST_CAP = 10.0
DEFAULT_THRESHOLD = 0.35

UNLABELED = 0
TRAVERSABLE = 1
NON_TRAVERSABLE = 2

_GT_PALETTE = [0, 0, 0, 0, 200, 0, 200, 0, 0]  # unlabeled black, traversable green, non red


@dataclass
class CostMap:
    """Per-pixel traversability cost in [0, 1]."""

    values: np.ndarray
    mode: str = "pixel"  # "segment" or "pixel"
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError("cost map must be 2-D")
        if not np.isfinite(self.values).all():
            raise ValueError("cost map contains non-finite values")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise ValueError("cost values must lie in [0, 1]")
        if self.mode not in ("segment", "pixel"):
            raise ValueError(f"unknown cost mode {self.mode!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class GroundTruthMask:
    """Ternary labels: 0 unlabeled, 1 traversable, 2 non-traversable."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2:
            raise ValueError("ground truth must be 2-D")
        if self.labels.size and self.labels.max() > NON_TRAVERSABLE:
            raise ValueError("ground truth values must be 0, 1 or 2")

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


def normalize_cost(raw_loss, cap: float = DEFAULT_COST_CAP):
    """min(raw, cap) / cap.  Accepts scalars or arrays; rejects negatives."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    raw = np.asarray(raw_loss, dtype=np.float64)
    if (raw < 0).any():
        raise ValueError("reconstruction loss cannot be negative")
    out = np.minimum(raw, cap) / cap
    return float(out) if np.isscalar(raw_loss) or out.ndim == 0 else out


def infer_cost_image(
    model: MlpModel,
    grid: FeatureGrid,
    mask: SegmentMask,
    mode: str = "segment",
    cap: float = DEFAULT_COST_CAP,
    threshold: float = DEFAULT_THRESHOLD,
) -> CostMap:
    """Reconstruction-loss cost image at the feature-grid resolution.

    Segment mode scores each segment's mean vector once and paints the
    result over the segment's pixels; pixel mode scores every grid cell
    independently.
    """
    if model.input_dim != grid.dim:
        raise DimensionError(f"model dim {model.input_dim} != grid dim {grid.dim}")
    if mask.shape != (grid.height, grid.width):
        raise DimensionError(f"mask shape {mask.shape} != grid {grid.height}x{grid.width}")
    if mode == "segment":
        ids = mask.ids()
        means = segment_mean_features(grid, mask, ids)
        order = sorted(means)
        losses = reconstruction_losses(model, np.stack([means[i] for i in order]))
        costs = normalize_cost(losses, cap)
        lut = np.zeros(int(mask.labels.max()) + 1, dtype=np.float32)
        lut[order] = costs.astype(np.float32)
        values = lut[mask.labels]
    elif mode == "pixel":
        flat = grid.data.reshape(-1, grid.dim)
        losses = reconstruction_losses(model, flat)
        values = normalize_cost(losses, cap).reshape(grid.height, grid.width).astype(np.float32)
    else:
        raise ValueError(f"unknown cost mode {mode!r}")
    return CostMap(values, mode=mode, threshold=threshold)


def traversable_mask(cost: CostMap, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Boolean mask of pixels considered traversable (cost <= threshold)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return cost.values <= threshold


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    true_traversable: int
    false_traversable: int
    true_blocked: int
    false_blocked: int

    @property
    def labeled(self) -> int:
        return (
            self.true_traversable
            + self.false_traversable
            + self.true_blocked
            + self.false_blocked
        )


def evaluate_accuracy(pred_traversable: np.ndarray, gt: GroundTruthMask) -> EvalResult:
    """Pixel accuracy over labeled pixels, with the confusion counts."""
    pred = np.asarray(pred_traversable, dtype=bool)
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
    labeled = gt.labels != UNLABELED
    if not labeled.any():
        raise ValueError("ground truth has no labeled pixels")
    actual = gt.labels == TRAVERSABLE
    tt = int(np.count_nonzero(pred & actual & labeled))
    ft = int(np.count_nonzero(pred & ~actual & labeled))
    tb = int(np.count_nonzero(~pred & ~actual & labeled))
    fb = int(np.count_nonzero(~pred & actual & labeled))
    return EvalResult((tt + tb) / (tt + ft + tb + fb), tt, ft, tb, fb)


def tune_threshold(
    costs: list[CostMap],
    gts: list[GroundTruthMask],
    thresholds: np.ndarray | list[float] | None = None,
) -> tuple[float, list[tuple[float, float]]]:
    """Sweeps candidate thresholds and returns (best, full accuracy curve).

    Accuracy is pooled over all (cost, ground-truth) pairs.  Ties break
    toward the smaller threshold.
    """
    if not costs or len(costs) != len(gts):
        raise ValueError("need equal, non-empty cost/ground-truth lists")
    cands = default_threshold_grid() if thresholds is None else np.asarray(thresholds, float)
    if cands.size == 0:
        raise ValueError("candidate threshold grid is empty")
    curve = []
    best_t, best_a = None, -1.0
    for t in cands:
        correct = 0
        total = 0
        for cost, gt in zip(costs, gts):
            res = evaluate_accuracy(traversable_mask(cost, float(t)), gt)
            correct += res.true_traversable + res.true_blocked
            total += res.labeled
        acc = correct / total
        curve.append((float(t), acc))
        if acc > best_a:
            best_t, best_a = float(t), acc
    return best_t, curve


def default_threshold_grid(step: float = 0.01) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.round(np.linspace(0.0, 1.0, n + 1), 10)


# ---------------------------------------------------------------------------
# I/O


def save_cost_map(cost: CostMap, path) -> None:
    """32-bit float binary, same header scheme as feature grids (dim = 1)."""
    write_plane(cost.values, path)


def load_cost_map(path, mode: str = "pixel") -> CostMap:
    return CostMap(read_plane(path), mode=mode)


def save_cost_png(cost: CostMap, path) -> None:
    """8-bit visualization: 0 black (free) to 255 white (blocked)."""
    img = np.round(cost.values * 255.0).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path)


def save_ground_truth(gt: GroundTruthMask, path) -> None:
    img = Image.fromarray(gt.labels, mode="P")
    img.putpalette(_GT_PALETTE)
    img.save(path)


def load_ground_truth(path) -> GroundTruthMask:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"ground-truth file not found: {path}")
    with Image.open(path) as img:
        if img.mode != "P":
            raise FormatError(f"{path}: ground truth must be a palette PNG")
        labels = np.asarray(img, dtype=np.uint8)
    return GroundTruthMask(labels)


def resize_nearest(values: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Nearest-neighbor resize (up or down) with the floor-of-scaled-center
    convention shared across the package."""
    H, W = values.shape[:2]
    rows = np.minimum((np.floor((np.arange(target_h) + 0.5) * H / target_h)).astype(int), H - 1)
    cols = np.minimum((np.floor((np.arange(target_w) + 0.5) * W / target_w)).astype(int), W - 1)
    return values[np.ix_(rows, cols)]
