"""SLIC superpixel segmentation and segment-mask utilities.

The segmentation is a localized k-means in combined CIELAB + position
space: cluster centers start on a regular grid of spacing
``S = sqrt(H*W / num_superpixels)``, each center competes for pixels in a
2S x 2S window with the distance

    d = sqrt(d_lab^2 + (compactness / S)^2 * d_xy^2)

and iteration ends after ``max_iterations`` or when no center moved more
than ``1e-3 * S``.  A final pass enforces 4-connectivity by merging orphan
components into an adjacent, already-finalized segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .errors import FormatError, MissingInputError
from .geometry import PixelCoord

DEFAULT_NUM_SUPERPIXELS = 400
DEFAULT_COMPACTNESS = 15.0
DEFAULT_MAX_ITERATIONS = 10


@dataclass(frozen=True)
class SlicParams:
    num_superpixels: int = DEFAULT_NUM_SUPERPIXELS
    compactness: float = DEFAULT_COMPACTNESS
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    seed: int = 0  # reserved for stochastic variants; the default algorithm is deterministic

    def __post_init__(self):
        if self.num_superpixels < 1:
            raise ValueError("num_superpixels must be >= 1")
        if self.compactness <= 0:
            raise ValueError("compactness must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SegmentMask:
    """Integer label image; every pixel carries exactly one segment id."""

    labels: np.ndarray  # (H, W) int32, ids >= 0
    num_segments: int

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.ndim != 2:
            raise ValueError("labels must be a 2-D array")
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("segment ids must be non-negative")

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "SegmentMask":
        labels = np.asarray(labels, dtype=np.int32)
        return cls(labels, int(np.unique(labels).size))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def ids(self) -> np.ndarray:
        return np.unique(self.labels)


@dataclass
class SlicResult:
    mask: SegmentMask
    energy_per_iteration: list[float]  # sum of assignment distances d, post-assignment
    squared_energy_per_iteration: list[float]  # sum of d^2 (the quantity the update minimizes)
    iterations_run: int


# ---------------------------------------------------------------------------
# sRGB -> CIELAB (D65 white point)

_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = _SRGB_TO_XYZ.sum(axis=1)  # D65 white = sRGB (1,1,1)


def rgb_to_lab(image: np.ndarray) -> np.ndarray:
    """Converts an (H, W, 3) sRGB image (uint8, or float in [0, 1]) to CIELAB."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got {img.shape}")
    rgb = img.astype(np.float64) / 255.0 if img.dtype == np.uint8 else img.astype(np.float64)
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _SRGB_TO_XYZ.T
    xyz /= _WHITE
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


# ---------------------------------------------------------------------------
# SLIC


def slic_segment(image: np.ndarray, params: SlicParams | None = None) -> SegmentMask:
    """Segments an RGB image into superpixels.  See ``slic_segment_full`` for
    per-iteration diagnostics."""
    return slic_segment_full(image, params).mask


def slic_segment_full(image: np.ndarray, params: SlicParams | None = None) -> SlicResult:
    params = params or SlicParams()
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got {img.shape}")
    H, W = img.shape[:2]
    if H * W < params.num_superpixels:
        raise ValueError(
            f"image of {H * W} pixels cannot hold {params.num_superpixels} superpixels"
        )

    lab = rgb_to_lab(img)
    S = math.sqrt(H * W / params.num_superpixels)
    ratio = (params.compactness / S) ** 2

    nx = max(1, round(W / S))
    ny = max(1, round(H / S))
    cx = (np.arange(nx) + 0.5) * (W / nx)
    cy = (np.arange(ny) + 0.5) * (H / ny)
    gx, gy = np.meshgrid(cx, cy)
    centers_xy = np.stack([gx.ravel(), gy.ravel()], axis=1)  # (n, 2)
    n = centers_xy.shape[0]
    px = np.clip(centers_xy[:, 0].astype(int), 0, W - 1)
    py = np.clip(centers_xy[:, 1].astype(int), 0, H - 1)
    centers = np.concatenate([lab[py, px], centers_xy], axis=1)  # (n, 5): L a b x y

    xs = np.arange(W, dtype=np.float64)
    ys = np.arange(H, dtype=np.float64)
    labels = np.full((H, W), -1, dtype=np.int32)
    energies: list[float] = []
    sq_energies: list[float] = []
    iterations = 0

    for it in range(params.max_iterations):
        iterations = it + 1
        if labels.min() >= 0:
            # Seed each pixel with the distance to its current center so a
            # pixel never loses its assignment without finding a better one
            # (this is what makes the energy provably non-increasing).
            c = centers[labels]
            best = (
                ((lab - c[..., :3]) ** 2).sum(axis=2)
                + ratio * ((xs[None, :] - c[..., 3]) ** 2 + (ys[:, None] - c[..., 4]) ** 2)
            )
        else:
            best = np.full((H, W), np.inf)

        for ci in range(n):
            Lc, ac, bc, xc, yc = centers[ci]
            x0 = max(0, int(xc - S))
            x1 = min(W, int(xc + S) + 1)
            y0 = max(0, int(yc - S))
            y1 = min(H, int(yc + S) + 1)
            sub = lab[y0:y1, x0:x1]
            d2 = (
                (sub[..., 0] - Lc) ** 2
                + (sub[..., 1] - ac) ** 2
                + (sub[..., 2] - bc) ** 2
                + ratio
                * ((xs[x0:x1][None, :] - xc) ** 2 + (ys[y0:y1][:, None] - yc) ** 2)
            )
            win_best = best[y0:y1, x0:x1]
            better = d2 < win_best
            win_best[better] = d2[better]
            labels[y0:y1, x0:x1][better] = ci

        if labels.min() < 0:
            # Extreme aspect ratios can leave pixels outside every window on
            # the first pass; fall back to a global nearest-center sweep.
            _assign_unlabelled(lab, labels, best, centers, ratio, xs, ys)

        energies.append(float(np.sqrt(best).sum()))
        sq_energies.append(float(best.sum()))

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n).astype(np.float64)
        feats = np.concatenate(
            [lab.reshape(-1, 3), np.tile(xs, H)[:, None], np.repeat(ys, W)[:, None]],
            axis=1,
        )
        sums = np.stack(
            [np.bincount(flat, weights=feats[:, k], minlength=n) for k in range(5)],
            axis=1,
        )
        nonempty = counts > 0
        new_centers = centers.copy()
        new_centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        movement = np.hypot(
            new_centers[:, 3] - centers[:, 3], new_centers[:, 4] - centers[:, 4]
        ).max()
        centers = new_centers
        if movement < 1e-3 * S:
            break

    final = _enforce_connectivity(labels)
    return SlicResult(SegmentMask.from_labels(final), energies, sq_energies, iterations)


def _assign_unlabelled(lab, labels, best, centers, ratio, xs, ys):
    rows, cols = np.nonzero(labels < 0)
    pts = np.concatenate([lab[rows, cols], xs[cols][:, None], ys[rows][:, None]], axis=1)
    d2 = ((pts[:, None, :3] - centers[None, :, :3]) ** 2).sum(axis=2) + ratio * (
        (pts[:, None, 3] - centers[None, :, 3]) ** 2
        + (pts[:, None, 4] - centers[None, :, 4]) ** 2
    )
    labels[rows, cols] = np.argmin(d2, axis=1)
    best[rows, cols] = d2[np.arange(len(rows)), labels[rows, cols]]


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Merges disconnected components so every id's pixel set is 4-connected.

    Components are discovered in raster-scan order.  The largest component
    of each id keeps it (the component containing pixel (0,0) always keeps
    its id so a merge target is always available); every other component
    merges into the already-finalized label left of (or above) its first
    pixel.  Ids are then relabelled dense in order of first appearance.
    """
    H, W = labels.shape
    flat = labels.ravel()
    comp = np.full(H * W, -1, dtype=np.int32)
    comp_label: list[int] = []
    comp_seed: list[int] = []
    comp_size: list[int] = []

    for start in range(H * W):
        if comp[start] >= 0:
            continue
        cid = len(comp_label)
        lbl = flat[start]
        stack = [start]
        comp[start] = cid
        size = 0
        while stack:
            idx = stack.pop()
            size += 1
            r, c = divmod(idx, W)
            if c > 0 and comp[idx - 1] < 0 and flat[idx - 1] == lbl:
                comp[idx - 1] = cid
                stack.append(idx - 1)
            if c + 1 < W and comp[idx + 1] < 0 and flat[idx + 1] == lbl:
                comp[idx + 1] = cid
                stack.append(idx + 1)
            if r > 0 and comp[idx - W] < 0 and flat[idx - W] == lbl:
                comp[idx - W] = cid
                stack.append(idx - W)
            if r + 1 < H and comp[idx + W] < 0 and flat[idx + W] == lbl:
                comp[idx + W] = cid
                stack.append(idx + W)
        comp_label.append(int(lbl))
        comp_seed.append(start)
        comp_size.append(size)

    keeper: dict[int, int] = {}
    for cid, lbl in enumerate(comp_label):
        if lbl not in keeper or comp_size[cid] > comp_size[keeper[lbl]]:
            keeper[lbl] = cid
    keeper[comp_label[0]] = 0

    comp_final = np.full(len(comp_label), -1, dtype=np.int32)
    for cid, lbl in enumerate(comp_label):
        if keeper[lbl] == cid:
            comp_final[cid] = lbl
        else:
            seed = comp_seed[cid]
            _, c = divmod(seed, W)
            neighbor = seed - 1 if c > 0 else seed - W
            # comp[neighbor] < cid, so its final label is already decided
            comp_final[cid] = comp_final[comp[neighbor]]
    final = comp_final[comp]

    # densify in order of first appearance
    _, first_idx, inverse = np.unique(final, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_idx))
    return order[inverse].reshape(H, W).astype(np.int32)


# ---------------------------------------------------------------------------
# Mask resizing and path lookup


def downscale_mask(mask: SegmentMask, target_h: int, target_w: int) -> SegmentMask:
    """Nearest-neighbor downscale: each target pixel takes the id of the
    source pixel under the floor of its scaled center.  Never invents ids."""
    if target_h <= 0 or target_w <= 0:
        raise ValueError("target dimensions must be positive")
    H, W = mask.shape
    if target_h > H or target_w > W:
        raise ValueError("downscale target must not exceed source dimensions")
    rows = np.minimum((np.floor((np.arange(target_h) + 0.5) * H / target_h)).astype(int), H - 1)
    cols = np.minimum((np.floor((np.arange(target_w) + 0.5) * W / target_w)).astype(int), W - 1)
    return SegmentMask.from_labels(mask.labels[np.ix_(rows, cols)])


def traversed_segment_ids(
    mask: SegmentMask, path_pixels: Iterable[PixelCoord]
) -> set[int]:
    """Ids of segments containing at least one projected path pixel."""
    H, W = mask.shape
    ids: set[int] = set()
    for p in path_pixels:
        r, c = int(p.v), int(p.u)
        if not (0 <= r < H and 0 <= c < W):
            raise ValueError(f"path pixel ({p.u}, {p.v}) outside mask of shape {H}x{W}")
        ids.add(int(mask.labels[r, c]))
    return ids


# ---------------------------------------------------------------------------
# Mask I/O: 16-bit grayscale PNG or PGM (P5, maxval 65535)


def save_mask(mask: SegmentMask, path) -> None:
    path = Path(path)
    labels = mask.labels
    if labels.size and labels.max() > 65535:
        raise ValueError("segment ids exceed 16-bit range")
    data = labels.astype(np.uint16)
    if path.suffix.lower() == ".pgm":
        header = f"P5\n{data.shape[1]} {data.shape[0]}\n65535\n".encode("ascii")
        path.write_bytes(header + data.astype(">u2").tobytes())
    else:
        Image.fromarray(data).save(path)  # uint16 -> 16-bit grayscale PNG


def load_mask(path) -> SegmentMask:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"mask file not found: {path}")
    if path.suffix.lower() == ".pgm":
        labels = _read_pgm16(path)
    else:
        with Image.open(path) as img:
            labels = np.asarray(img)
        if labels.ndim != 2:
            raise FormatError(f"{path}: mask PNG must be single-channel")
    return SegmentMask.from_labels(labels.astype(np.int32))


def _read_pgm16(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    if not blob.startswith(b"P5"):
        raise BadPgmError(path, "not a P5 PGM")
    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens: list[bytes] = []
    i = 2
    while len(tokens) < 3:
        while i < len(blob) and blob[i : i + 1].isspace():
            i += 1
        if i < len(blob) and blob[i : i + 1] == b"#":
            while i < len(blob) and blob[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(blob) and not blob[i : i + 1].isspace():
            i += 1
        if start == i:
            raise BadPgmError(path, "truncated header")
        tokens.append(blob[start:i])
    i += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 65535:
        raise BadPgmError(path, f"expected maxval 65535, got {maxval}")
    payload = blob[i:]
    if len(payload) != w * h * 2:
        raise BadPgmError(path, f"payload is {len(payload)} bytes, expected {w * h * 2}")
    return np.frombuffer(payload, dtype=">u2").reshape(h, w).astype(np.int32)


class BadPgmError(FormatError):
    def __init__(self, path, why):
        super().__init__(f"{path}: {why}")
