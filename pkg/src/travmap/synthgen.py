"""Synthetic dataset generation: a spline walker over a procedural heightfield.

Stands in for a game-engine capture rig at desk scale.  A Catmull-Rom
spline is walked at fixed height above the terrain, per-frame views are
ray-cast against the heightfield (class image, depth, ground-truth
traversability), and feature grids are synthesized from per-class mean
vectors plus seeded Gaussian noise, so the full pipeline closes into a
deterministic loop with no pretrained backbone required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .costmap import NON_TRAVERSABLE, TRAVERSABLE, UNLABELED, GroundTruthMask
from .cloudexport import DepthImage
from .errors import FormatError, MissingInputError
from .features import FEATURE_DIM, FeatureGrid
from .geometry import CameraIntrinsics, Pose

SKY_CLASS = -1
SKY_COLOR = (135, 206, 235)


@dataclass(frozen=True)
class ClassDef:
    id: int
    name: str
    traversable: bool
    color: tuple[int, int, int]


@dataclass
class Heightfield:
    """Elevation and terrain-class grids over a rectangular world extent.

    ``elevation[row, col]`` samples the surface at the center of cell
    (row, col); row indexes +y, col indexes +x.  Heights are interpolated
    bilinearly, classes looked up per containing cell.
    """

    elevation: np.ndarray
    class_ids: np.ndarray
    cell_size: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.elevation = np.asarray(self.elevation, dtype=np.float64)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int32)
        if self.elevation.ndim != 2 or self.elevation.shape != self.class_ids.shape:
            raise ValueError("elevation and class grids must be 2-D and congruent")
        if not np.isfinite(self.elevation).all():
            raise ValueError("elevations must be finite")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) of the covered world rectangle."""
        rows, cols = self.elevation.shape
        ox, oy = self.origin
        return ox, oy, ox + cols * self.cell_size, oy + rows * self.cell_size

    def height_at(self, x, y):
        """Bilinear surface height; clamps to the border outside the extent."""
        ox, oy = self.origin
        rows, cols = self.elevation.shape
        gx = np.clip(np.asarray(x, dtype=np.float64) / self.cell_size - ox / self.cell_size - 0.5, 0, cols - 1)
        gy = np.clip(np.asarray(y, dtype=np.float64) / self.cell_size - oy / self.cell_size - 0.5, 0, rows - 1)
        i0 = np.minimum(gx.astype(int), cols - 2) if cols > 1 else np.zeros_like(gx, int)
        j0 = np.minimum(gy.astype(int), rows - 2) if rows > 1 else np.zeros_like(gy, int)
        i1 = np.minimum(i0 + 1, cols - 1)
        j1 = np.minimum(j0 + 1, rows - 1)
        fx = gx - i0
        fy = gy - j0
        e = self.elevation
        return (1 - fy) * ((1 - fx) * e[j0, i0] + fx * e[j0, i1]) + fy * (
            (1 - fx) * e[j1, i0] + fx * e[j1, i1]
        )

    def class_at(self, x, y):
        ox, oy = self.origin
        rows, cols = self.class_ids.shape
        ix = np.clip(((np.asarray(x) - ox) / self.cell_size).astype(int), 0, cols - 1)
        iy = np.clip(((np.asarray(y) - oy) / self.cell_size).astype(int), 0, rows - 1)
        return self.class_ids[iy, ix]

    def contains(self, x, y):
        x0, y0, x1, y1 = self.extent
        return (np.asarray(x) >= x0) & (np.asarray(x) <= x1) & (np.asarray(y) >= y0) & (np.asarray(y) <= y1)


@dataclass(frozen=True)
class SplinePath:
    """Walker route: Catmull-Rom control points in world XY."""

    control_points: np.ndarray  # (M, 2)
    spacing: float
    walker_height: float

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("need at least 2 control points of (x, y)")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.walker_height <= 0:
            raise ValueError("walker_height must be positive")
        object.__setattr__(self, "control_points", pts)


def _catmull_rom_dense(points: np.ndarray, samples_per_segment: int = 200) -> np.ndarray:
    """Dense polyline through the control points (uniform Catmull-Rom)."""
    ext = np.vstack([points[0], points, points[-1]])
    t = np.linspace(0.0, 1.0, samples_per_segment, endpoint=False)
    chunks = []
    for i in range(len(points) - 1):
        p0, p1, p2, p3 = ext[i], ext[i + 1], ext[i + 2], ext[i + 3]
        tt = t[:, None]
        chunk = 0.5 * (
            2 * p1
            + (-p0 + p2) * tt
            + (2 * p0 - 5 * p1 + 4 * p2 - p3) * tt**2
            + (-p0 + 3 * p1 - 3 * p2 + p3) * tt**3
        )
        chunks.append(chunk)
    chunks.append(points[-1][None, :])
    return np.vstack(chunks)


def _yaw_rotation(theta: float) -> np.ndarray:
    """Device axes for a walker heading: x right, y down, z forward (level)."""
    c, s = math.cos(theta), math.sin(theta)
    x_dev = (s, -c, 0.0)
    y_dev = (0.0, 0.0, -1.0)
    z_dev = (c, s, 0.0)
    return np.column_stack([x_dev, y_dev, z_dev])


def walk_spline(field_: Heightfield, spline: SplinePath, speed: float = 1.0) -> list[Pose]:
    """Poses sampled along the spline at fixed arc spacing.

    z sits ``walker_height`` above the interpolated terrain, yaw faces the
    next sample (zero roll/pitch), timestamps assume constant speed.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    dense = _catmull_rom_dense(spline.control_points)
    seglen = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    total = cum[-1]
    n = int(total / spline.spacing + 1e-9) + 1
    s = np.arange(n) * spline.spacing
    xs = np.interp(s, cum, dense[:, 0])
    ys = np.interp(s, cum, dense[:, 1])
    if not field_.contains(xs, ys).all():
        raise ValueError("spline exits the heightfield extent")
    zs = field_.height_at(xs, ys) + spline.walker_height

    poses = []
    yaw_prev = 0.0
    for i in range(n):
        if i + 1 < n:
            dx, dy = xs[i + 1] - xs[i], ys[i + 1] - ys[i]
            yaw = math.atan2(dy, dx) if (dx or dy) else yaw_prev
        else:
            yaw = yaw_prev
        yaw_prev = yaw
        poses.append(
            Pose(_yaw_rotation(yaw), np.array([xs[i], ys[i], zs[i]]), timestamp=s[i] / speed)
        )
    return poses


# ---------------------------------------------------------------------------
# Rendering


@dataclass
class FrameRender:
    class_ids: np.ndarray  # (H, W) int32, SKY_CLASS for sky
    class_rgb: np.ndarray  # (H, W, 3) uint8
    depth: DepthImage
    ground_truth: GroundTruthMask


def render_views(
    field_: Heightfield,
    poses: Sequence[Pose],
    K: CameraIntrinsics,
    class_table: dict[int, ClassDef],
    max_range: float = 50.0,
    ray_step: float | None = None,
) -> list[FrameRender]:
    """Ray-casts every pose against the heightfield.

    Per pixel: nearest-surface class id, depth along the optical axis, and
    a ground-truth label from the class table's traversable flag.  Sky
    pixels carry invalid depth (0) and the unlabeled ground-truth value.
    """
    step = ray_step if ray_step is not None else field_.cell_size / 2.0
    H, W = K.height, K.width
    us, vs = np.meshgrid(np.arange(W, dtype=np.float64), np.arange(H, dtype=np.float64))
    dirs_dev = np.stack(
        [(us - K.cx) / K.fx, (vs - K.cy) / K.fy, np.ones_like(us)], axis=-1
    ).reshape(-1, 3)
    norms = np.linalg.norm(dirs_dev, axis=1)

    out = []
    for pose in poses:
        unit = (dirs_dev @ pose.rotation.T) / norms[:, None]
        origin = pose.translation
        npix = unit.shape[0]
        active = np.ones(npix, dtype=bool)
        hit = np.zeros(npix, dtype=bool)
        lo = np.zeros(npix)
        hi = np.zeros(npix)

        s = step
        while s <= max_range and active.any():
            ai = np.nonzero(active)[0]
            px = origin[0] + s * unit[ai, 0]
            py = origin[1] + s * unit[ai, 1]
            pz = origin[2] + s * unit[ai, 2]
            inside = field_.contains(px, py)
            below = pz <= field_.height_at(px, py)
            struck = inside & below
            hit[ai[struck]] = True
            lo[ai[struck]] = s - step
            hi[ai[struck]] = s
            active[ai[struck]] = False
            active[ai[~inside]] = False  # left the extent while above ground: sky
            s += step

        if hit.any():
            hidx = np.nonzero(hit)[0]
            lo_h, hi_h = lo[hidx], hi[hidx]
            for _ in range(45):
                mid = 0.5 * (lo_h + hi_h)
                px = origin[0] + mid * unit[hidx, 0]
                py = origin[1] + mid * unit[hidx, 1]
                pz = origin[2] + mid * unit[hidx, 2]
                below = pz <= field_.height_at(px, py)
                hi_h = np.where(below, mid, hi_h)
                lo_h = np.where(below, lo_h, mid)
            s_star = hi_h
            hx = origin[0] + s_star * unit[hidx, 0]
            hy = origin[1] + s_star * unit[hidx, 1]

        class_img = np.full(npix, SKY_CLASS, dtype=np.int32)
        depth_img = np.zeros(npix, dtype=np.float32)
        if hit.any():
            class_img[hidx] = field_.class_at(hx, hy)
            depth_img[hidx] = (s_star / norms[hidx]).astype(np.float32)

        rgb = np.empty((npix, 3), dtype=np.uint8)
        rgb[:] = SKY_COLOR
        gt = np.full(npix, UNLABELED, dtype=np.uint8)
        for cid, cdef in class_table.items():
            sel = class_img == cid
            rgb[sel] = cdef.color
            gt[sel] = TRAVERSABLE if cdef.traversable else NON_TRAVERSABLE

        out.append(
            FrameRender(
                class_ids=class_img.reshape(H, W),
                class_rgb=rgb.reshape(H, W, 3),
                depth=DepthImage(depth_img.reshape(H, W)),
                ground_truth=GroundTruthMask(gt.reshape(H, W)),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Class-conditioned synthetic features


@dataclass
class ClassFeatureModel:
    """Per-class mean embedding plus isotropic noise scale."""

    means: dict[int, np.ndarray]
    noise_scale: float

    def __post_init__(self):
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        items = sorted(self.means.items())
        for (ia, ma), (ib, mb) in zip(items, items[1:]):
            if np.array_equal(ma, mb):
                raise ValueError(f"classes {ia} and {ib} share a mean vector")

    @property
    def dim(self) -> int:
        return next(iter(self.means.values())).shape[0]


def build_class_feature_model(
    class_ids: Sequence[int],
    dim: int = FEATURE_DIM,
    noise_scale: float = 0.1,
    seed: int = 0,
    amplitude: float = 0.5,
) -> ClassFeatureModel:
    """Random +/-amplitude sign-pattern means: any two classes differ by
    2*amplitude wherever their signs disagree, so the pairwise L-infinity
    separation is 2*amplitude (1.0 at the defaults)."""
    rng = np.random.default_rng(seed)
    means = {}
    for cid in sorted(set(int(c) for c in class_ids)):
        means[cid] = (rng.integers(0, 2, size=dim) * 2 - 1).astype(np.float64) * amplitude
    vals = list(means.values())
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            if np.max(np.abs(vals[i] - vals[j])) < 2 * amplitude:
                raise ValueError("degenerate class means; change the seed")
    return ClassFeatureModel(means, noise_scale)


def synth_features(
    class_image: np.ndarray, model: ClassFeatureModel, seed: int = 0
) -> FeatureGrid:
    """Feature grid at the class image's resolution: per-pixel class mean
    plus seeded Gaussian noise times the model's scale."""
    cls = np.asarray(class_image, dtype=np.int64)
    if cls.ndim != 2:
        raise ValueError("class image must be 2-D")
    known = np.array(sorted(model.means))
    idx = np.searchsorted(known, cls.ravel())
    idx_clipped = np.clip(idx, 0, len(known) - 1)
    if not np.array_equal(known[idx_clipped], cls.ravel()):
        bad = sorted(set(cls.ravel()) - set(known.tolist()))
        raise ValueError(f"class ids {bad} missing from the feature model")
    lut = np.stack([model.means[int(c)] for c in known])
    base = lut[idx_clipped].reshape(*cls.shape, model.dim)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(size=base.shape)
    return FeatureGrid((base + model.noise_scale * noise).astype(np.float32))


# ---------------------------------------------------------------------------
# Scene description files (flat key-value text + CSV grids)


@dataclass
class Scene:
    field: Heightfield
    class_table: dict[int, ClassDef]
    spline: SplinePath
    intrinsics: CameraIntrinsics
    speed: float = 1.0
    frame_stride: int = 5
    feature_downscale: int = 7
    feature_dim: int = FEATURE_DIM
    noise_scale: float = 0.1
    feature_seed: int = 0
    render_max_range: float = 50.0


def load_scene(path) -> Scene:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"scene file not found: {path}")
    kv: dict[str, str] = {}
    classes: dict[int, ClassDef] = {}
    spline_pts: list[tuple[float, float]] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        if key == "class":
            if len(parts) != 7:
                raise FormatError(f"{path}:{lineno}: class needs `id name flag R G B`")
            cid = int(parts[1])
            flag = parts[3]
            if flag not in ("traversable", "blocked"):
                raise FormatError(f"{path}:{lineno}: flag must be traversable|blocked")
            classes[cid] = ClassDef(
                cid, parts[2], flag == "traversable", tuple(int(v) for v in parts[4:7])
            )
        elif key == "spline":
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: spline needs `x y`")
            spline_pts.append((float(parts[1]), float(parts[2])))
        else:
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected `key value`")
            kv[key] = parts[1]

    def need(key: str) -> str:
        if key not in kv:
            raise FormatError(f"{path}: missing scene key `{key}`")
        return kv[key]

    heights = np.loadtxt(path.parent / need("heights"), delimiter=",", ndmin=2)
    class_grid = np.loadtxt(path.parent / need("classes"), delimiter=",", ndmin=2).astype(int)
    field_ = Heightfield(
        heights,
        class_grid,
        cell_size=float(need("cell_size")),
        origin=(float(kv.get("origin_x", 0.0)), float(kv.get("origin_y", 0.0))),
    )
    unknown = set(np.unique(class_grid).tolist()) - set(classes)
    if unknown:
        raise FormatError(f"{path}: class grid uses undeclared ids {sorted(unknown)}")
    spline = SplinePath(
        np.array(spline_pts),
        spacing=float(need("spacing")),
        walker_height=float(need("walker_height")),
    )
    K = CameraIntrinsics(
        fx=float(need("fx")),
        fy=float(need("fy")),
        cx=float(need("cx")),
        cy=float(need("cy")),
        width=int(need("width")),
        height=int(need("height")),
    )
    return Scene(
        field=field_,
        class_table=classes,
        spline=spline,
        intrinsics=K,
        speed=float(kv.get("speed", 1.0)),
        frame_stride=int(kv.get("frame_stride", 5)),
        feature_downscale=int(kv.get("feature_downscale", 7)),
        feature_dim=int(kv.get("feature_dim", FEATURE_DIM)),
        noise_scale=float(kv.get("noise_scale", 0.1)),
        feature_seed=int(kv.get("feature_seed", 0)),
        render_max_range=float(kv.get("render_max_range", 50.0)),
    )


def save_scene(scene: Scene, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path.parent / "heights.csv", scene.field.elevation, delimiter=",", fmt="%.6g")
    np.savetxt(path.parent / "classes.csv", scene.field.class_ids, delimiter=",", fmt="%d")
    K = scene.intrinsics
    lines = [
        "# synthetic scene description",
        f"cell_size {scene.field.cell_size}",
        f"origin_x {scene.field.origin[0]}",
        f"origin_y {scene.field.origin[1]}",
        "heights heights.csv",
        "classes classes.csv",
        f"walker_height {scene.spline.walker_height}",
        f"spacing {scene.spline.spacing}",
        f"speed {scene.speed}",
        f"frame_stride {scene.frame_stride}",
        f"feature_downscale {scene.feature_downscale}",
        f"feature_dim {scene.feature_dim}",
        f"noise_scale {scene.noise_scale}",
        f"feature_seed {scene.feature_seed}",
        f"render_max_range {scene.render_max_range}",
        f"fx {K.fx}",
        f"fy {K.fy}",
        f"cx {K.cx}",
        f"cy {K.cy}",
        f"width {K.width}",
        f"height {K.height}",
    ]
    for cdef in sorted(scene.class_table.values(), key=lambda c: c.id):
        flag = "traversable" if cdef.traversable else "blocked"
        lines.append(f"class {cdef.id} {cdef.name} {flag} {cdef.color[0]} {cdef.color[1]} {cdef.color[2]}")
    for x, y in scene.spline.control_points:
        lines.append(f"spline {x:.6g} {y:.6g}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Bundled demo scene and dataset generation


def generate_demo_scene(out_dir, seed: int = 7) -> Path:
    """Writes the bundled demo scene: a winding dirt path through short
    grass, with tall brush and boulders off the path.  Two traversable
    classes get walked on; two blocked classes stay visible ahead.
    Returns the scene file path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = 64
    cell_size = 0.5
    xs = (np.arange(cells) + 0.5) * cell_size
    ys = (np.arange(cells) + 0.5) * cell_size
    gx, gy = np.meshgrid(xs, ys)
    elevation = 0.12 * np.sin(gx / 5.0) * np.cos(gy / 6.0)

    control = np.array([[4.0, 16.0], [10.0, 13.0], [16.0, 19.0], [22.0, 14.0], [28.0, 16.0]])
    dense = _catmull_rom_dense(control, samples_per_segment=200)
    d2 = (gx[..., None] - dense[:, 0]) ** 2 + (gy[..., None] - dense[:, 1]) ** 2
    dist = np.sqrt(d2.min(axis=2))

    class_grid = np.ones((cells, cells), dtype=int)  # short grass everywhere
    # Dirt path under the walked spline, with gaps where the walk crosses
    # plain grass so that both traversable classes actually get walked on.
    path_band = dist <= 1.2
    path_band &= ~((gx > 11.0) & (gx < 14.0))
    path_band &= ~((gx > 19.5) & (gx < 21.5))
    class_grid[path_band] = 0

    rng = np.random.default_rng(seed)
    for _ in range(26):  # tall brush patches
        px, py = rng.uniform(2, 30, size=2)
        if math.hypot(px - 16, py - 16) > 20:
            continue
        r = rng.uniform(0.8, 1.6)
        patch = (gx - px) ** 2 + (gy - py) ** 2 <= r**2
        patch &= dist > 2.6
        class_grid[patch] = 2
        elevation[patch] += 0.7
    for _ in range(14):  # boulders
        px, py = rng.uniform(3, 29, size=2)
        r = rng.uniform(0.5, 1.0)
        patch = (gx - px) ** 2 + (gy - py) ** 2 <= r**2
        patch &= dist > 2.6
        class_grid[patch] = 3
        elevation[patch] += 1.1

    classes = {
        0: ClassDef(0, "dirt_path", True, (121, 96, 62)),
        1: ClassDef(1, "short_grass", True, (88, 156, 74)),
        2: ClassDef(2, "tall_brush", False, (34, 85, 41)),
        3: ClassDef(3, "boulder", False, (128, 128, 138)),
    }
    scene = Scene(
        field=Heightfield(elevation, class_grid, cell_size=cell_size),
        class_table=classes,
        spline=SplinePath(control, spacing=0.4, walker_height=1.5),
        intrinsics=CameraIntrinsics(fx=260.0, fy=260.0, cx=175.0, cy=175.0, width=350, height=350),
        speed=1.2,
        frame_stride=4,
        feature_downscale=7,
        noise_scale=0.1,
        feature_seed=seed,
        render_max_range=40.0,
    )
    scene_path = out_dir / "scene.txt"
    save_scene(scene, scene_path)
    return scene_path


def generate_dataset(scene: Scene, out_dir, seed: int = 0) -> dict:
    """Renders the scene into the file formats the rest of the pipeline
    consumes: trajectory, intrinsics, frame list, class images, depth,
    ground truth and synthetic feature grids."""
    from . import geometry
    from .features import write_feature_grid
    from .cloudexport import save_depth
    from .costmap import resize_nearest, save_ground_truth

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    poses = walk_spline(scene.field, scene.spline, speed=scene.speed)
    geometry.save_trajectory(poses, out_dir / "trajectory.txt")
    geometry.save_intrinsics(scene.intrinsics, out_dir / "intrinsics.txt")

    frame_indices = list(range(0, len(poses), scene.frame_stride))
    with open(out_dir / "frames.txt", "w") as fh:
        fh.write("# frame_id timestamp\n")
        for i in frame_indices:
            fh.write(f"frame_{i:05d} {poses[i].timestamp:.6f}\n")

    feature_classes = set(np.unique(scene.field.class_ids).tolist()) | {SKY_CLASS}
    feat_model = build_class_feature_model(
        feature_classes,
        dim=scene.feature_dim,
        noise_scale=scene.noise_scale,
        seed=scene.feature_seed,
    )

    fh_, fw_ = (
        scene.intrinsics.height // scene.feature_downscale,
        scene.intrinsics.width // scene.feature_downscale,
    )
    manifest = {"frames": [], "poses": len(poses), "feature_shape": (fh_, fw_, scene.feature_dim)}
    renders = render_views(
        scene.field,
        [poses[i] for i in frame_indices],
        scene.intrinsics,
        scene.class_table,
        max_range=scene.render_max_range,
    )
    for i, render in zip(frame_indices, renders):
        stem = f"frame_{i:05d}"
        Image.fromarray(render.class_rgb, mode="RGB").save(out_dir / f"{stem}.png")
        save_ground_truth(render.ground_truth, out_dir / f"{stem}.gt.png")
        save_depth(render.depth, out_dir / f"{stem}.depth.ftr")
        small_cls = resize_nearest(render.class_ids, fh_, fw_)
        grid = synth_features(small_cls, feat_model, seed=_frame_seed(seed, i))
        write_feature_grid(grid, out_dir / f"{stem}.ftr")
        manifest["frames"].append(stem)
    return manifest


def _frame_seed(seed: int, frame_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, frame_index])
