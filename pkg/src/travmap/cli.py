"""Command-line pipeline driver.

Subcommands compose the library modules over shared file formats:

    synth         scene file -> full synthetic dataset
    project       trajectory + intrinsics + frames -> per-frame path pixels
    segment       images -> full-res and feature-res segment masks
    extract       features + masks + path pixels -> training vectors
    train         vectors -> model file + loss-history CSV
    infer         model + features + mask -> cost maps (segment/pixel)
    evaluate      cost maps + ground truth -> accuracy report CSV
    export-cloud  cost map + depth + intrinsics -> PLY cost cloud

Values resolve as flag > config file > built-in default.  The config file
is flat `key = value` text (same key names as the long flags, with
underscores).  On failure a machine-readable `ERROR <kind>: <message>`
line is printed to stderr and the process exits with the kind's code:

    2 config | 3 missing-file | 4 format | 5 dimension/invariant | 6 numeric
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import autoencoder, cloudexport, costmap, features, geometry, superpixel, synthgen
from .errors import ConfigError, DimensionError, MissingInputError, TravmapError

EXIT_CODE_DOC = (
    "exit codes: 0 ok, 2 config, 3 missing-file, 4 format, "
    "5 dimension/invariant, 6 numeric, 1 internal"
)


def load_config(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, val = line.split("=", 1)
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`")
            key, val = parts
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


class _Resolver:
    """flag > config-file > default, with casting from config text."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, key: str, default, cast):
        flag_val = getattr(self.args, key, None)
        if flag_val is not None:
            return flag_val
        if key in self.cfg:
            try:
                if cast is bool:
                    return self.cfg[key].lower() in ("1", "true", "yes", "on")
                return cast(self.cfg[key])
            except ValueError as exc:
                raise ConfigError(f"config key {key}: {exc}") from exc
        return default


def _input_images(spec: str) -> list[Path]:
    p = Path(spec)
    if p.is_dir():
        imgs = sorted(
            f for f in p.iterdir()
            if f.suffix.lower() == ".png" and ".gt" not in f.name and ".mask" not in f.name
        )
    elif p.exists():
        imgs = [p]
    else:
        raise MissingInputError(f"no such image file or directory: {spec}")
    if not imgs:
        raise MissingInputError(f"no input images under {spec}")
    return imgs


# ---------------------------------------------------------------------------
# Subcommands


def cmd_project(args) -> int:
    r = _Resolver(args)
    rig = geometry.RigConfig(
        height_above_ground=r.get("height", 1.5, float),
        horizon_poses=r.get("horizon", geometry.DEFAULT_HORIZON_POSES, int),
        min_forward_depth=r.get("min_depth", geometry.DEFAULT_MIN_FORWARD_DEPTH, float),
    )
    trajectory = geometry.load_trajectory(args.trajectory)
    K = geometry.load_intrinsics(args.intrinsics)
    frames = geometry.load_frame_list(args.frames)
    tol = r.get("time_tolerance", geometry.DEFAULT_TIME_TOLERANCE, float)
    matches = geometry.associate_frames(trajectory, [t for _, t in frames], tolerance=tol)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = skipped = 0
    for (frame_id, _), pose_idx in zip(frames, matches):
        if pose_idx is None:
            skipped += 1
            continue
        pixels = geometry.project_future_path(trajectory, pose_idx, K, rig)
        geometry.save_path_pixels(pixels, out_dir / f"{frame_id}.pathpx.txt")
        written += 1
    print(f"project: wrote {written} path-pixel files, skipped {skipped} unmatched frames")
    return 0


def _segment_one(img_path: Path, params, out_dir: Path, fh: int, fw: int) -> None:
    with Image.open(img_path) as im:
        rgb = np.asarray(im.convert("RGB"))
    mask = superpixel.slic_segment(rgb, params)
    stem = img_path.stem
    superpixel.save_mask(mask, out_dir / f"{stem}.mask.png")
    superpixel.save_mask(superpixel.downscale_mask(mask, fh, fw), out_dir / f"{stem}.mask_small.png")


def cmd_segment(args) -> int:
    r = _Resolver(args)
    params = superpixel.SlicParams(
        num_superpixels=r.get("superpixels", superpixel.DEFAULT_NUM_SUPERPIXELS, int),
        compactness=r.get("compactness", superpixel.DEFAULT_COMPACTNESS, float),
        max_iterations=r.get("iterations", superpixel.DEFAULT_MAX_ITERATIONS, int),
        seed=r.get("seed", 0, int),
    )
    fh = r.get("feature_height", features.FEATURE_GRID_HEIGHT, int)
    fw = r.get("feature_width", features.FEATURE_GRID_WIDTH, int)
    threads = r.get("threads", 1, int)
    imgs = _input_images(args.images)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda p: _segment_one(p, params, out_dir, fh, fw), imgs))
    else:
        for p in imgs:
            _segment_one(p, params, out_dir, fh, fw)
    print(f"segment: wrote masks for {len(imgs)} images "
          f"({params.num_superpixels} superpixels, compactness {params.compactness})")
    return 0


def cmd_extract(args) -> int:
    paths_dir = Path(args.paths)
    if not paths_dir.is_dir():
        raise MissingInputError(f"path-pixel directory not found: {paths_dir}")
    path_files = sorted(paths_dir.glob("*.pathpx.txt"))
    if not path_files:
        raise MissingInputError(f"no *.pathpx.txt files under {paths_dir}")
    vectors: list[np.ndarray] = []
    dropped = 0
    used = 0
    for pf in path_files:
        stem = pf.name[: -len(".pathpx.txt")]
        pixels = geometry.load_path_pixels(pf)
        if not pixels:
            continue
        grid = features.read_feature_grid(Path(args.features) / f"{stem}.ftr")
        mask = superpixel.load_mask(Path(args.masks) / f"{stem}.mask.png")
        result = features.masked_path_features(grid, mask, pixels)
        vectors.extend(result.vectors)
        dropped += len(result.dropped_ids)
        used += 1
    if not vectors:
        raise MissingInputError("no traversed segments found; nothing to train on")
    features.save_vectors(vectors, args.out)
    print(
        f"extract: {len(vectors)} training vectors from {used} frames "
        f"({dropped} segments vanished at feature resolution)"
    )
    return 0


def cmd_train(args) -> int:
    r = _Resolver(args)
    config = autoencoder.TrainConfig(
        learning_rate=r.get("learning_rate", 1e-3, float),
        epochs=r.get("epochs", 100, int),
        batch_size=r.get("batch_size", 256, int),
        seed=r.get("seed", 0, int),
        optimizer=r.get("optimizer", "adam", str),
        validation_fraction=r.get("validation_fraction", 0.0, float),
        standardize=r.get("standardize", False, bool),
    )
    X = features.load_vectors(args.vectors)
    model, history = autoencoder.train(X, config)
    autoencoder.save_model(model, args.out)
    loss_csv = Path(args.loss_csv) if args.loss_csv else Path(args.out).with_suffix(".loss.csv")
    with open(loss_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss"] + (["val_loss"] if history.val_loss else []))
        for i, tl in enumerate(history.train_loss):
            row = [i, f"{tl:.8g}"]
            if history.val_loss:
                row.append(f"{history.val_loss[i]:.8g}")
            writer.writerow(row)
    print(
        f"train: {X.shape[0]} vectors, {config.epochs} epochs, "
        f"final loss {history.train_loss[-1]:.6g} -> {args.out}"
    )
    return 0


def cmd_infer(args) -> int:
    r = _Resolver(args)
    cap = r.get("cap", costmap.DEFAULT_COST_CAP, float)
    threshold = r.get("threshold", costmap.DEFAULT_THRESHOLD, float)
    model = autoencoder.load_model(args.model)
    grid = features.read_feature_grid(args.features)
    mask = superpixel.load_mask(args.mask)
    modes = ("segment", "pixel") if args.mode == "both" else (args.mode,)
    for mode in modes:
        cost = costmap.infer_cost_image(model, grid, mask, mode=mode, cap=cap, threshold=threshold)
        costmap.save_cost_map(cost, f"{args.out_prefix}.{mode}.cost.ftr")
        costmap.save_cost_png(cost, f"{args.out_prefix}.{mode}.cost.png")
    print(f"infer: wrote {' and '.join(modes)} cost maps for {args.out_prefix}")
    return 0


def _pair_costs_with_gt(costs_spec: str, gt_dir: str, mode: str):
    cdir = Path(costs_spec)
    suffix = f".{mode}.cost.ftr"
    files = sorted(cdir.glob(f"*{suffix}")) if cdir.is_dir() else [cdir]
    if not files:
        raise MissingInputError(f"no *{suffix} files under {costs_spec}")
    pairs = []
    for f in files:
        stem = f.name[: -len(suffix)] if f.name.endswith(suffix) else f.stem
        gt_path = Path(gt_dir) / f"{stem}.gt.png"
        if not gt_path.exists():
            raise MissingInputError(f"no ground truth for {f.name}: {gt_path}")
        cost = costmap.load_cost_map(f, mode=mode)
        gt = costmap.load_ground_truth(gt_path)
        if gt.shape != cost.shape:
            gt = costmap.GroundTruthMask(costmap.resize_nearest(gt.labels, *cost.shape))
        pairs.append((cost, gt))
    return pairs


def cmd_evaluate(args) -> int:
    r = _Resolver(args)
    mode = args.mode
    pairs = _pair_costs_with_gt(args.costs, args.gt, mode)
    costs = [c for c, _ in pairs]
    gts = [g for _, g in pairs]
    if args.sweep:
        step = r.get("sweep_step", 0.01, float)
        cands = costmap.default_threshold_grid(step)
    else:
        cands = np.array([r.get("threshold", costmap.DEFAULT_THRESHOLD, float)])
    best, curve = costmap.tune_threshold(costs, gts, cands)
    rows = []
    for t, acc in curve:
        tt = ft = tb = fb = 0
        for cost, gt in pairs:
            res = costmap.evaluate_accuracy(costmap.traversable_mask(cost, t), gt)
            tt += res.true_traversable
            ft += res.false_traversable
            tb += res.true_blocked
            fb += res.false_blocked
        rows.append((t, acc, tt, ft, tb, fb))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["threshold", "accuracy", "true_traversable", "false_traversable",
             "true_blocked", "false_blocked"]
        )
        for t, acc, tt, ft, tb, fb in rows:
            writer.writerow([f"{t:.4g}", f"{acc:.6f}", tt, ft, tb, fb])
    best_acc = dict(curve)[best]
    print(f"evaluate: best_threshold={best:.4g} accuracy={best_acc:.6f} frames={len(pairs)}")
    return 0


def cmd_export_cloud(args) -> int:
    r = _Resolver(args)
    min_range = r.get("min_range", cloudexport.DEFAULT_MIN_RANGE, float)
    cost = costmap.load_cost_map(args.cost)
    depth = cloudexport.load_depth(args.depth)
    K = geometry.load_intrinsics(args.intrinsics)
    if cost.shape != depth.shape:
        cost = costmap.CostMap(
            costmap.resize_nearest(cost.values, *depth.shape),
            mode=cost.mode,
            threshold=cost.threshold,
        )
    cloud = cloudexport.build_cost_cloud(
        cost, depth, K,
        min_range=min_range,
        cost_scale=r.get("cost_scale", 1.0, float),
        cost_offset=r.get("cost_offset", 0.0, float),
    )
    cloudexport.write_cloud(cloud, args.out)
    print(f"export-cloud: {len(cloud)} points (min range {min_range} m) -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    r = _Resolver(args)
    scene = synthgen.load_scene(args.scene)
    manifest = synthgen.generate_dataset(scene, args.out, seed=r.get("seed", 0, int))
    print(
        f"synth: {len(manifest['frames'])} frames from {manifest['poses']} poses, "
        f"feature grids {manifest['feature_shape']} -> {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="travmap",
        description="Terrain-traversability estimation pipeline over walked trajectories.",
        epilog=EXIT_CODE_DOC,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="seed for all randomness (default 0)")
        p.add_argument("--threads", type=int, default=None, help="worker cap for parallel stages (default 1)")

    p = sub.add_parser("project", help="project future trajectory poses into frames")
    common(p)
    p.add_argument("--trajectory", required=True, help="TUM trajectory file")
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--frames", required=True, help="frame list: `frame_id timestamp` lines")
    p.add_argument("--out", required=True, help="output directory for *.pathpx.txt")
    p.add_argument("--height", type=float, default=None, help="rig height above ground, m (default 1.5)")
    p.add_argument("--horizon", type=int, default=None, help="future poses to project (default 40)")
    p.add_argument("--min-depth", dest="min_depth", type=float, default=None,
                   help="minimum forward depth, m (default 0.1)")
    p.add_argument("--time-tolerance", dest="time_tolerance", type=float, default=None,
                   help="frame/pose association tolerance, s (default 0.05)")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("segment", help="SLIC superpixel masks for images")
    common(p)
    p.add_argument("--images", required=True, help="image file or directory of PNGs")
    p.add_argument("--out", required=True)
    p.add_argument("--superpixels", type=int, default=None, help="target count (default 400)")
    p.add_argument("--compactness", type=float, default=None, help="spatial weight (default 15)")
    p.add_argument("--iterations", type=int, default=None, help="iteration cap (default 10)")
    p.add_argument("--feature-height", dest="feature_height", type=int, default=None,
                   help="downscaled mask height (default 50)")
    p.add_argument("--feature-width", dest="feature_width", type=int, default=None,
                   help="downscaled mask width (default 50)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("extract", help="pool per-segment training vectors along walked paths")
    common(p)
    p.add_argument("--features", required=True, help="directory of *.ftr feature grids")
    p.add_argument("--masks", required=True, help="directory of *.mask.png files")
    p.add_argument("--paths", required=True, help="directory of *.pathpx.txt files")
    p.add_argument("--out", required=True, help="output training-vector file")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the reconstruction autoencoder")
    common(p)
    p.add_argument("--vectors", required=True)
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--loss-csv", dest="loss_csv", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float, default=None)
    p.add_argument("--standardize", action="store_const", const=True, default=None,
                   help="per-dimension standardization (stats stored in the model)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="cost maps from a model and a feature grid")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True, help="feature grid (*.ftr)")
    p.add_argument("--mask", required=True, help="segment mask at feature-grid resolution")
    p.add_argument("--out-prefix", dest="out_prefix", required=True)
    p.add_argument("--mode", choices=("segment", "pixel", "both"), default="both")
    p.add_argument("--cap", type=float, default=None, help="loss cap before normalizing (default 10)")
    p.add_argument("--threshold", type=float, default=None, help="stored cutoff (default 0.35)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="accuracy against ground truth, optional sweep")
    common(p)
    p.add_argument("--costs", required=True, help="cost map file or directory")
    p.add_argument("--gt", required=True, help="directory of *.gt.png files")
    p.add_argument("--out", required=True, help="report CSV")
    p.add_argument("--mode", choices=("segment", "pixel"), default="segment")
    p.add_argument("--threshold", type=float, default=None, help="single candidate (default 0.35)")
    p.add_argument("--sweep", action="store_true", help="sweep thresholds 0..1")
    p.add_argument("--sweep-step", dest="sweep_step", type=float, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-cloud", help="cost-annotated PLY cloud from depth")
    common(p)
    p.add_argument("--cost", required=True)
    p.add_argument("--depth", required=True, help="*.ftr float grid or 16-bit mm PNG")
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-range", dest="min_range", type=float, default=None,
                   help="discard points nearer than this, m (default 2.0)")
    p.add_argument("--cost-scale", dest="cost_scale", type=float, default=None)
    p.add_argument("--cost-offset", dest="cost_offset", type=float, default=None)
    p.set_defaults(func=cmd_export_cloud)

    p = sub.add_parser("synth", help="generate a synthetic dataset from a scene file")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TravmapError as exc:
        print(f"ERROR {exc.kind}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"ERROR missing-file: {exc}", file=sys.stderr)
        return MissingInputError.exit_code
    except (ValueError, IndexError) as exc:
        print(f"ERROR invariant: {exc}", file=sys.stderr)
        return DimensionError.exit_code


if __name__ == "__main__":
    sys.exit(main())
