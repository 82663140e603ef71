"""Acceptance suite: one test per release criterion, at the stated tolerances.

Run with  `pytest tests/test_acceptance.py -v -s`  to see one PASS line per
criterion; any assertion failure marks that criterion red.
"""

import csv
import time

import numpy as np
import pytest

from travmap import autoencoder as ae
from travmap import cloudexport as ce
from travmap import costmap as cm
from travmap import features as ft
from travmap import geometry as geo
from travmap import superpixel as sp
from travmap import synthgen as sg
from travmap.cli import build_parser, main

from conftest import synth_natural_image


def _report(name: str):
    print(f"\nACCEPTANCE PASS  {name}")


# ---------------------------------------------------------------------------
# 1. Synthetic end-to-end accuracy >= 0.95, runtime <= 5 min single-threaded


def test_synthetic_end_to_end_accuracy(tmp_path, capsys):
    t0 = time.monotonic()
    scene_path = sg.generate_demo_scene(tmp_path / "scene")
    data = tmp_path / "data"
    work = tmp_path / "work"
    work.mkdir()

    assert main(["synth", "--scene", str(scene_path), "--out", str(data), "--seed", "0"]) == 0
    assert main([
        "project", "--trajectory", str(data / "trajectory.txt"),
        "--intrinsics", str(data / "intrinsics.txt"),
        "--frames", str(data / "frames.txt"), "--out", str(work / "paths"),
    ]) == 0
    assert main(["segment", "--images", str(data), "--out", str(work / "masks")]) == 0
    assert main([
        "extract", "--features", str(data), "--masks", str(work / "masks"),
        "--paths", str(work / "paths"), "--out", str(work / "vectors.ftr"),
    ]) == 0
    assert main([
        "train", "--vectors", str(work / "vectors.ftr"),
        "--out", str(work / "model.mlp"), "--seed", "0",
    ]) == 0
    (work / "costs").mkdir()
    for f in sorted(data.glob("frame_*.ftr")):
        if ".depth" in f.name:
            continue
        assert main([
            "infer", "--model", str(work / "model.mlp"), "--features", str(f),
            "--mask", str(work / "masks" / f"{f.stem}.mask_small.png"),
            "--out-prefix", str(work / "costs" / f.stem), "--mode", "segment",
        ]) == 0
    assert main([
        "evaluate", "--costs", str(work / "costs"), "--gt", str(data),
        "--out", str(work / "report.csv"), "--sweep",
    ]) == 0

    with open(work / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    best_acc = max(float(r["accuracy"]) for r in rows)
    elapsed = time.monotonic() - t0
    capsys.readouterr()  # swallow subcommand chatter before the verdict line
    assert best_acc >= 0.95, f"tuned accuracy {best_acc:.4f} < 0.95"
    assert elapsed <= 300.0, f"pipeline took {elapsed:.0f}s > 5 min"
    _report(f"synthetic end-to-end accuracy ({best_acc:.4f} >= 0.95 in {elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# 2. Anomaly separation: factor >= 5, sweep cutoff accuracy >= 0.99, <= 1 min


def test_anomaly_separation_and_threshold_sweep():
    t0 = time.monotonic()
    rng = np.random.default_rng(0)
    mu_a = rng.uniform(-0.5, 0.5, size=384)
    mu_b = mu_a + (rng.integers(0, 2, 384) * 2 - 1).astype(float)  # L-inf gap 1
    assert np.abs(mu_b - mu_a).max() >= 1.0

    train_a = (mu_a + 0.1 * rng.standard_normal((400, 384))).astype(np.float32)
    held_a = (mu_a + 0.1 * rng.standard_normal((150, 384))).astype(np.float32)
    off_b = (mu_b + 0.1 * rng.standard_normal((150, 384))).astype(np.float32)

    model, _ = ae.train(train_a, ae.TrainConfig(epochs=40, seed=0))
    loss_a = ae.reconstruction_losses(model, held_a)
    loss_b = ae.reconstruction_losses(model, off_b)
    ratio = loss_b.mean() / loss_a.mean()
    assert ratio >= 5.0, f"separation ratio {ratio:.2f} < 5"

    # arrange the vector costs as one image and sweep the threshold
    costs = cm.normalize_cost(np.concatenate([loss_a, loss_b]), cap=10.0)
    cost_map = cm.CostMap(costs.reshape(30, 10).astype(np.float32))
    labels = np.concatenate([np.full(150, cm.TRAVERSABLE), np.full(150, cm.NON_TRAVERSABLE)])
    gt = cm.GroundTruthMask(labels.reshape(30, 10).astype(np.uint8))
    best, curve = cm.tune_threshold([cost_map], [gt])
    best_acc = dict(curve)[best]
    elapsed = time.monotonic() - t0
    assert best_acc >= 0.99, f"swept accuracy {best_acc:.4f} < 0.99"
    assert elapsed <= 60.0, f"took {elapsed:.0f}s > 1 min"
    _report(
        f"anomaly separation (ratio {ratio:.1f} >= 5, cutoff accuracy {best_acc:.4f} >= 0.99)"
    )


# ---------------------------------------------------------------------------
# 3. Gradient correctness: >= 20 random nets, rel error < 1e-4 vs central FD


def test_gradient_correctness_20_networks():
    h = 1e-5
    worst_overall = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        model = ae.init_model([4, 3, 2, 3, 4], seed=seed, dtype=np.float64)
        for b in model.biases:
            b += rng.uniform(-0.5, 0.5, size=b.shape)
        batch = rng.normal(size=(6, 4))
        _, gw, gb = ae.gradients(model, batch)
        for k in range(len(model.weights)):
            for arr, g in ((model.weights[k], gw[k]), (model.biases[k], gb[k])):
                it = np.nditer(arr, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = arr[idx]
                    arr[idx] = orig + h
                    lp, _, _ = ae.gradients(model, batch)
                    arr[idx] = orig - h
                    lm, _, _ = ae.gradients(model, batch)
                    arr[idx] = orig
                    fd = (lp - lm) / (2 * h)
                    rel = abs(g[idx] - fd) / max(1e-8, abs(g[idx]) + abs(fd))
                    worst_overall = max(worst_overall, rel)
                    assert rel < 1e-4, f"seed {seed}: rel error {rel:.2e}"
    _report(f"gradient correctness (20 nets, worst rel error {worst_overall:.1e} < 1e-4)")


# ---------------------------------------------------------------------------
# 4. Geometry invariants


def test_geometry_invariants():
    K = geo.CameraIntrinsics(fx=320, fy=300, cx=310, cy=240, width=640, height=480)
    rng = np.random.default_rng(7)

    # projection/unprojection round trip < 1e-6 on 1e4 random in-front points
    pts = rng.uniform([-5, -5, 0.1], [5, 5, 20], size=(10_000, 3))
    worst = 0.0
    for p in pts:
        px = geo.project_to_pixel(p, K)
        back = ce.unproject(px, p[2], K)
        worst = max(worst, float(np.abs(back - p).max()))
    assert worst < 1e-6

    # pose round trip < 1e-9
    worst_pose = 0.0
    for _ in range(200):
        q = rng.normal(size=4)
        pose = geo.Pose(geo.quat_to_rotmat(*q), rng.normal(size=3) * 5)
        pt = rng.normal(size=3) * 10
        back = geo.world_to_device(pose, geo.device_to_world(pose, pt))
        worst_pose = max(worst_pose, float(np.abs(back - pt).max()))
    assert worst_pose < 1e-9

    # straight walk: monotone non-increasing v
    R = np.column_stack([(0, -1, 0), (0, 0, -1), (1, 0, 0)])
    traj = [
        geo.Pose(R, np.array([0.4 * i, 0.0, 1.5]), timestamp=float(i)) for i in range(120)
    ]
    rig = geo.RigConfig(height_above_ground=1.5)
    pixels = geo.project_future_path(traj, 0, K, rig)
    vs = [p.v for p in pixels]
    assert len(vs) > 5 and all(b <= a for a, b in zip(vs, vs[1:]))

    # horizon cap of 40 enforced with 119 future poses available
    assert rig.horizon_poses == 40
    assert len(pixels) <= 40
    far = geo.project_future_path(traj, 0, K, geo.RigConfig(1.5, horizon_poses=119))
    assert len(far) > len(pixels)  # the cap, not visibility, limited the list
    _report(
        f"geometry invariants (reprojection {worst:.1e} < 1e-6, pose {worst_pose:.1e} < 1e-9, "
        "monotone v, horizon 40)"
    )


# ---------------------------------------------------------------------------
# 5. Aggregation oracle: scatter-reduce equals naive double loop, 100 pairs


def test_aggregation_matches_naive_oracle_100_pairs():
    from test_features import naive_segment_means

    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        h, w, d = rng.integers(2, 11), rng.integers(2, 11), rng.integers(1, 7)
        grid = ft.FeatureGrid(rng.normal(size=(h, w, d)).astype(np.float32))
        mask = sp.SegmentMask.from_labels(rng.integers(0, 6, size=(h, w)))
        ids = set(range(6))
        fast = ft.segment_mean_features(grid, mask, ids)
        slow = naive_segment_means(grid, mask, ids)
        assert fast.keys() == slow.keys()
        for sid in fast:
            diff = float(np.abs(fast[sid] - slow[sid]).max())
            worst = max(worst, diff)
            assert diff <= 1e-6
    _report(f"aggregation oracle (100 pairs, worst |diff| {worst:.1e} <= 1e-6)")


# ---------------------------------------------------------------------------
# 6. SLIC properties on a 700x700 natural test image


def test_slic_properties_700x700():
    img = synth_natural_image(700, 700, seed=42)
    params = sp.SlicParams()  # 400 superpixels, compactness 15
    res1 = sp.slic_segment_full(img, params)
    res2 = sp.slic_segment_full(img, params)

    assert res1.mask.labels.min() >= 0  # full pixel coverage
    np.testing.assert_array_equal(res1.mask.labels, res2.mask.labels)  # deterministic

    e = res1.energy_per_iteration
    assert all(b <= a for a, b in zip(e, e[1:])), "objective increased"
    e2 = res1.squared_energy_per_iteration
    assert all(b <= a for a, b in zip(e2, e2[1:]))

    n = res1.mask.num_segments
    assert 320 <= n <= 480, f"segment count {n} outside 400 +/- 20%"
    _report(f"SLIC properties (coverage, determinism, monotone objective, {n} segments)")


# ---------------------------------------------------------------------------
# 7. Constants fidelity


def test_constants_fidelity():
    assert sp.SlicParams().num_superpixels == 400
    assert sp.SlicParams().compactness == 15
    assert geo.RigConfig(height_above_ground=1.0).horizon_poses == 40
    assert cm.DEFAULT_COST_CAP == 10
    assert cm.DEFAULT_THRESHOLD == 0.35
    assert cm.CostMap(np.zeros((1, 1), np.float32)).threshold == 0.35
    assert ce.DEFAULT_MIN_RANGE == 2.0
    assert ft.FEATURE_DIM == 384
    assert (ft.FEATURE_GRID_HEIGHT, ft.FEATURE_GRID_WIDTH) == (50, 50)
    assert ae.LAYER_SIZES == [384, 256, 128, 64, 32, 64, 128, 256, 384]
    assert ae.LAYER_SIZES[4] == 32  # bottleneck

    # CLI surfaces the same defaults through its help metadata
    parser = build_parser()
    help_text = {}
    for sub in ("project", "segment", "infer", "export-cloud"):
        args = [a for a in parser._subparsers._group_actions[0].choices[sub]._actions]
        help_text[sub] = {a.dest: (a.help or "") for a in args}
    assert "default 40" in help_text["project"]["horizon"]
    assert "default 400" in help_text["segment"]["superpixels"]
    assert "default 15" in help_text["segment"]["compactness"]
    assert "default 10" in help_text["infer"]["cap"]
    assert "default 0.35" in help_text["infer"]["threshold"]
    assert "default 2.0" in help_text["export-cloud"]["min_range"]
    _report("constants fidelity (400 / 15 / 40 / 10 / 0.35 / 2.0 m / 384 / 50x50)")


# ---------------------------------------------------------------------------
# 8. Cloud export: min range 2 m, PLY reparse exact at the printed precision


def test_cloud_export_range_and_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    K = geo.CameraIntrinsics(fx=120, fy=120, cx=40, cy=30, width=80, height=60)
    depth = ce.DepthImage(rng.uniform(0.3, 8.0, size=(60, 80)).astype(np.float32))
    cost = cm.CostMap(rng.uniform(0, 1, size=(60, 80)).astype(np.float32))
    cloud = ce.build_cost_cloud(cost, depth, K)  # default min range 2.0

    ranges = np.linalg.norm(cloud.points[:, :3], axis=1)
    assert len(cloud) > 0
    assert float(ranges.min()) >= 2.0, "a point violated the 2 m minimum range"

    path = tmp_path / "cloud.ply"
    ce.write_cloud(cloud, path)
    reparsed = ce.read_cloud(path)
    printed = np.array([[float(f"{v:.6e}") for v in row] for row in cloud.points])
    np.testing.assert_array_equal(reparsed.points, printed)
    _report(
        f"cloud export ({len(cloud)} points, min range {ranges.min():.3f} >= 2.0 m, "
        "PLY reparse exact)"
    )
