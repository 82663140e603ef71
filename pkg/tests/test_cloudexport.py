import numpy as np
import pytest

from travmap import cloudexport as ce
from travmap.costmap import CostMap
from travmap.errors import DimensionError, FormatError
from travmap.geometry import CameraIntrinsics, PixelCoord, project_to_pixel

K = CameraIntrinsics(fx=100, fy=100, cx=50, cy=50, width=100, height=100)


# ---------------------------------------------------------------------------
# unproject


def test_principal_point_unprojects_on_axis():
    np.testing.assert_array_equal(ce.unproject(PixelCoord(50, 50), 3.0, K), [0, 0, 3.0])


def test_unproject_hand_computed():
    np.testing.assert_allclose(
        ce.unproject(PixelCoord(100, 75), 1.0, K), [0.5, 0.25, 1.0]
    )


def test_unproject_inverts_projection(rng):
    for _ in range(200):
        p = rng.uniform([-3, -3, 0.2], [3, 3, 10])
        px = project_to_pixel(p, K)
        back = ce.unproject(px, p[2], K)
        np.testing.assert_allclose(back, p, atol=1e-6)


def test_unproject_rejects_non_positive_depth():
    with pytest.raises(ValueError):
        ce.unproject(PixelCoord(50, 50), 0.0, K)
    with pytest.raises(ValueError):
        ce.unproject(PixelCoord(50, 50), -1.0, K)


# ---------------------------------------------------------------------------
# build_cost_cloud


def flat_cost(value=0.2):
    return CostMap(np.full((100, 100), value, np.float32))


def test_depths_below_min_range_give_empty_cloud():
    depth = ce.DepthImage(np.full((100, 100), 1.5, np.float32))
    cloud = ce.build_cost_cloud(flat_cost(), depth, K, min_range=2.0)
    assert len(cloud) == 0


def test_all_invalid_depths_give_empty_cloud():
    depth = ce.DepthImage(np.zeros((100, 100), np.float32))
    cloud = ce.build_cost_cloud(flat_cost(), depth, K)
    assert len(cloud) == 0


def test_single_valid_pixel_at_principal_point():
    values = np.zeros((100, 100), np.float32)
    values[50, 50] = 3.0
    cost = CostMap(np.full((100, 100), 0.7, np.float32))
    cloud = ce.build_cost_cloud(cost, ce.DepthImage(values), K)
    assert len(cloud) == 1
    np.testing.assert_allclose(cloud.points[0], [0, 0, 3.0, 0.7], atol=1e-12)


def test_no_point_closer_than_min_range(rng):
    depth = ce.DepthImage(rng.uniform(0.5, 6.0, size=(100, 100)).astype(np.float32))
    cloud = ce.build_cost_cloud(flat_cost(), depth, K, min_range=2.0)
    ranges = np.linalg.norm(cloud.points[:, :3], axis=1)
    assert (ranges >= 2.0).all()
    assert len(cloud) <= 100 * 100


def test_point_count_bounded_by_valid_pixels(rng):
    values = rng.uniform(2.5, 8.0, size=(100, 100)).astype(np.float32)
    values[rng.uniform(size=values.shape) < 0.3] = 0.0  # invalidate some
    depth = ce.DepthImage(values)
    cloud = ce.build_cost_cloud(flat_cost(), depth, K)
    assert len(cloud) <= int(depth.valid().sum())


def test_points_emitted_in_row_major_order():
    values = np.zeros((100, 100), np.float32)
    values[10, 60] = 5.0
    values[40, 5] = 5.0
    cloud = ce.build_cost_cloud(flat_cost(), ce.DepthImage(values), K)
    assert len(cloud) == 2
    assert cloud.points[0, 1] < cloud.points[1, 1]  # row 10 before row 40


def test_cost_channel_affine_remap():
    values = np.zeros((100, 100), np.float32)
    values[50, 50] = 4.0
    cost = CostMap(np.full((100, 100), 0.5, np.float32))
    cloud = ce.build_cost_cloud(
        cost, ce.DepthImage(values), K, cost_scale=2.0, cost_offset=1.0
    )
    assert cloud.points[0, 3] == pytest.approx(2.0)


def test_dim_mismatch_rejected():
    depth = ce.DepthImage(np.ones((10, 10), np.float32))
    with pytest.raises(DimensionError):
        ce.build_cost_cloud(flat_cost(), depth, K)


# ---------------------------------------------------------------------------
# PLY I/O


def test_empty_cloud_writes_valid_ply(tmp_path):
    path = tmp_path / "empty.ply"
    ce.write_cloud(ce.CostCloud(np.zeros((0, 4))), path)
    text = path.read_text().splitlines()
    assert text[0] == "ply"
    assert "element vertex 0" in text
    assert len(ce.read_cloud(path)) == 0


def test_ply_roundtrip_exact_at_printed_precision(tmp_path, rng):
    pts = rng.normal(size=(17, 4)) * 5
    pts[:, 3] = rng.uniform(0, 1, 17)
    path = tmp_path / "c.ply"
    ce.write_cloud(ce.CostCloud(pts), path)
    loaded = ce.read_cloud(path)
    printed = np.array([[float(f"{v:.6e}") for v in row] for row in pts])
    np.testing.assert_array_equal(loaded.points, printed)


def test_three_point_cloud_layout(tmp_path):
    pts = np.array([[0, 0, 3, 0.1], [1, 1, 4, 0.2], [2, 2, 5, 0.3]], float)
    path = tmp_path / "three.ply"
    ce.write_cloud(ce.CostCloud(pts), path)
    lines = path.read_text().splitlines()
    assert "element vertex 3" in lines
    header_end = lines.index("end_header")
    assert len(lines) - header_end - 1 == 3


def test_read_cloud_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text("not a ply\n")
    with pytest.raises(FormatError):
        ce.read_cloud(path)


def test_read_cloud_rejects_count_mismatch(tmp_path):
    path = tmp_path / "short.ply"
    path.write_text(
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
        "property float z\nproperty float cost\nend_header\n0 0 1 0.5\n"
    )
    with pytest.raises(FormatError):
        ce.read_cloud(path)


# ---------------------------------------------------------------------------
# Depth I/O


def test_depth_binary_roundtrip(tmp_path, rng):
    depth = ce.DepthImage(rng.uniform(0, 10, size=(6, 8)).astype(np.float32))
    path = tmp_path / "d.ftr"
    ce.save_depth(depth, path)
    loaded = ce.load_depth(path)
    np.testing.assert_array_equal(loaded.values, depth.values)


def test_depth_png_roundtrip_millimeter_quantized(tmp_path, rng):
    vals = rng.uniform(0.1, 20, size=(6, 8)).astype(np.float32)
    vals[0, 0] = 0.0  # invalid stays invalid
    path = tmp_path / "d.png"
    ce.save_depth(ce.DepthImage(vals), path)
    loaded = ce.load_depth(path)
    np.testing.assert_allclose(loaded.values, vals, atol=5e-4 + 1e-6)
    assert loaded.values[0, 0] == 0.0
    assert not loaded.valid()[0, 0]


def test_default_min_range_constant():
    assert ce.DEFAULT_MIN_RANGE == 2.0
