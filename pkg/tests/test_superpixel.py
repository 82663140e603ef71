import numpy as np
import pytest

from travmap import superpixel as sp
from travmap.errors import FormatError
from travmap.geometry import PixelCoord

from conftest import synth_natural_image


# ---------------------------------------------------------------------------
# rgb_to_lab


def test_white_maps_to_L100_neutral():
    lab = sp.rgb_to_lab(np.full((1, 1, 3), 255, np.uint8))[0, 0]
    assert abs(lab[0] - 100.0) < 1e-6
    assert abs(lab[1]) < 0.5 and abs(lab[2]) < 0.5


def test_black_maps_to_zero():
    lab = sp.rgb_to_lab(np.zeros((1, 1, 3), np.uint8))[0, 0]
    np.testing.assert_allclose(lab, [0, 0, 0], atol=1e-6)


def test_midgray_matches_reference_conversion():
    skimage_color = pytest.importorskip("skimage.color")
    gray = np.full((1, 1, 3), 128, np.uint8)
    np.testing.assert_allclose(
        sp.rgb_to_lab(gray), skimage_color.rgb2lab(gray), atol=0.05
    )


def test_random_image_matches_reference_conversion(rng):
    skimage_color = pytest.importorskip("skimage.color")
    img = rng.integers(0, 256, size=(32, 32, 3)).astype(np.uint8)
    np.testing.assert_allclose(
        sp.rgb_to_lab(img), skimage_color.rgb2lab(img), atol=0.05
    )


# ---------------------------------------------------------------------------
# slic_segment


def test_uniform_image_tiles_regularly():
    img = np.full((100, 100, 3), 128, np.uint8)
    mask = sp.slic_segment(img, sp.SlicParams(num_superpixels=16))
    assert mask.num_segments == 16
    areas = np.bincount(mask.labels.ravel())
    target = 100 * 100 / 16
    assert areas.min() >= target / 2 and areas.max() <= target * 2


def test_segment_count_within_20pct_of_request():
    img = synth_natural_image(200, 200, seed=3)
    mask = sp.slic_segment(img, sp.SlicParams(num_superpixels=100))
    assert 80 <= mask.num_segments <= 120


def test_determinism_same_seed_bit_identical():
    img = synth_natural_image(120, 160, seed=5)
    params = sp.SlicParams(num_superpixels=50, seed=9)
    a = sp.slic_segment(img, params)
    b = sp.slic_segment(img, params)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_every_pixel_assigned_and_ids_dense():
    img = synth_natural_image(90, 130, seed=11)
    mask = sp.slic_segment(img, sp.SlicParams(num_superpixels=40))
    assert mask.labels.min() == 0
    np.testing.assert_array_equal(np.unique(mask.labels), np.arange(mask.num_segments))


def test_energy_non_increasing():
    for seed in (0, 1, 2):
        img = synth_natural_image(150, 150, seed=seed)
        res = sp.slic_segment_full(img, sp.SlicParams(num_superpixels=64))
        e = res.energy_per_iteration
        assert all(b <= a for a, b in zip(e, e[1:])), e
        e2 = res.squared_energy_per_iteration
        assert all(b <= a for a, b in zip(e2, e2[1:])), e2


def _assert_4_connected(labels: np.ndarray):
    from collections import deque

    H, W = labels.shape
    seen = np.zeros_like(labels, dtype=bool)
    comps_per_id: dict[int, int] = {}
    for r0 in range(H):
        for c0 in range(W):
            if seen[r0, c0]:
                continue
            lbl = labels[r0, c0]
            comps_per_id[lbl] = comps_per_id.get(lbl, 0) + 1
            q = deque([(r0, c0)])
            seen[r0, c0] = True
            while q:
                r, c = q.popleft()
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < H and 0 <= cc < W and not seen[rr, cc] and labels[rr, cc] == lbl:
                        seen[rr, cc] = True
                        q.append((rr, cc))
    assert all(v == 1 for v in comps_per_id.values()), "found disconnected segment ids"


def test_segments_are_4_connected():
    img = synth_natural_image(80, 80, seed=21)
    mask = sp.slic_segment(img, sp.SlicParams(num_superpixels=25))
    _assert_4_connected(mask.labels)


def test_image_smaller_than_cluster_count_raises():
    img = np.zeros((3, 3, 3), np.uint8)
    with pytest.raises(ValueError):
        sp.slic_segment(img, sp.SlicParams(num_superpixels=16))


def test_slic_params_validation():
    with pytest.raises(ValueError):
        sp.SlicParams(num_superpixels=0)
    with pytest.raises(ValueError):
        sp.SlicParams(compactness=0)
    defaults = sp.SlicParams()
    assert defaults.num_superpixels == 400 and defaults.compactness == 15


# ---------------------------------------------------------------------------
# downscale_mask


def quadrant_mask():
    labels = np.zeros((4, 4), np.int32)
    labels[:2, 2:] = 1
    labels[2:, :2] = 2
    labels[2:, 2:] = 3
    return sp.SegmentMask.from_labels(labels)


def test_downscale_identity():
    mask = quadrant_mask()
    out = sp.downscale_mask(mask, 4, 4)
    np.testing.assert_array_equal(out.labels, mask.labels)


def test_downscale_quadrants_by_hand():
    # target centers scale to source index floor((i+0.5)*2) = 1 or 3,
    # which stay inside their quadrants
    out = sp.downscale_mask(quadrant_mask(), 2, 2)
    np.testing.assert_array_equal(out.labels, [[0, 1], [2, 3]])


def test_downscale_never_invents_ids(rng):
    labels = rng.integers(0, 17, size=(37, 53))
    mask = sp.SegmentMask.from_labels(labels)
    out = sp.downscale_mask(mask, 11, 7)
    assert set(np.unique(out.labels)) <= set(np.unique(mask.labels))


def test_downscale_rejects_upscale_and_zero():
    mask = quadrant_mask()
    with pytest.raises(ValueError):
        sp.downscale_mask(mask, 8, 8)
    with pytest.raises(ValueError):
        sp.downscale_mask(mask, 0, 2)


# ---------------------------------------------------------------------------
# traversed_segment_ids


def test_empty_path_gives_empty_set():
    assert sp.traversed_segment_ids(quadrant_mask(), []) == set()


def test_single_segment_path():
    pix = [PixelCoord(0.2, 0.3), PixelCoord(1.0, 1.0)]
    assert sp.traversed_segment_ids(quadrant_mask(), pix) == {0}


def test_three_segment_mask_two_touched():
    labels = np.zeros((6, 9), np.int32)
    labels[:, 3:6] = 1
    labels[:, 6:] = 2
    mask = sp.SegmentMask.from_labels(labels)
    pix = [PixelCoord(0.0, 0.0), PixelCoord(7.5, 5.0), PixelCoord(8.0, 2.0)]
    assert sp.traversed_segment_ids(mask, pix) == {0, 2}


def test_traversed_ids_out_of_bounds_pixel_raises():
    with pytest.raises(ValueError):
        sp.traversed_segment_ids(quadrant_mask(), [PixelCoord(10.0, 0.0)])


def test_traversed_ids_subset_of_id_range():
    img = synth_natural_image(60, 60, seed=2)
    mask = sp.slic_segment(img, sp.SlicParams(num_superpixels=12))
    pix = [PixelCoord(u, v) for u, v in [(5, 5), (30, 30), (59, 59)]]
    ids = sp.traversed_segment_ids(mask, pix)
    assert all(0 <= i < mask.num_segments for i in ids)


def test_fullres_and_downscaled_selection_agree_on_aligned_blocks():
    # 28x28 with 14x14 blocks, downscaled 14x: selecting by path pixels at
    # block centers picks the same id set in both resolutions
    labels = np.repeat(np.repeat(np.arange(4).reshape(2, 2), 14, axis=0), 14, axis=1)
    mask = sp.SegmentMask.from_labels(labels)
    small = sp.downscale_mask(mask, 2, 2)
    path = [PixelCoord(7.0, 7.0), PixelCoord(21.0, 21.0)]
    full_ids = sp.traversed_segment_ids(mask, path)
    small_path = [PixelCoord(p.u / 14.0, p.v / 14.0) for p in path]
    small_ids = sp.traversed_segment_ids(small, small_path)
    assert full_ids == small_ids == {0, 3}


# ---------------------------------------------------------------------------
# Mask I/O


def test_mask_png_roundtrip(tmp_path, rng):
    labels = rng.integers(0, 500, size=(20, 30))
    mask = sp.SegmentMask.from_labels(labels)
    path = tmp_path / "m.mask.png"
    sp.save_mask(mask, path)
    loaded = sp.load_mask(path)
    np.testing.assert_array_equal(loaded.labels, mask.labels)


def test_mask_pgm_roundtrip(tmp_path, rng):
    labels = rng.integers(0, 65535, size=(9, 17))
    mask = sp.SegmentMask.from_labels(labels)
    path = tmp_path / "m.pgm"
    sp.save_mask(mask, path)
    loaded = sp.load_mask(path)
    np.testing.assert_array_equal(loaded.labels, mask.labels)


def test_mask_pgm_bad_magic(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n2 2\n65535\n")
    with pytest.raises(FormatError):
        sp.load_mask(path)


def test_mask_pgm_truncated(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n4 4\n65535\n\x00\x01")
    with pytest.raises(FormatError):
        sp.load_mask(path)


def test_mask_id_overflow_rejected(tmp_path):
    mask = sp.SegmentMask.from_labels(np.array([[0, 70000]], dtype=np.int64))
    with pytest.raises(ValueError):
        sp.save_mask(mask, tmp_path / "m.png")
