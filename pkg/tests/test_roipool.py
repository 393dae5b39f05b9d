import math

import numpy as np
import pytest

from rboxkit import (
    FeatureMap,
    box_corners,
    box_dims,
    box_from_center,
    load_feature_map,
    rotated_roi_pool,
    rotated_roi_pool_backward,
    save_feature_map,
)


def axis_pool_reference(data, x0, y0, w, h, k):
    """Plain non-overlapping max pooling of an integer-aligned patch."""
    out = np.empty((k, k, data.shape[2]))
    for j in range(k):
        for i in range(k):
            ys = y0 + j * (h // k), y0 + (j + 1) * (h // k)
            xs = x0 + i * (w // k), x0 + (i + 1) * (w // k)
            out[j, i] = data[ys[0]:ys[1], xs[0]:xs[1]].max(axis=(0, 1))
    return out


class TestForward:
    def test_constant_map(self, rng):
        fmap = FeatureMap(np.full((20, 20, 3), 2.5))
        for roi in (np.array([2, 2, 15, 11, 0.0]), box_from_center(10, 10, 12, 7, 0.9)):
            res = rotated_roi_pool(fmap, roi, 4)
            assert np.all(res.output == 2.5)

    def test_axis_aligned_matches_reference(self, rng):
        data = rng.standard_normal((24, 24, 3))
        fmap = FeatureMap(data)
        for _ in range(100):
            k = int(rng.integers(1, 5))
            w = k * int(rng.integers(1, 4))
            h = k * int(rng.integers(1, 4))
            x0 = int(rng.integers(0, 24 - w))
            y0 = int(rng.integers(0, 24 - h))
            roi = np.array([x0, y0, x0 + w, y0 + h, 0.0], float)
            res = rotated_roi_pool(fmap, roi, k)
            assert np.array_equal(res.output, axis_pool_reference(data, x0, y0, w, h, k))
            assert not res.fill_mask.any()

    def test_subpixel_roi_fills_from_nearest(self):
        data = np.arange(100, dtype=float).reshape(10, 10, 1)
        res = rotated_roi_pool(FeatureMap(data), np.array([4.3, 6.2, 4.9, 6.8, 0.0]), 1)
        assert res.fill_mask.all()
        # the quantized cell collapses onto corner A = (4.3, 6.2), whose
        # nearest pixel is (x=4, y=6)
        assert res.output[0, 0, 0] == data[6, 4, 0]
        assert res.argmax[0, 0, 0].tolist() == [6, 4]

    def test_output_values_are_input_values(self, rng):
        data = rng.standard_normal((30, 30, 2))
        fmap = FeatureMap(data)
        for _ in range(20):
            roi = box_from_center(*rng.uniform(8, 22, 2), *rng.uniform(4, 14, 2), rng.uniform(0, np.pi))
            res = rotated_roi_pool(fmap, roi, 3)
            values = set(np.round(data.ravel(), 12))
            assert set(np.round(res.output.ravel(), 12)) <= values

    def test_argmax_consistent_with_output(self, rng):
        data = rng.standard_normal((30, 30, 2))
        fmap = FeatureMap(data)
        roi = box_from_center(15, 15, 14, 9, 0.7)
        res = rotated_roi_pool(fmap, roi, 5)
        for j in range(5):
            for i in range(5):
                for c in range(2):
                    r, s = res.argmax[j, i, c]
                    assert res.output[j, i, c] == data[r, s, c]

    def test_argmax_inside_map_and_roi(self, rng):
        data = rng.standard_normal((26, 26, 1))
        fmap = FeatureMap(data)
        roi = box_from_center(13, 12, 15, 8, 0.5)
        res = rotated_roi_pool(fmap, roi, 4)
        w, h = box_dims(roi)
        c, s = math.cos(roi[4]), math.sin(roi[4])
        for j in range(4):
            for i in range(4):
                ry, rx = res.argmax[j, i, 0]
                assert 0 <= ry < 26 and 0 <= rx < 26
                if not res.fill_mask[j, i]:
                    # member pixels sit inside the roi rectangle
                    t = (rx - roi[0]) * c + (ry - roi[1]) * s
                    u = -(rx - roi[0]) * s + (ry - roi[1]) * c
                    assert -1e-9 <= t <= w + 1e-9
                    assert -1e-9 <= u <= h + 1e-9

    def test_spatial_stride_scales_roi(self, rng):
        data = rng.standard_normal((16, 16, 1))
        res_a = rotated_roi_pool(FeatureMap(data, spatial_stride=4.0), np.array([8, 8, 40, 40, 0.0]), 2)
        res_b = rotated_roi_pool(FeatureMap(data, spatial_stride=1.0), np.array([2, 2, 10, 10, 0.0]), 2)
        assert np.array_equal(res_a.output, res_b.output)

    def test_roi_fully_outside_raises(self):
        fmap = FeatureMap(np.zeros((8, 8, 1)))
        with pytest.raises(ValueError, match="outside"):
            rotated_roi_pool(fmap, np.array([50, 50, 60, 60, 0.0]), 2)

    def test_partially_outside_is_filled_not_error(self):
        data = np.arange(64, dtype=float).reshape(8, 8, 1)
        res = rotated_roi_pool(FeatureMap(data), np.array([-6, 0, 2, 8, 0.0]), 2)
        assert res.output.shape == (2, 2, 1)
        assert res.fill_mask.any()

    def test_output_size_validation(self):
        with pytest.raises(ValueError):
            rotated_roi_pool(FeatureMap(np.zeros((4, 4, 1))), np.array([0, 0, 2, 2, 0.0]), 0)


class TestBackward:
    def test_zero_gradient(self, rng):
        fmap = FeatureMap(rng.standard_normal((12, 12, 2)))
        res = rotated_roi_pool(fmap, box_from_center(6, 6, 8, 5, 0.4), 3)
        grid = rotated_roi_pool_backward(np.zeros((3, 3, 2)), res, (12, 12, 2))
        assert np.all(grid == 0.0)

    def test_scatter_positions(self):
        data = np.arange(36, dtype=float).reshape(6, 6, 1)
        res = rotated_roi_pool(FeatureMap(data), np.array([0, 0, 4, 4, 0.0]), 2)
        grad = np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None]
        grid = rotated_roi_pool_backward(grad, res, (6, 6, 1))
        assert grid.sum() == 10.0
        for j in range(2):
            for i in range(2):
                r, c = res.argmax[j, i, 0]
                assert grid[r, c, 0] == grad[j, i, 0]

    def test_shared_argmax_accumulates(self):
        data = np.zeros((4, 4, 1))
        data[1, 1, 0] = 5.0  # dominates both cells after fill/membership
        res = rotated_roi_pool(FeatureMap(data), np.array([0.4, 0.4, 1.6, 1.6, 0.0]), 2)
        grad = np.ones((2, 2, 1))
        grid = rotated_roi_pool_backward(grad, res, (4, 4, 1))
        assert grid.sum() == 4.0
        counts = {}
        for j in range(2):
            for i in range(2):
                counts[tuple(res.argmax[j, i, 0])] = counts.get(tuple(res.argmax[j, i, 0]), 0) + 1
        for (r, c), n in counts.items():
            assert grid[r, c, 0] == float(n)

    def test_adjoint_identity(self, rng):
        data = rng.standard_normal((14, 14, 3))
        fmap = FeatureMap(data)
        roi = box_from_center(7, 7, 9, 6, 1.1)
        res = rotated_roi_pool(fmap, roi, 4)
        g = rng.standard_normal((4, 4, 3))
        lhs = float(np.sum(res.output * g))
        rhs = float(np.sum(data * rotated_roi_pool_backward(g, res, (14, 14, 3))))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        # distinct values spaced far apart: no argmax switches within +-h
        base = rng.permutation(144).astype(float).reshape(12, 12, 1) / 7.0
        roi = box_from_center(6.2, 5.8, 7.5, 5.0, 0.55)
        weights = rng.standard_normal((3, 3, 1))
        res = rotated_roi_pool(FeatureMap(base), roi, 3)
        grad = rotated_roi_pool_backward(weights, res, (12, 12, 1))
        h = 1e-3
        for r in range(12):
            for c in range(12):
                plus = base.copy()
                plus[r, c, 0] += h
                minus = base.copy()
                minus[r, c, 0] -= h
                jp = np.sum(rotated_roi_pool(FeatureMap(plus), roi, 3).output * weights)
                jm = np.sum(rotated_roi_pool(FeatureMap(minus), roi, 3).output * weights)
                fd = (jp - jm) / (2 * h)
                assert abs(fd - grad[r, c, 0]) <= 1e-4 * max(1.0, abs(grad[r, c, 0]))

    def test_shape_mismatch_rejected(self, rng):
        fmap = FeatureMap(rng.standard_normal((8, 8, 1)))
        res = rotated_roi_pool(fmap, np.array([0, 0, 4, 4, 0.0]), 2)
        with pytest.raises(ValueError):
            rotated_roi_pool_backward(np.zeros((3, 3, 1)), res, (8, 8, 1))
        with pytest.raises(ValueError):
            rotated_roi_pool_backward(np.zeros((2, 2, 1)), res, (8, 8, 2))


class TestRotationConsistency:
    @pytest.mark.parametrize("theta", [0.3, 0.6, 0.9, 1.2])
    def test_rotated_pool_tracks_axis_pool(self, theta):
        # pooling the rotated roi over nearest-neighbor-rotated content should
        # reproduce the axis-aligned pooling for most cells, within a coarse
        # tolerance of 10% of the surface range
        rng = np.random.default_rng(7)
        H = W = 64
        ys, xs = np.mgrid[0:H, 0:W].astype(float)
        surface = np.zeros((H, W, 1))
        for _ in range(4):
            fx, fy = rng.uniform(0.02, 0.09, 2)
            ph = rng.uniform(0, 2 * np.pi, 2)
            surface[:, :, 0] += np.sin(fx * xs + ph[0]) + np.cos(fy * ys + ph[1])
        tol = 0.1 * (surface.max() - surface.min())
        cx = cy = 32.0
        roi0 = box_from_center(cx, cy, 32, 16, 0.0)
        roi_t = box_from_center(cx, cy, 32, 16, theta)
        ct, st = math.cos(theta), math.sin(theta)
        sx = np.rint(cx + ct * (xs - cx) + st * (ys - cy)).astype(int)
        sy = np.rint(cy - st * (xs - cx) + ct * (ys - cy)).astype(int)
        ok = (sx >= 0) & (sx < W) & (sy >= 0) & (sy < H)
        rotated = np.zeros_like(surface)
        rotated[ys[ok].astype(int), xs[ok].astype(int), 0] = surface[sy[ok], sx[ok], 0]
        p0 = rotated_roi_pool(FeatureMap(surface), roi0, 4).output
        pt = rotated_roi_pool(FeatureMap(rotated), roi_t, 4).output
        assert (np.abs(p0 - pt) <= tol).mean() >= 0.9


class TestFeatureMapIO:
    def test_round_trip(self, tmp_path, rng):
        data = rng.standard_normal((5, 7, 3)).astype(np.float32).astype(np.float64)
        path = tmp_path / "fmap.bin"
        save_feature_map(path, FeatureMap(data, spatial_stride=2.0))
        loaded = load_feature_map(path, spatial_stride=2.0)
        assert loaded.data.shape == (5, 7, 3)
        assert np.array_equal(loaded.data, data)
        assert path.stat().st_size == 16 + 5 * 7 * 3 * 4

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"JUNK" + b"\x00" * 20)
        with pytest.raises(ValueError, match="magic"):
            load_feature_map(path)

    def test_truncated(self, tmp_path, rng):
        path = tmp_path / "trunc.bin"
        save_feature_map(path, FeatureMap(rng.standard_normal((4, 4, 1))))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            load_feature_map(path)
