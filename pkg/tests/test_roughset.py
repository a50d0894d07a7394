import math

import numpy as np
import pytest

from snowprop.boxes import Box
from snowprop.mser import ExtremalRegion
from snowprop.roughset import (
    approximations_at,
    curve_to_csv,
    filter_regions,
    granulate,
    object_mask,
    optimal_threshold,
    rough_entropy_curve,
    threshold_mask,
)

WORKED_4X4 = np.array(
    [[0, 0, 255, 255], [0, 0, 255, 255], [0, 255, 255, 255], [255, 255, 255, 255]], np.uint8
)
# -(e/2) * (0.5*ln(0.5) + (1/3)*ln(1/3)); the derived hand value.
WORKED_RE = -(math.e / 2) * (0.5 * math.log(0.5) + (1 / 3) * math.log(1 / 3))


def naive_curve(img, gw, gh, polarity):
    """Fully naive recomputation: per-granule pixel scans for every T."""
    h, w = img.shape
    granules = []
    for gy in range(0, h, gh):
        for gx in range(0, w, gw):
            granules.append([int(v) for v in img[gy : gy + gh, gx : gx + gw].ravel()])
    entropies = []
    for t in range(256):
        lower_obj = upper_obj = lower_bg = upper_bg = 0
        for pix in granules:
            if polarity == "dark-object":
                inside = [v <= t for v in pix]
            else:
                inside = [v > t for v in pix]
            if all(inside):
                lower_obj += 1
            if any(inside):
                upper_obj += 1
            if all(not i for i in inside):
                lower_bg += 1
            if any(not i for i in inside):
                upper_bg += 1
        r_o = 0.0 if upper_obj == 0 else 1 - lower_obj / upper_obj
        r_b = 0.0 if upper_bg == 0 else 1 - lower_bg / upper_bg
        xlnx = lambda x: 0.0 if x == 0 else x * math.log(x)
        entropies.append(-(math.e / 2) * (xlnx(r_o) + xlnx(r_b)))
    best = max(range(256), key=lambda t: (entropies[t], -t))
    return entropies, best


def make_region(x, y, w, h):
    runs = tuple((y + dy, x, x + w) for dy in range(h))
    return ExtremalRegion(level=0, area=w * h, variation=0.0, bbox=Box(x, y, w, h), polarity="dark", runs=runs)


class TestGranulate:
    def test_8x8_has_16_granules(self):
        assert granulate(np.zeros((8, 8), np.uint8)).count == 16

    def test_5x5_has_9_granules(self):
        grid = granulate(np.zeros((5, 5), np.uint8))
        assert grid.count == 9
        assert grid.mins.shape == (3, 3)

    def test_min_max_recorded(self):
        img = np.array([[0, 255], [255, 255]], np.uint8)
        grid = granulate(img)
        assert grid.mins[0, 0] == 0
        assert grid.maxs[0, 0] == 255

    def test_partial_edge_granules(self):
        img = np.array([[10, 20, 30], [40, 50, 60], [70, 80, 90]], np.uint8)
        grid = granulate(img)
        assert grid.mins.tolist() == [[10, 30], [70, 90]]
        assert grid.maxs.tolist() == [[50, 60], [80, 90]]


class TestApproximations:
    def test_worked_4x4_at_100(self):
        counts = approximations_at(granulate(WORKED_4X4), 100, "dark-object")
        assert (counts.lower_obj, counts.upper_obj, counts.lower_bg, counts.upper_bg) == (1, 2, 2, 3)

    def test_uniform_fully_crisp(self):
        counts = approximations_at(granulate(np.full((6, 6), 9, np.uint8)), 100, "dark-object")
        assert counts.lower_obj == counts.upper_obj == 9
        assert counts.lower_bg == counts.upper_bg == 0

    def test_background_empty_at_255(self):
        rng = np.random.default_rng(0)
        grid = granulate(rng.integers(0, 256, (8, 8)).astype(np.uint8))
        counts = approximations_at(grid, 255, "dark-object")
        assert counts.lower_bg == counts.upper_bg == 0

    def test_lower_within_upper_and_boundary_balance(self):
        rng = np.random.default_rng(1)
        grid = granulate(rng.integers(0, 256, (10, 12)).astype(np.uint8))
        for t in range(0, 256, 17):
            for pol in ("dark-object", "bright-object"):
                c = approximations_at(grid, t, pol)
                assert c.lower_obj <= c.upper_obj
                assert c.lower_bg <= c.upper_bg
                assert c.upper_obj + c.lower_bg == grid.count
                assert c.upper_bg + c.lower_obj == grid.count
                assert c.upper_obj - c.lower_obj == c.upper_bg - c.lower_bg


class TestEntropyCurve:
    def test_worked_values_at_100(self):
        curve = rough_entropy_curve(granulate(WORKED_4X4), "dark-object")
        assert curve.r_obj[100] == pytest.approx(0.5, abs=1e-12)
        assert curve.r_bg[100] == pytest.approx(1 / 3, abs=1e-12)
        assert curve.entropy[100] == pytest.approx(WORKED_RE, abs=1e-9)

    def test_crisp_two_level_image_zero_entropy(self):
        img = np.zeros((6, 6), np.uint8)
        img[:, 4:] = 255  # granule-aligned: every granule pure
        curve = rough_entropy_curve(granulate(img), "dark-object")
        assert (curve.entropy[0:255] == 0).all()

    def test_curve_in_unit_interval(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            img = rng.integers(0, 256, (16, 16)).astype(np.uint8)
            for pol in ("dark-object", "bright-object"):
                curve = rough_entropy_curve(granulate(img), pol)
                assert (curve.entropy >= 0).all() and (curve.entropy <= 1).all()

    def test_incremental_equals_single_threshold_recompute(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (14, 18)).astype(np.uint8)
        grid = granulate(img)
        for pol in ("dark-object", "bright-object"):
            curve = rough_entropy_curve(grid, pol)
            for t in range(256):
                c = approximations_at(grid, t, pol)
                assert (c.lower_obj, c.upper_obj, c.lower_bg, c.upper_bg) == (
                    int(curve.lower_obj[t]),
                    int(curve.upper_obj[t]),
                    int(curve.lower_bg[t]),
                    int(curve.upper_bg[t]),
                )


class TestOptimalThreshold:
    def test_flat_curve_picks_zero(self):
        img = np.zeros((6, 6), np.uint8)
        img[:, 4:] = 255
        res = optimal_threshold(rough_entropy_curve(granulate(img), "dark-object"), img)
        assert res.t_star == 0

    def test_matches_naive_oracle_on_random_images(self):
        rng = np.random.default_rng(4)
        for _ in range(12):
            img = rng.integers(0, 256, (16, 16)).astype(np.uint8)
            curve = rough_entropy_curve(granulate(img), "dark-object")
            res = optimal_threshold(curve, img)
            entropies, best = naive_curve(img, 2, 2, "dark-object")
            assert res.t_star == best
            np.testing.assert_allclose(curve.entropy, entropies, atol=1e-12)

    def test_unique_maximum(self):
        img = np.repeat(np.repeat(np.array([[50, 90], [130, 200]], np.uint8), 4, 0), 4, 1)
        img[0, 0] = 60  # one mixed granule
        curve = rough_entropy_curve(granulate(img), "dark-object")
        res = optimal_threshold(curve, img)
        assert curve.entropy[res.t_star] == curve.entropy.max()
        assert (curve.entropy[: res.t_star] < curve.entropy[res.t_star]).all()

    def test_mask_polarity(self):
        img = np.array([[10, 200], [10, 200]], np.uint8)
        assert threshold_mask(img, 100, "dark-object").tolist() == [[255, 0], [255, 0]]
        assert threshold_mask(img, 100, "bright-object").tolist() == [[0, 255], [0, 255]]

    def test_object_mask_both_unions(self):
        img = np.repeat(np.repeat(np.array([[10, 128, 240]], np.uint8), 6, 0), 4, 1)
        mask, results = object_mask(img, polarity="both")
        assert len(results) == 2
        dark = results[0].mask
        bright = results[1].mask
        assert (mask == np.maximum(dark, bright)).all()


class TestFilterRegions:
    def test_inside_kept_outside_dropped(self):
        mask = np.zeros((10, 10), np.uint8)
        mask[2:8, 2:8] = 255
        inside = make_region(3, 3, 2, 2)
        outside = make_region(0, 0, 2, 2)
        assert filter_regions([inside, outside], mask) == [inside]

    def test_fraction_threshold_worked_case(self):
        mask = np.zeros((10, 10), np.uint8)
        mask[0:10, 0:4] = 255
        region = make_region(0, 0, 10, 1)  # 4 of 10 pixels inside
        assert filter_regions([region], mask, min_object_fraction=0.5) == []
        assert filter_regions([region], mask, min_object_fraction=0.3) == [region]

    def test_subsequence_and_idempotent(self):
        rng = np.random.default_rng(5)
        mask = (rng.integers(0, 2, (20, 20)) * 255).astype(np.uint8)
        regions = [make_region(int(rng.integers(0, 15)), int(rng.integers(0, 15)), 3, 3) for _ in range(10)]
        once = filter_regions(regions, mask)
        assert [r for r in regions if r in once] == once
        assert filter_regions(once, mask) == once


def test_curve_csv(tmp_path):
    curve = rough_entropy_curve(granulate(WORKED_4X4), "dark-object")
    path = tmp_path / "curve.csv"
    curve_to_csv(curve, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "T,lower_obj,upper_obj,lower_bg,upper_bg,R_OT,R_BT,RE_T"
    assert len(lines) == 257
    assert lines[101].startswith("100,1,2,2,3,")
