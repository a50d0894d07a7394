import numpy as np
import pytest

from snowprop.boxes import box_iou
from snowprop.imaging import build_pyramid
from snowprop.mrmser import MrMserParams, detect_mr_mser, scale_region_to_base
from snowprop.mser import MserParams, detect_mser

PARAMS = MrMserParams(
    mser=MserParams(delta=2, min_area=6, max_area_fraction=0.3, polarity="dark-on-bright"),
    dedup_iou=0.7,
)


def merge_by_hand(per_level_regions, dedup_iou):
    """The stated merge rule, applied independently of detect_mr_mser."""
    candidates = []
    for k, regions in enumerate(per_level_regions):
        for r in regions:
            candidates.append(scale_region_to_base(r, k))
    candidates.sort(key=lambda r: (r.scale_level, r.variation, r.level, r.bbox.x, r.bbox.y))
    kept = []
    for r in candidates:
        if all(s.scale_level == r.scale_level or box_iou(r.bbox, s.bbox) < dedup_iou for s in kept):
            kept.append(r)
    return kept


class TestWorkedExamples:
    def test_uniform_pyramid_empty(self):
        pyr = build_pyramid(np.full((24, 24), 180, np.uint8), 3)
        assert detect_mr_mser(pyr, PARAMS) == []

    def test_single_block_seen_at_two_scales_merges_to_finest(self):
        img = np.full((24, 24), 200, np.uint8)
        img[8:14, 8:14] = 10  # 6x6 block at (8,8)
        pyr = build_pyramid(img, 3)

        # Per-level oracle on hand-checked downsamples.
        assert (pyr[1][4:7, 4:7] == 10).all()
        level_regions = [detect_mser(lvl, PARAMS.mser) for lvl in pyr]
        assert [len(r) for r in level_regions] == [1, 1, 0]  # level 2 block too small
        mapped = scale_region_to_base(level_regions[1][0], 1)
        assert tuple(mapped.bbox) == (8, 8, 6, 6)
        assert box_iou(mapped.bbox, level_regions[0][0].bbox) == 1.0

        merged = detect_mr_mser(pyr, PARAMS)
        assert len(merged) == 1
        assert merged[0].scale_level == 0
        assert tuple(merged[0].bbox) == (8, 8, 6, 6)
        assert {tuple(r.bbox) for r in merge_by_hand(level_regions, 0.7)} == {(8, 8, 6, 6)}

    def test_small_block_survives_only_at_base_scale(self):
        img = np.full((24, 24), 200, np.uint8)
        img[4:7, 16:19] = 10  # 3x3: below min_area once downsampled
        img[10:22, 4:16] = 30  # 12x12: visible at every level
        pyr = build_pyramid(img, 3)
        level_regions = [detect_mser(lvl, PARAMS.mser) for lvl in pyr]
        assert len(level_regions[0]) == 2
        assert all(r.area < 6 or r.area >= 36 for r in level_regions[1])

        merged = detect_mr_mser(pyr, PARAMS)
        assert len(merged) == 2
        assert sorted(r.scale_level for r in merged) == [0, 0]
        assert {tuple(r.bbox) for r in merged} == {(16, 4, 3, 3), (4, 10, 12, 12)}
        by_hand = merge_by_hand(level_regions, 0.7)
        assert {tuple(r.bbox) for r in by_hand} == {tuple(r.bbox) for r in merged}


class TestProperties:
    def _random_pyramid(self, rng):
        img = rng.integers(0, 250, (int(rng.integers(16, 33)), int(rng.integers(16, 33)))).astype(np.uint8)
        return img, build_pyramid(img, 3)

    def test_single_level_pyramid_equals_detect_mser(self):
        rng = np.random.default_rng(21)
        img, _ = self._random_pyramid(rng)
        params = MrMserParams(mser=MserParams(delta=1, min_area=2, max_area_fraction=0.5, polarity="both"))
        single = detect_mr_mser([img], params)
        direct = detect_mser(img, params.mser)
        assert {(r.polarity, r.pixel_set()) for r in single} == {(r.polarity, r.pixel_set()) for r in direct}

    def test_outputs_within_base_bounds_and_iou_bounded(self):
        rng = np.random.default_rng(22)
        params = MrMserParams(mser=MserParams(delta=1, min_area=2, max_area_fraction=0.6, polarity="both"))
        for _ in range(10):
            img, pyr = self._random_pyramid(rng)
            merged = detect_mr_mser(pyr, params)
            h, w = img.shape
            for r in merged:
                assert 0 <= r.bbox.x and 0 <= r.bbox.y
                assert r.bbox.x + r.bbox.w <= w and r.bbox.y + r.bbox.h <= h
            for i in range(len(merged)):
                for j in range(i + 1, len(merged)):
                    if merged[i].scale_level != merged[j].scale_level:
                        assert box_iou(merged[i].bbox, merged[j].bbox) < params.dedup_iou

    def test_count_no_more_than_per_level_sum(self):
        rng = np.random.default_rng(23)
        params = MrMserParams(mser=MserParams(delta=1, min_area=2, max_area_fraction=0.6, polarity="both"))
        for _ in range(5):
            img, pyr = self._random_pyramid(rng)
            merged = detect_mr_mser(pyr, params)
            total = sum(len(detect_mser(lvl, params.mser)) for lvl in pyr)
            assert len(merged) <= total

    def test_footprint_replication(self):
        img = np.full((8, 8), 200, np.uint8)
        img[2:4, 2:5] = 5
        region = detect_mser(img, MserParams(delta=1, min_area=2, max_area_fraction=0.5, polarity="dark-on-bright"))[0]
        up = scale_region_to_base(region, 1)
        assert up.scale_level == 1
        assert up.area == region.area * 4
        assert up.pixel_set() == frozenset(
            (2 * x + dx, 2 * y + dy) for (x, y) in region.pixel_set() for dx in (0, 1) for dy in (0, 1)
        )
        assert tuple(up.bbox) == (4, 4, 6, 4)

    def test_bad_dedup_iou(self):
        with pytest.raises(ValueError):
            detect_mr_mser([np.zeros((4, 4), np.uint8)], MrMserParams(dedup_iou=0.0))
