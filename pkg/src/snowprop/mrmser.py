"""Multiresolution MSER: detect per pyramid level, merge at base resolution.

Regions found on coarser levels are mapped back to the base frame by
scaling boxes with map_box_to_base and replicating each coarse pixel
into a 2^k x 2^k block. Regions from different levels whose base-frame
bboxes overlap at or above dedup_iou are merged, keeping the finest
scale (then the lower variation). Same-level pairs are never merged:
with a single-level pyramid the output is exactly detect_mser's.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .boxes import box_iou, map_box_to_base
from .mser import ExtremalRegion, MserParams, detect_mser, region_sort_key


@dataclass(frozen=True)
class MrMserParams:
    mser: MserParams = field(default_factory=MserParams)
    dedup_iou: float = 0.7

    def validate(self) -> None:
        self.mser.validate()
        if not 0 < self.dedup_iou <= 1:
            raise ValueError("dedup_iou must be in (0, 1]")


def scale_region_to_base(region: ExtremalRegion, k: int) -> ExtremalRegion:
    """Rewrite a level-k region in base-resolution coordinates."""
    if k == 0:
        return region
    s = 1 << k
    runs = []
    for y, x0, x1 in region.runs:
        for dy in range(s):
            runs.append((y * s + dy, x0 * s, x1 * s))
    runs.sort()
    return ExtremalRegion(
        level=region.level,
        area=region.area * s * s,
        variation=region.variation,
        bbox=map_box_to_base(region.bbox, k),
        polarity=region.polarity,
        runs=tuple(runs),
        scale_level=k,
    )


def detect_mr_mser(pyramid: list, params: MrMserParams | None = None) -> list[ExtremalRegion]:
    """Run detect_mser on every pyramid level and merge at base resolution."""
    params = params or MrMserParams()
    params.validate()
    candidates: list[ExtremalRegion] = []
    for k, img in enumerate(pyramid):
        for r in detect_mser(img, params.mser, scale_level=k):
            candidates.append(scale_region_to_base(r, k))

    # Finest scale first, most stable first within a scale.
    candidates.sort(key=lambda r: (r.scale_level, r.variation) + region_sort_key(r))
    kept: list[ExtremalRegion] = []
    for r in candidates:
        if any(
            s.scale_level != r.scale_level and box_iou(r.bbox, s.bbox) >= params.dedup_iou
            for s in kept
        ):
            continue
        kept.append(r)
    kept.sort(key=lambda r: (r.scale_level,) + region_sort_key(r))
    return kept
