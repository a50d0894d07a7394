"""Stacked confidence map and proposal extraction.

Surviving regions vote their per-region weight onto every pixel of
their base-resolution footprint. The default weight is 1/(1+variation)
so more stable regions count more; uniform weighting is available for
comparison. Accumulation happens in a canonical region order so any
permutation of the input yields a bit-identical map. After dividing by
the max, pixels at or above tau are grouped into 4-connected
components; each becomes a proposal scored by its mean map value, with
support = the peak number of stacked regions inside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .boxes import Box
from .mser import FOUR_CONN, ExtremalRegion


@dataclass(frozen=True)
class ConfidenceMap:
    values: np.ndarray  # float64 H x W
    counts: np.ndarray  # int32 H x W, stacked-region depth
    normalized: bool = False

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class Proposal:
    bbox: Box
    score: float
    support: int


def stability_weight(region: ExtremalRegion) -> float:
    return 1.0 / (1.0 + region.variation)


def _canonical_order(regions, weights):
    def key(pair):
        r, w = pair
        return (
            r.scale_level,
            r.level,
            r.polarity,
            r.bbox.x,
            r.bbox.y,
            r.bbox.w,
            r.bbox.h,
            r.area,
            w,
            r.runs,
        )

    return sorted(zip(regions, weights), key=key)


def accumulate(regions: list[ExtremalRegion], weights, dims: tuple[int, int]) -> ConfidenceMap:
    """Sum region weights over their footprints on a (width, height) canvas.

    weights may be None (stability weights), a scalar, or one value per
    region. A footprint outside dims is an error.
    """
    width, height = dims
    if weights is None:
        weights = [stability_weight(r) for r in regions]
    elif np.ndim(weights) == 0:
        weights = [float(weights)] * len(regions)
    else:
        weights = [float(w) for w in weights]
    if len(weights) != len(regions):
        raise ValueError("need exactly one weight per region")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")

    values = np.zeros((height, width), dtype=np.float64)
    counts = np.zeros((height, width), dtype=np.int32)
    for region, w in _canonical_order(regions, weights):
        b = region.bbox
        if b.x < 0 or b.y < 0 or b.x + b.w > width or b.y + b.h > height:
            raise ValueError(f"region footprint {tuple(b)} outside map dims {dims}")
        region.paint(values, w)
        region.paint(counts, 1)
    return ConfidenceMap(values=values, counts=counts, normalized=False)


def normalize(cmap: ConfidenceMap) -> ConfidenceMap:
    """Divide by the max value; an all-zero map passes through."""
    peak = float(cmap.values.max()) if cmap.values.size else 0.0
    if peak == 0.0:
        return ConfidenceMap(values=cmap.values.copy(), counts=cmap.counts.copy(), normalized=True)
    return ConfidenceMap(values=cmap.values / peak, counts=cmap.counts.copy(), normalized=True)


def extract_proposals(cmap: ConfidenceMap, tau: float = 0.5) -> list[Proposal]:
    """Threshold the normalized map and emit one proposal per component."""
    if not cmap.normalized:
        raise ValueError("extract_proposals needs a normalized map")
    if not 0 < tau <= 1:
        raise ValueError("tau must be in (0, 1]")
    hot = cmap.values >= tau
    labels, n = ndimage.label(hot, structure=FOUR_CONN)
    if n == 0:
        return []
    flat = labels.ravel()
    sums = np.bincount(flat, weights=cmap.values.ravel(), minlength=n + 1)
    sizes = np.bincount(flat, minlength=n + 1)
    slices = ndimage.find_objects(labels)
    support = ndimage.maximum(cmap.counts, labels=labels, index=np.arange(1, n + 1))
    proposals = []
    for i, sl in enumerate(slices, start=1):
        ys, xs = sl
        bbox = Box(int(xs.start), int(ys.start), int(xs.stop - xs.start), int(ys.stop - ys.start))
        score = float(sums[i] / sizes[i])
        proposals.append(Proposal(bbox=bbox, score=score, support=int(np.atleast_1d(support)[i - 1])))
    proposals.sort(key=lambda p: (-p.score, p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h))
    return proposals


def map_to_u8(cmap: ConfidenceMap) -> np.ndarray:
    """round(255 * value) rendering for PGM export."""
    values = cmap.values
    peak = float(values.max()) if values.size else 0.0
    if not cmap.normalized and peak > 0:
        values = values / peak
    return np.floor(values * 255.0 + 0.5).astype(np.uint8)
