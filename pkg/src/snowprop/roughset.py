"""Granular rough-set thresholding and region filtration.

The image is tiled with non-overlapping granules (default 2x2; edge
granules may be partial) which act as the elementary sets of the
indiscernibility relation. For a threshold T and dark-object polarity
the object is {pixels <= T}: a granule sits in the object's lower
approximation iff its max <= T and in the upper approximation iff its
min <= T; background approximations mirror this on {pixels > T}.
Roughness is 1 - |lower|/|upper| (0 for an empty upper approximation)
and the per-threshold rough entropy is

    RE(T) = -(e/2) * (R_obj*ln(R_obj) + R_bg*ln(R_bg)),   0*ln(0) = 0

which lives in [0, 1]. The optimal threshold is the smallest T that
maximizes RE(T); its binary mask then keeps or drops candidate regions
by the fraction of their footprint that lands on object pixels.

The full curve is computed in O(256 + granules) from cumulative
histograms of granule mins and maxs; approximations_at() recomputes a
single threshold directly from the grid and serves as the slow
cross-check.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .imaging import require_gray
from .mser import ExtremalRegion

_E = float(np.e)
_POLARITIES = ("dark-object", "bright-object")


@dataclass(frozen=True)
class GranuleGrid:
    granule_w: int
    granule_h: int
    mins: np.ndarray  # 2D uint8, one entry per granule
    maxs: np.ndarray
    image_w: int
    image_h: int

    @property
    def count(self) -> int:
        return self.mins.size


@dataclass(frozen=True)
class ApproximationCounts:
    threshold: int
    lower_obj: int
    upper_obj: int
    lower_bg: int
    upper_bg: int


@dataclass(frozen=True)
class RoughnessCurve:
    polarity: str
    lower_obj: np.ndarray  # int arrays indexed by T = 0..255
    upper_obj: np.ndarray
    lower_bg: np.ndarray
    upper_bg: np.ndarray
    r_obj: np.ndarray  # float arrays
    r_bg: np.ndarray
    entropy: np.ndarray


@dataclass(frozen=True)
class ThresholdResult:
    t_star: int
    mask: np.ndarray  # uint8, 255 = object
    curve: RoughnessCurve


def granulate(img: np.ndarray, granule_w: int = 2, granule_h: int = 2) -> GranuleGrid:
    """Tile the image into ceil(W/gw) x ceil(H/gh) granules with min/max."""
    img = require_gray(img)
    if granule_w < 1 or granule_h < 1:
        raise ValueError("granule dims must be >= 1")
    h, w = img.shape
    row_starts = np.arange(0, h, granule_h)
    col_starts = np.arange(0, w, granule_w)
    mins = np.minimum.reduceat(np.minimum.reduceat(img, row_starts, axis=0), col_starts, axis=1)
    maxs = np.maximum.reduceat(np.maximum.reduceat(img, row_starts, axis=0), col_starts, axis=1)
    return GranuleGrid(granule_w, granule_h, mins, maxs, w, h)


def approximations_at(grid: GranuleGrid, threshold: int, polarity: str = "dark-object") -> ApproximationCounts:
    """Granule counts of the four approximations at one threshold."""
    if not 0 <= threshold <= 255:
        raise ValueError("threshold must be in [0, 255]")
    if polarity not in _POLARITIES:
        raise ValueError(f"polarity must be one of {_POLARITIES}")
    if polarity == "dark-object":
        lower_obj = int(np.count_nonzero(grid.maxs <= threshold))
        upper_obj = int(np.count_nonzero(grid.mins <= threshold))
        lower_bg = int(np.count_nonzero(grid.mins > threshold))
        upper_bg = int(np.count_nonzero(grid.maxs > threshold))
    else:
        lower_obj = int(np.count_nonzero(grid.mins > threshold))
        upper_obj = int(np.count_nonzero(grid.maxs > threshold))
        lower_bg = int(np.count_nonzero(grid.maxs <= threshold))
        upper_bg = int(np.count_nonzero(grid.mins <= threshold))
    return ApproximationCounts(threshold, lower_obj, upper_obj, lower_bg, upper_bg)


def _roughness(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    r = np.zeros(256, dtype=np.float64)
    nz = upper > 0
    r[nz] = 1.0 - lower[nz] / upper[nz]
    return r


def _xlnx(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    nz = x > 0
    out[nz] = x[nz] * np.log(x[nz])
    return out


def rough_entropy_curve(grid: GranuleGrid, polarity: str = "dark-object") -> RoughnessCurve:
    """Approximation counts, roughness and rough entropy for every T."""
    if grid.count == 0:
        raise ValueError("empty granule grid")
    if polarity not in _POLARITIES:
        raise ValueError(f"polarity must be one of {_POLARITIES}")
    total = grid.count
    hist_min = np.bincount(grid.mins.ravel(), minlength=256)
    hist_max = np.bincount(grid.maxs.ravel(), minlength=256)
    # Granules with max <= T / min <= T, for T = 0..255.
    max_le = np.cumsum(hist_max)
    min_le = np.cumsum(hist_min)
    if polarity == "dark-object":
        lower_obj, upper_obj = max_le, min_le
    else:
        lower_obj, upper_obj = total - min_le, total - max_le
    lower_bg = total - upper_obj
    upper_bg = total - lower_obj
    r_obj = _roughness(lower_obj, upper_obj)
    r_bg = _roughness(lower_bg, upper_bg)
    entropy = -(_E / 2.0) * (_xlnx(r_obj) + _xlnx(r_bg))
    return RoughnessCurve(
        polarity=polarity,
        lower_obj=lower_obj.astype(np.int64),
        upper_obj=upper_obj.astype(np.int64),
        lower_bg=lower_bg.astype(np.int64),
        upper_bg=upper_bg.astype(np.int64),
        r_obj=r_obj,
        r_bg=r_bg,
        entropy=entropy,
    )


def threshold_mask(img: np.ndarray, threshold: int, polarity: str = "dark-object") -> np.ndarray:
    """Binary object mask (255 = object) from one global threshold."""
    img = require_gray(img)
    if polarity == "dark-object":
        return np.where(img <= threshold, 255, 0).astype(np.uint8)
    return np.where(img > threshold, 255, 0).astype(np.uint8)


def optimal_threshold(curve: RoughnessCurve, img: np.ndarray) -> ThresholdResult:
    """Smallest T maximizing rough entropy, plus the resulting mask."""
    t_star = int(np.argmax(curve.entropy))  # argmax returns first maximum
    mask = threshold_mask(img, t_star, curve.polarity)
    return ThresholdResult(t_star=t_star, mask=mask, curve=curve)


def object_mask(img: np.ndarray, granule_w: int = 2, granule_h: int = 2, polarity: str = "dark-object"):
    """Granulate, maximize rough entropy and threshold in one call.

    polarity 'both' runs dark-object and bright-object and unions the
    masks; the returned list carries one ThresholdResult per polarity.
    """
    grid = granulate(img, granule_w, granule_h)
    polarities = ("dark-object", "bright-object") if polarity == "both" else (polarity,)
    results = [optimal_threshold(rough_entropy_curve(grid, p), img) for p in polarities]
    mask = results[0].mask
    for r in results[1:]:
        mask = np.maximum(mask, r.mask)
    return mask, results


def filter_regions(
    regions: list[ExtremalRegion], mask: np.ndarray, min_object_fraction: float = 0.5
) -> list[ExtremalRegion]:
    """Keep regions whose footprint overlaps the object mask enough."""
    mask = require_gray(mask)
    kept = []
    for r in regions:
        if r.count_inside(mask) >= min_object_fraction * r.area:
            kept.append(r)
    return kept


def curve_to_csv(curve: RoughnessCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["T", "lower_obj", "upper_obj", "lower_bg", "upper_bg", "R_OT", "R_BT", "RE_T"])
        for t in range(256):
            writer.writerow(
                [
                    t,
                    int(curve.lower_obj[t]),
                    int(curve.upper_obj[t]),
                    int(curve.lower_bg[t]),
                    int(curve.upper_bg[t]),
                    f"{curve.r_obj[t]:.9f}",
                    f"{curve.r_bg[t]:.9f}",
                    f"{curve.entropy[t]:.9f}",
                ]
            )
