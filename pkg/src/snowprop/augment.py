"""Region augmentation: squared boxes, area expansion, patches, rotations.

Each candidate region's bbox is squared (side = max(w, h), recentered),
expanded to a set of area multipliers, resampled to a fixed square
patch with bilinear interpolation (sources outside the image clamp to
the nearest edge pixel) and rotated a configurable number of times by
angles drawn uniformly from the configured range.

Randomness is pinned to the Philox counter-based generator keyed by
(seed, region_index), so every region owns an independent substream
and two runs with one seed produce byte-identical patch sets no matter
how work is scheduled. Within a region the draw order is expansion
major, rotation minor.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .boxes import Box
from .imaging import require_gray, round_half_up, write_pgm
from .mser import ExtremalRegion


@dataclass(frozen=True)
class AugmentParams:
    expansions: tuple[float, ...] = (1.0, 1.3, 1.6)
    patch_side: int = 28
    rotations_per_patch: int = 4
    angle_range: tuple[float, float] = (-math.pi / 4, math.pi / 4)
    seed: int = 0

    def validate(self) -> None:
        if not self.expansions or any(m < 1 for m in self.expansions):
            raise ValueError("expansions must be >= 1")
        if self.patch_side < 2:
            raise ValueError("patch_side must be >= 2")
        if self.rotations_per_patch < 0:
            raise ValueError("rotations_per_patch must be >= 0")
        if self.angle_range[0] > self.angle_range[1]:
            raise ValueError("angle_range must be ordered")


@dataclass(frozen=True)
class Patch:
    box: Box
    expansion: float
    angle: float
    pixels: np.ndarray  # patch_side x patch_side uint8


@dataclass(frozen=True)
class PatchSet:
    region_index: int
    patches: tuple[Patch, ...]


def square_box(bbox: Box) -> Box:
    """Square of side max(w, h) centered on the box center.

    Corners round half-up; the result may extend past the image, which
    extraction later handles by edge clamping.
    """
    side = max(bbox.w, bbox.h)
    cx = bbox.x + bbox.w / 2.0
    cy = bbox.y + bbox.h / 2.0
    x = int(round_half_up(cx - side / 2.0))
    y = int(round_half_up(cy - side / 2.0))
    return Box(x, y, int(side), int(side))


def expand_box(box: Box, area_multiplier: float) -> Box:
    """Grow a square box's area by the multiplier, keeping its center."""
    if box.w != box.h:
        raise ValueError("expand_box expects a square box")
    if area_multiplier < 1:
        raise ValueError("area multiplier must be >= 1")
    if area_multiplier == 1.0:
        return box
    side = int(round_half_up(box.w * math.sqrt(area_multiplier)))
    cx = box.x + box.w / 2.0
    cy = box.y + box.h / 2.0
    x = int(round_half_up(cx - side / 2.0))
    y = int(round_half_up(cy - side / 2.0))
    return Box(x, y, side, side)


def _bilinear(img: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample img at float coords, clamping sources to the edge pixels."""
    h, w = img.shape
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    val = top * (1 - fy) + bot * fy
    return np.clip(round_half_up(val), 0, 255).astype(np.uint8)


def extract_patch(img: np.ndarray, box: Box, side: int = 28) -> np.ndarray:
    """Bilinear resample of the box contents to a side x side patch."""
    img = require_gray(img).astype(np.float64)
    if side < 2:
        raise ValueError("side must be >= 2")
    if box.w <= 0 or box.h <= 0:
        raise ValueError("box must have positive area")
    # Pixel-center mapping: output center j+0.5 lands at x + (j+0.5)*w/side.
    sx = box.x + (np.arange(side) + 0.5) * (box.w / side) - 0.5
    sy = box.y + (np.arange(side) + 0.5) * (box.h / side) - 0.5
    return _bilinear(img, sx[None, :].repeat(side, 0), sy[:, None].repeat(side, 1))


def rotate_patch(patch: np.ndarray, angle: float) -> np.ndarray:
    """Rotate a square patch about its center, bilinear, edge clamped."""
    patch = require_gray(patch)
    if patch.shape[0] != patch.shape[1]:
        raise ValueError("rotate_patch expects a square patch")
    if angle == 0.0:
        return patch.copy()
    side = patch.shape[0]
    c = (side - 1) / 2.0
    jj, ii = np.meshgrid(np.arange(side) - c, np.arange(side) - c)
    cos_a = math.cos(-angle)
    sin_a = math.sin(-angle)
    sx = c + jj * cos_a - ii * sin_a
    sy = c + jj * sin_a + ii * cos_a
    return _bilinear(patch.astype(np.float64), sx, sy)


def region_rng(seed: int, region_index: int) -> np.random.Generator:
    """Philox substream for one region; independent of all others."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), region_index]))


def augment_region(
    img: np.ndarray, region: ExtremalRegion, params: AugmentParams | None = None, region_index: int = 0
) -> PatchSet:
    """Full augmentation of one region: expansions x (1 + rotations)."""
    params = params or AugmentParams()
    params.validate()
    rng = region_rng(params.seed, region_index)
    lo, hi = params.angle_range
    base = square_box(region.bbox)
    patches = []
    for mult in params.expansions:
        box = expand_box(base, mult)
        straight = extract_patch(img, box, params.patch_side)
        patches.append(Patch(box=box, expansion=mult, angle=0.0, pixels=straight))
        for _ in range(params.rotations_per_patch):
            angle = float(rng.uniform(lo, hi))
            patches.append(Patch(box=box, expansion=mult, angle=angle, pixels=rotate_patch(straight, angle)))
    return PatchSet(region_index=region_index, patches=tuple(patches))


def expanded_footprint_box(region: ExtremalRegion, params: AugmentParams, width: int, height: int) -> Box:
    """Largest expanded square of a region, clipped to the image."""
    box = expand_box(square_box(region.bbox), max(params.expansions))
    x0 = max(0, int(box.x))
    y0 = max(0, int(box.y))
    x1 = min(width, int(box.x + box.w))
    y1 = min(height, int(box.y + box.h))
    return Box(x0, y0, max(1, x1 - x0), max(1, y1 - y0))


def export_patches(patch_sets: list[PatchSet], out_dir, image_stem: str) -> str:
    """Write every patch as PGM plus a JSON manifest; returns manifest path.

    Files are named {image}_{region}_{expansion}_{rot}.pgm; rot 0 is the
    unrotated patch.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    for ps in patch_sets:
        rot = 0
        last_expansion = None
        for p in ps.patches:
            if p.expansion != last_expansion:
                rot = 0
                last_expansion = p.expansion
            name = f"{image_stem}_{ps.region_index}_{p.expansion:g}_{rot}.pgm"
            write_pgm(p.pixels, os.path.join(out_dir, name))
            manifest.append(
                {
                    "file": name,
                    "region": ps.region_index,
                    "expansion": p.expansion,
                    "rotation_index": rot,
                    "angle": p.angle,
                    "box": [p.box.x, p.box.y, p.box.w, p.box.h],
                }
            )
            rot += 1
    manifest_path = os.path.join(out_dir, f"{image_stem}_patches.json")
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest_path
