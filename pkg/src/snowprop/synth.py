"""Synthetic snowy-scene generator with exact ground truth.

Paints dark vehicle rectangles on a bright noisy background. Optional
partial occlusion overwrites the top fraction of each vehicle with the
background level before noise, mimicking snow cover; the ground-truth
box still bounds the full painted rectangle. Placements are rejection
sampled to stay disjoint (with a 2 px separation so neighbors never
fuse into one component). Everything derives from Philox streams keyed
by (seed, image_index), so a dataset is reproducible byte for byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .boxes import Box
from .imaging import write_pgm


@dataclass(frozen=True)
class SceneParams:
    width: int = 1024
    height: int = 768
    vehicles: int = 10
    min_size: int = 12
    max_size: int = 40
    vehicle_min: int = 20
    vehicle_max: int = 60
    bg_min: int = 200
    bg_max: int = 240
    noise_sigma: float = 8.0
    occlusion: float = 0.0

    def validate(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ValueError("scene must be at least 8x8")
        if self.vehicles < 0:
            raise ValueError("vehicle count must be >= 0")
        if not 1 <= self.min_size <= self.max_size:
            raise ValueError("bad size range")
        if not 0 <= self.occlusion < 1:
            raise ValueError("occlusion must be in [0, 1)")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")


def scene_rng(seed: int, image_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), image_index]))


def make_scene(params: SceneParams, rng: np.random.Generator) -> tuple[np.ndarray, list[Box]]:
    """One scene image plus its ground-truth boxes."""
    params.validate()
    bg_level = int(rng.integers(params.bg_min, params.bg_max + 1))
    canvas = np.full((params.height, params.width), float(bg_level))
    boxes: list[Box] = []
    attempts = 0
    margin = 2
    while len(boxes) < params.vehicles and attempts < 200 * max(1, params.vehicles):
        attempts += 1
        w = int(rng.integers(params.min_size, params.max_size + 1))
        h = int(rng.integers(params.min_size, params.max_size + 1))
        if w >= params.width - 2 or h >= params.height - 2:
            continue
        x = int(rng.integers(1, params.width - w))
        y = int(rng.integers(1, params.height - h))
        candidate = Box(x, y, w, h)
        clear = all(
            not (
                candidate.x - margin < b.x2 and b.x - margin < candidate.x2
                and candidate.y - margin < b.y2 and b.y - margin < candidate.y2
            )
            for b in boxes
        )
        if not clear:
            continue
        level = int(rng.integers(params.vehicle_min, params.vehicle_max + 1))
        canvas[y : y + h, x : x + w] = level
        if params.occlusion > 0:
            hidden = int(round(h * params.occlusion))
            if hidden:
                canvas[y : y + hidden, x : x + w] = bg_level
        boxes.append(candidate)
    if len(boxes) < params.vehicles:
        raise RuntimeError("could not place all vehicles; scene too crowded")
    if params.noise_sigma > 0:
        canvas = canvas + rng.normal(0.0, params.noise_sigma, canvas.shape)
    img = np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8)
    return img, boxes


def write_yolo_labels(boxes: list[Box], dims: tuple[int, int], path) -> None:
    width, height = dims
    lines = []
    for b in boxes:
        cx = (b.x + b.w / 2) / width
        cy = (b.y + b.h / 2) / height
        lines.append(f"0 {cx:.6f} {cy:.6f} {b.w / width:.6f} {b.h / height:.6f}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines))
        if lines:
            f.write("\n")


def generate_dataset(out_dir, num_images: int, params: SceneParams, seed: int) -> list[str]:
    """Write images/scene_NNNN.pgm and labels/scene_NNNN.txt; returns stems."""
    images_dir = os.path.join(out_dir, "images")
    labels_dir = os.path.join(out_dir, "labels")
    os.makedirs(images_dir, exist_ok=True)
    os.makedirs(labels_dir, exist_ok=True)
    stems = []
    for i in range(num_images):
        img, boxes = make_scene(params, scene_rng(seed, i))
        stem = f"scene_{i:04d}"
        write_pgm(img, os.path.join(images_dir, stem + ".pgm"))
        write_yolo_labels(boxes, (params.width, params.height), os.path.join(labels_dir, stem + ".txt"))
        stems.append(stem)
    return stems
