"""Score-level fusion of external detections with pipeline proposals.

Detections whose box overlaps a proposal (IoU >= overlap_iou) get a
multiplicative boost, all others are damped; anything that falls below
the score floor is dropped, and greedy NMS cleans up what remains.
Boost/damp modulation instead of hard gating keeps recall when heavy
snow suppresses proposals on true vehicles.

The on-disk Detections JSON is a list of records
  {"image_id": str, "bbox": [x, y, w, h], "score": float, "label": str}
with absolute pixel coordinates and a top-left origin; extra fields
(e.g. "source" on proposals, "support") are preserved on read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .boxes import Box, box_iou
from .confidence import Proposal


@dataclass(frozen=True)
class Detection:
    image_id: str
    bbox: Box
    score: float
    label: str = "vehicle"

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "bbox": [float(self.bbox.x), float(self.bbox.y), float(self.bbox.w), float(self.bbox.h)],
            "score": float(self.score),
            "label": self.label,
        }


@dataclass(frozen=True)
class FusionParams:
    overlap_iou: float = 0.3
    boost: float = 0.2
    damp: float = 0.5
    score_floor: float = 0.05
    nms_iou: float = 0.5

    def validate(self) -> None:
        if not 0 < self.overlap_iou <= 1:
            raise ValueError("overlap_iou must be in (0, 1]")
        if self.boost < 0:
            raise ValueError("boost must be >= 0")
        if not 0 < self.damp <= 1:
            raise ValueError("damp must be in (0, 1]")
        if self.score_floor < 0:
            raise ValueError("score_floor must be >= 0")
        if not 0 < self.nms_iou <= 1:
            raise ValueError("nms_iou must be in (0, 1]")


def _det_order(d: Detection):
    return (-d.score, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h)


def nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy NMS: keep the best remaining box, drop overlaps >= threshold."""
    remaining = sorted(dets, key=_det_order)
    kept: list[Detection] = []
    while remaining:
        best = remaining.pop(0)
        kept.append(best)
        remaining = [d for d in remaining if box_iou(best.bbox, d.bbox) < iou_threshold]
    return kept


def fuse(dets: list[Detection], props: list[Proposal], params: FusionParams | None = None) -> list[Detection]:
    """Modulate detection scores by proposal agreement, then NMS.

    All detections must carry one image_id; proposals are assumed to
    belong to the same image.
    """
    params = params or FusionParams()
    params.validate()
    if len({d.image_id for d in dets}) > 1:
        raise ValueError("fuse expects detections from a single image")
    modulated = []
    for d in dets:
        agree = any(box_iou(d.bbox, p.bbox) >= params.overlap_iou for p in props)
        score = min(1.0, d.score * (1.0 + params.boost)) if agree else d.score * params.damp
        if score < params.score_floor:
            continue
        modulated.append(Detection(image_id=d.image_id, bbox=d.bbox, score=score, label=d.label))
    return nms(modulated, params.nms_iou)


def _check_record(rec, path, idx) -> Detection:
    where = f"{path}: record {idx}"
    if not isinstance(rec, dict):
        raise ValueError(f"{where}: expected an object")
    for key in ("image_id", "bbox", "score"):
        if key not in rec:
            raise ValueError(f"{where}: missing field '{key}'")
    bbox = rec["bbox"]
    if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
        raise ValueError(f"{where}: bbox must be [x, y, w, h]")
    x, y, w, h = (float(v) for v in bbox)
    if w <= 0 or h <= 0:
        raise ValueError(f"{where}: bbox must have positive size")
    score = float(rec["score"])
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"{where}: score {score} outside [0, 1]")
    return Detection(
        image_id=str(rec["image_id"]), bbox=Box(x, y, w, h), score=score, label=str(rec.get("label", "vehicle"))
    )


def read_detections(path) -> list[Detection]:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, list):
        raise ValueError(f"{path}: top level must be a JSON array")
    return [_check_record(rec, path, i) for i, rec in enumerate(data)]


def write_detections(dets: list[Detection], path, extra: dict | None = None) -> None:
    """Serialize detections; extra maps a field name to per-record values."""
    records = [d.to_dict() for d in dets]
    if extra:
        for name, values in extra.items():
            for rec, val in zip(records, values):
                rec[name] = val
    with open(path, "w", encoding="utf-8") as f:
        json.dump(records, f, indent=2, sort_keys=True)
        f.write("\n")


def group_by_image(dets: list[Detection]) -> dict[str, list[Detection]]:
    groups: dict[str, list[Detection]] = {}
    for d in dets:
        groups.setdefault(d.image_id, []).append(d)
    return groups
