"""Detection metrics: greedy IoU matching, PR curves, mAP50, mAP50-95.

Matching is the standard greedy protocol: detections in descending
score order each claim the unmatched ground-truth box of highest IoU
at or above the threshold (ties to the lower GT index). Average
precision uses the COCO flavor: precision is interpolated as the
maximum at-or-right of each recall and averaged over the 101 recall
points 0.00, 0.01, ..., 1.00. mAP50-95 averages AP over the ten IoU
thresholds 0.50:0.05:0.95.

Annotations come from YOLO sidecar text files (class cx cy w h,
normalized, needing image dims) or a COCO-style JSON.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

from .boxes import Box, box_iou
from .fusion import Detection, group_by_image

iou = box_iou

IOU_RANGE = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = tuple(i / 100.0 for i in range(101))


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    boxes: tuple[Box, ...]
    width: int = 0
    height: int = 0


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    det_matched: tuple[bool, ...]  # per detection, in descending-score order


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    map50: float
    map50_95: float
    counts: dict
    pr_curves: dict  # iou threshold -> list of (recall, precision)
    degenerate: bool = False
    operating_point: str = "fixed:0.25"
    per_iou_ap: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "map50": self.map50,
            "map50_95": self.map50_95,
            "counts": self.counts,
            "degenerate": self.degenerate,
            "operating_point": self.operating_point,
            "per_iou_ap": {f"{t:.2f}": ap for t, ap in sorted(self.per_iou_ap.items())},
        }


def load_annotations(path, format: str, dims: tuple[int, int] | None = None) -> list[GroundTruth]:
    """Read ground truth; returns one GroundTruth per annotated image.

    yolo-txt: one file per image ('class cx cy w h', normalized); dims
    is required and the image_id is the file stem. coco-json: a single
    file covering many images.
    """
    if format == "yolo-txt":
        if dims is None:
            raise ValueError("yolo-txt annotations need image dims")
        return [_load_yolo(path, dims)]
    if format == "coco-json":
        return _load_coco(path)
    raise ValueError(f"unknown annotation format '{format}'")


def _load_yolo(path, dims: tuple[int, int]) -> GroundTruth:
    width, height = dims
    boxes = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 'class cx cy w h'")
            try:
                cx, cy, w, h = (float(p) for p in parts[1:])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed field") from exc
            for v in (cx, cy, w, h):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{path}:{lineno}: normalized value outside [0,1]")
            boxes.append(Box((cx - w / 2) * width, (cy - h / 2) * height, w * width, h * height))
    stem = os.path.splitext(os.path.basename(path))[0]
    return GroundTruth(image_id=stem, boxes=tuple(boxes), width=width, height=height)


def _load_coco(path) -> list[GroundTruth]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict) or "images" not in data or "annotations" not in data:
        raise ValueError(f"{path}: not a COCO-style annotation file")
    images = {}
    for im in data["images"]:
        stem = os.path.splitext(str(im.get("file_name", im["id"])))[0]
        images[im["id"]] = {
            "image_id": stem,
            "boxes": [],
            "width": int(im.get("width", 0)),
            "height": int(im.get("height", 0)),
        }
    for ann in data["annotations"]:
        img = images.get(ann["image_id"])
        if img is None:
            raise ValueError(f"{path}: annotation references unknown image {ann['image_id']}")
        x, y, w, h = (float(v) for v in ann["bbox"])
        img["boxes"].append(Box(x, y, w, h))
    return [
        GroundTruth(image_id=v["image_id"], boxes=tuple(v["boxes"]), width=v["width"], height=v["height"])
        for v in images.values()
    ]


def match_detections(dets: list[Detection], gt: GroundTruth, iou_threshold: float) -> MatchResult:
    """Greedy one-to-one matching at a single IoU threshold."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = [False] * len(gt.boxes)
    flags = []
    for i in order:
        best_iou = 0.0
        best_j = -1
        for j, g in enumerate(gt.boxes):
            if taken[j]:
                continue
            ov = box_iou(dets[i].bbox, g)
            if ov >= iou_threshold and ov > best_iou:
                best_iou = ov
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    tp = sum(flags)
    return MatchResult(tp=tp, fp=len(flags) - tp, fn=len(gt.boxes) - tp, det_matched=tuple(flags))


def _global_flags(dets: list[Detection], gts: dict[str, GroundTruth], iou_threshold: float):
    """(score, is_tp) for every detection, sorted by descending score."""
    scored = []
    for image_id, group in sorted(group_by_image(dets).items()):
        gt = gts.get(image_id, GroundTruth(image_id=image_id, boxes=()))
        result = match_detections(group, gt, iou_threshold)
        order = sorted(range(len(group)), key=lambda i: (-group[i].score, i))
        for rank, i in enumerate(order):
            scored.append((group[i].score, image_id, i, result.det_matched[rank]))
    scored.sort(key=lambda t: (-t[0], t[1], t[2]))
    return [(s, flag) for s, _, _, flag in scored]


def _pr_points(flags, total_gt: int):
    points = []
    tp = fp = 0
    for _, matched in flags:
        if matched:
            tp += 1
        else:
            fp += 1
        recall = tp / total_gt if total_gt else 0.0
        points.append((recall, tp / (tp + fp)))
    return points


def _ap_from_points(points) -> float:
    if not points:
        return 0.0
    total = 0.0
    for r in RECALL_POINTS:
        best = 0.0
        for recall, precision in points:
            if recall >= r and precision > best:
                best = precision
        total += best
    return total / len(RECALL_POINTS)


def average_precision(dets: list[Detection], gts: dict[str, GroundTruth], iou_threshold: float) -> float:
    """COCO 101-point interpolated AP at one IoU threshold."""
    total_gt = sum(len(g.boxes) for g in gts.values())
    if total_gt == 0 or not dets:
        return 0.0
    flags = _global_flags(dets, gts, iou_threshold)
    return _ap_from_points(_pr_points(flags, total_gt))


def map_range(dets: list[Detection], gts: dict[str, GroundTruth]) -> tuple[float, float]:
    """(mAP50, mAP50-95) over the COCO IoU threshold ladder."""
    aps = [average_precision(dets, gts, t) for t in IOU_RANGE]
    return aps[0], sum(aps) / len(aps)


def _counts_at(dets, gts, score_threshold: float):
    tp = fp = fn = 0
    images = set(gts) | {d.image_id for d in dets}
    grouped = group_by_image([d for d in dets if d.score >= score_threshold])
    for image_id in sorted(images):
        gt = gts.get(image_id, GroundTruth(image_id=image_id, boxes=()))
        result = match_detections(grouped.get(image_id, []), gt, 0.5)
        tp += result.tp
        fp += result.fp
        fn += result.fn
    return tp, fp, fn


def _best_f1_threshold(dets, gts) -> float:
    """Largest score threshold attaining the maximum F1 at IoU 0.5."""
    total_gt = sum(len(g.boxes) for g in gts.values())
    flags = _global_flags(dets, gts, 0.5)
    best_f1 = -1.0
    best_t = 0.0
    tp = fp = 0
    for score, matched in flags:
        if matched:
            tp += 1
        else:
            fp += 1
        fn = total_gt - tp
        f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
        if f1 > best_f1:
            best_f1 = f1
            best_t = score
    return best_t


def report(
    dets: list[Detection],
    gts: dict[str, GroundTruth],
    score_threshold: float = 0.25,
    operating_point: str | None = None,
) -> MetricsReport:
    """The full metric suite at one operating point.

    operating_point is 'fixed:<t>' or 'best-f1'; when omitted the
    score_threshold argument is used. Precision/recall come from the
    IoU-0.5 matching of detections above the operating threshold; the
    mAP columns always use the unthresholded set. With neither ground
    truth nor detections, precision and recall report 1.0 and the
    degenerate flag is set.
    """
    op = operating_point or f"fixed:{score_threshold:g}"
    if op == "best-f1":
        threshold = _best_f1_threshold(dets, gts) if dets else 0.0
    elif op.startswith("fixed:"):
        threshold = float(op.split(":", 1)[1])
    else:
        raise ValueError(f"bad operating point '{op}' (want 'fixed:<t>' or 'best-f1')")

    tp, fp, fn = _counts_at(dets, gts, threshold)
    # Vacuous ratios report 1.0 and raise the degenerate flag so batch
    # jobs never divide by zero yet the condition stays visible.
    degenerate = (tp + fp == 0) or (tp + fn == 0)
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 1.0 if tp + fn == 0 else tp / (tp + fn)

    total_gt = sum(len(g.boxes) for g in gts.values())
    per_iou = {}
    curves = {}
    for t in IOU_RANGE:
        if total_gt == 0 or not dets:
            per_iou[t] = 0.0
            curves[t] = []
            continue
        points = _pr_points(_global_flags(dets, gts, t), total_gt)
        per_iou[t] = _ap_from_points(points)
        curves[t] = points
    map50 = per_iou[0.5]
    map50_95 = sum(per_iou.values()) / len(IOU_RANGE)

    return MetricsReport(
        precision=precision,
        recall=recall,
        map50=map50,
        map50_95=map50_95,
        counts={"tp": tp, "fp": fp, "fn": fn, "threshold": threshold},
        pr_curves=curves,
        degenerate=degenerate,
        operating_point=op,
        per_iou_ap=per_iou,
    )


def write_report_json(rep: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(rep.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def write_report_csv(rep: MetricsReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["precision", "recall", "map50", "map50_95", "tp", "fp", "fn", "degenerate"])
        writer.writerow(
            [
                f"{rep.precision:.6f}",
                f"{rep.recall:.6f}",
                f"{rep.map50:.6f}",
                f"{rep.map50_95:.6f}",
                rep.counts["tp"],
                rep.counts["fp"],
                rep.counts["fn"],
                int(rep.degenerate),
            ]
        )


def write_pr_csv(rep: MetricsReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["iou_threshold", "recall", "precision"])
        for t in IOU_RANGE:
            for recall, precision in rep.pr_curves.get(t, []):
                writer.writerow([f"{t:.2f}", f"{recall:.6f}", f"{precision:.6f}"])


def format_table(rows: list[tuple[str, MetricsReport]]) -> str:
    """Model accuracy table in the conventional column order."""
    lines = [f"{'Model':<24} {'Precision':>10} {'Recall':>10} {'mAP50':>10} {'mAP50-95':>10}"]
    for name, rep in rows:
        flag = " (degenerate)" if rep.degenerate else ""
        lines.append(
            f"{name:<24} {rep.precision:>9.1%} {rep.recall:>9.1%} {rep.map50:>9.1%} {rep.map50_95:>9.1%}{flag}"
        )
    return "\n".join(lines)
