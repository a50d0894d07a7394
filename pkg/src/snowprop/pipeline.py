"""End-to-end orchestration: propose, fuse, evaluate.

Per image the propose path runs pyramid -> multiresolution MSER ->
rough-set filtration -> confidence stacking -> proposal extraction.
Images are independent, so batches fan out over a process pool; all
written artifacts depend only on the config and seed (timings and
stage counters go to the log, never into output files).
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import augment as aug
from . import confidence as conf
from . import evaluate as ev
from . import fusion as fus
from . import mrmser, roughset
from .config import PipelineConfig
from .imaging import build_pyramid, load_image, write_pgm
from .mser import ExtremalRegion, dump_regions

log = logging.getLogger("snowprop")


@dataclass
class ProposeResult:
    image_id: str
    proposals: list = field(default_factory=list)
    region_count: int = 0
    filtered_count: int = 0
    thresholds: dict = field(default_factory=dict)
    error: str = ""
    timings: dict = field(default_factory=dict)
    width: int = 0
    height: int = 0


def _box_region(box, scale_level: int = 0) -> ExtremalRegion:
    """A rectangle footprint dressed as a region, for box accumulation."""
    runs = tuple((int(box.y) + dy, int(box.x), int(box.x + box.w)) for dy in range(int(box.h)))
    return ExtremalRegion(
        level=0, area=int(box.w * box.h), variation=0.0, bbox=box, polarity="dark",
        runs=runs, scale_level=scale_level,
    )


def _accumulate_regions(regions, cfg: PipelineConfig, dims):
    width, height = dims
    if cfg["confidence.weighting"] == "uniform":
        weights = [1.0] * len(regions)
    else:
        weights = [conf.stability_weight(r) for r in regions]
    if cfg["confidence.use_expanded"]:
        params = cfg.augment_params()
        footprints = [_box_region(aug.expanded_footprint_box(r, params, width, height), r.scale_level) for r in regions]
    else:
        footprints = regions
    return conf.accumulate(footprints, weights, dims)


def propose_image(img: np.ndarray, cfg: PipelineConfig) -> tuple[list, dict]:
    """Proposals for one image plus debug intermediates."""
    height, width = img.shape
    dims = (width, height)
    t0 = time.perf_counter()
    pyramid = build_pyramid(img, cfg["pyramid.levels"], cfg["pyramid.decimate"])
    regions = mrmser.detect_mr_mser(pyramid, cfg.mrmser_params())
    t1 = time.perf_counter()

    debug: dict = {"regions": regions}
    if cfg["roughset.input"] == "confidence":
        raw_map = conf.normalize(_accumulate_regions(regions, cfg, dims))
        rst_input = conf.map_to_u8(raw_map)
        rst_polarity = "bright-object"
    else:
        rst_input = img
        rst_polarity = cfg["roughset.polarity"]
    mask, rst = roughset.object_mask(
        rst_input, cfg["roughset.granule_w"], cfg["roughset.granule_h"], rst_polarity
    )
    # A flat entropy curve means the granulation is crisp everywhere: the
    # threshold carries no evidence, so filtration would only destroy
    # recall. Mask with the informative polarities; pass through when
    # there are none.
    informative = [r for r in rst if float(r.curve.entropy.max()) > 0.0]
    if informative:
        mask = informative[0].mask
        for r in informative[1:]:
            mask = np.maximum(mask, r.mask)
        filtered = roughset.filter_regions(regions, mask, cfg["roughset.min_object_fraction"])
    else:
        mask = np.full(img.shape, 255, dtype=np.uint8)
        filtered = regions
    t2 = time.perf_counter()

    cmap = conf.normalize(_accumulate_regions(filtered, cfg, dims))
    proposals = conf.extract_proposals(cmap, cfg["confidence.tau"])
    cap = cfg["confidence.max_proposals"]
    if cap > 0:
        proposals = proposals[:cap]
    t3 = time.perf_counter()

    debug.update(
        mask=mask,
        rst_results=rst,
        filtered=filtered,
        cmap=cmap,
        timings={"mser": t1 - t0, "roughset": t2 - t1, "confidence": t3 - t2},
    )
    return proposals, debug


def _propose_worker(args):
    path, cfg_values, debug_dir, patches_dir = args
    cfg = PipelineConfig(cfg_values)
    stem = os.path.splitext(os.path.basename(path))[0]
    res = ProposeResult(image_id=stem)
    try:
        img = load_image(path)
        res.height, res.width = img.shape
        proposals, debug = propose_image(img, cfg)
        res.proposals = proposals
        res.region_count = len(debug["regions"])
        res.filtered_count = len(debug["filtered"])
        res.thresholds = {r.curve.polarity: r.t_star for r in debug["rst_results"]}
        res.timings = debug["timings"]
        if debug_dir:
            os.makedirs(debug_dir, exist_ok=True)
            write_pgm(debug["mask"], os.path.join(debug_dir, f"{stem}_mask.pgm"))
            write_pgm(conf.map_to_u8(debug["cmap"]), os.path.join(debug_dir, f"{stem}_confidence.pgm"))
            dump_regions(debug["filtered"], os.path.join(debug_dir, f"{stem}_regions.json"))
            for r in debug["rst_results"]:
                roughset.curve_to_csv(
                    r.curve, os.path.join(debug_dir, f"{stem}_recurve_{r.curve.polarity}.csv")
                )
            from . import plots

            plots.plot_re_curves(debug["rst_results"], os.path.join(debug_dir, f"{stem}_recurve.png"))
        if cfg["augment.export_patches"] and patches_dir:
            params = cfg.augment_params()
            sets = [aug.augment_region(img, r, params, i) for i, r in enumerate(debug["filtered"])]
            aug.export_patches(sets, patches_dir, stem)
    except Exception as exc:  # per-image failures must not kill the batch
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def propose_paths(
    paths, cfg: PipelineConfig, debug_dir=None, patches_dir=None, workers: int = 1
) -> list[ProposeResult]:
    """Run the propose path on many images, preserving input order."""
    if patches_dir is None and cfg["augment.export_patches"] and debug_dir:
        patches_dir = os.path.join(debug_dir, "patches")
    jobs = [(str(p), cfg.values, debug_dir, patches_dir) for p in paths]
    if workers <= 1 or len(jobs) <= 1:
        results = [_propose_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_propose_worker, jobs))
    for r in results:
        if r.error:
            log.error("image=%s failed: %s", r.image_id, r.error)
        else:
            log.info(
                "image=%s regions=%d filtered=%d proposals=%d t_star=%s timings=%s",
                r.image_id, r.region_count, r.filtered_count, len(r.proposals),
                r.thresholds, {k: f"{v:.3f}s" for k, v in r.timings.items()},
            )
    return results


def proposals_to_detections(results: list[ProposeResult]) -> tuple[list[fus.Detection], dict]:
    """Flatten propose results into Detections plus extra JSON columns."""
    dets = []
    support = []
    source = []
    for r in results:
        for p in r.proposals:
            dets.append(fus.Detection(image_id=r.image_id, bbox=p.bbox, score=p.score, label="vehicle"))
            support.append(p.support)
            source.append("proposal")
    return dets, {"support": support, "source": source}


def detections_to_proposals(dets: list[fus.Detection]) -> list[conf.Proposal]:
    return [conf.Proposal(bbox=d.bbox, score=d.score, support=0) for d in dets]


def fuse_files(detections_path, proposals_path, cfg: PipelineConfig) -> list[fus.Detection]:
    dets = fus.read_detections(detections_path)
    props = fus.read_detections(proposals_path)
    params = cfg.fusion_params()
    by_image_props = fus.group_by_image(props)
    refined: list[fus.Detection] = []
    for image_id, group in sorted(fus.group_by_image(dets).items()):
        image_props = detections_to_proposals(by_image_props.get(image_id, []))
        refined.extend(fus.fuse(group, image_props, params))
    return refined


def load_ground_truth(labels_dir, image_dims: dict) -> dict[str, ev.GroundTruth]:
    """YOLO sidecar files for every known image; missing files warn."""
    gts = {}
    for stem, dims in sorted(image_dims.items()):
        path = os.path.join(labels_dir, stem + ".txt")
        if not os.path.isfile(path):
            log.warning("no annotation for image '%s'; counting it as zero ground truth", stem)
            gts[stem] = ev.GroundTruth(image_id=stem, boxes=(), width=dims[0], height=dims[1])
            continue
        gts[stem] = ev.load_annotations(path, "yolo-txt", dims)[0]
    return gts


@dataclass
class RunOutcome:
    out_dir: str
    results: list
    report: ev.MetricsReport | None = None
    failures: int = 0


def run_dataset(dataset_dir, cfg: PipelineConfig, out_dir, stages=("propose", "eval"), debug: bool = False) -> RunOutcome:
    """cmd_run engine: propose then optional fuse and eval stages.

    Expects dataset_dir/images plus labels/ for eval and detections/
    detections.json for the fuse stage. Writes every artifact plus the
    resolved config snapshot under out_dir.
    """
    from .config import save_config

    images_dir = os.path.join(dataset_dir, "images")
    if not os.path.isdir(images_dir):
        raise FileNotFoundError(f"dataset has no images/ directory: {images_dir}")
    paths = sorted(
        os.path.join(images_dir, f) for f in os.listdir(images_dir) if f.endswith((".pgm", ".png"))
    )
    if not paths:
        raise FileNotFoundError(f"no images found under {images_dir}")

    os.makedirs(out_dir, exist_ok=True)
    save_config(cfg, os.path.join(out_dir, "config.txt"))

    results = propose_paths(
        paths,
        cfg,
        debug_dir=os.path.join(out_dir, "debug") if debug else None,
        patches_dir=os.path.join(out_dir, "patches") if cfg["augment.export_patches"] else None,
        workers=cfg["workers"],
    )
    outcome = RunOutcome(out_dir=out_dir, results=results, failures=sum(1 for r in results if r.error))

    dets, extra = proposals_to_detections(results)
    fus.write_detections(dets, os.path.join(out_dir, "proposals.json"), extra)

    eval_dets = dets
    if "fuse" in stages:
        external = os.path.join(dataset_dir, "detections", "detections.json")
        if not os.path.isfile(external):
            raise FileNotFoundError(f"fuse stage needs {external}")
        refined = fuse_files(external, os.path.join(out_dir, "proposals.json"), cfg)
        fus.write_detections(refined, os.path.join(out_dir, "refined.json"))
        eval_dets = refined

    if "eval" in stages:
        labels_dir = os.path.join(dataset_dir, "labels")
        if not os.path.isdir(labels_dir):
            raise FileNotFoundError(f"eval stage needs a labels/ directory: {labels_dir}")
        image_dims = {r.image_id: (r.width, r.height) for r in results if not r.error}
        gts = load_ground_truth(labels_dir, image_dims)
        rep = ev.report(eval_dets, gts, operating_point=cfg["eval.operating_point"])
        ev.write_report_json(rep, os.path.join(out_dir, "metrics.json"))
        ev.write_report_csv(rep, os.path.join(out_dir, "metrics.csv"))
        ev.write_pr_csv(rep, os.path.join(out_dir, "pr_curves.csv"))
        from . import plots

        plots.plot_pr_curves(rep, os.path.join(out_dir, "pr_curves.png"))
        outcome.report = rep
    return outcome
