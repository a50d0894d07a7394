"""Command-line front end.

Subcommands: synth | pyramid | mser | propose | fuse | eval | run.
Every run is reproducible from its config snapshot and seed; the
SNOWPROP_OUTPUT_ROOT environment variable supplies the default output
root. Exit codes: 0 success, 1 any per-item failure, 2 usage or
config errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import evaluate as ev
from . import fusion as fus
from .config import PipelineConfig, load_config, save_config
from .imaging import build_pyramid, load_image, write_pgm
from .mser import detect_mser, dump_regions
from .pipeline import propose_paths, proposals_to_detections, fuse_files, run_dataset
from .synth import generate_dataset

log = logging.getLogger("snowprop")


def _output_root() -> str:
    return os.environ.get("SNOWPROP_OUTPUT_ROOT", ".")


def _resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value.strip())
    if getattr(args, "seed", None) is not None:
        cfg.values["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.values["workers"] = args.workers
    if getattr(args, "operating_point", None):
        cfg.set("eval.operating_point", args.operating_point)
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (key=value lines)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--seed", type=int, help="override the config seed")


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    out = args.out or os.path.join(_output_root(), "synthetic")
    stems = generate_dataset(out, args.num_images, cfg.scene_params(), cfg["seed"])
    save_config(cfg, os.path.join(out, "config.txt"))
    print(f"wrote {len(stems)} scenes under {out}")
    return 0


def cmd_pyramid(args) -> int:
    cfg = _resolve_config(args)
    img = load_image(args.image)
    out = args.out or _output_root()
    os.makedirs(out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.image))[0]
    for k, level in enumerate(build_pyramid(img, cfg["pyramid.levels"], cfg["pyramid.decimate"])):
        path = os.path.join(out, f"{stem}_level{k}.pgm")
        write_pgm(level, path)
        print(f"level {k}: {level.shape[1]}x{level.shape[0]} -> {path}")
    return 0


def cmd_mser(args) -> int:
    cfg = _resolve_config(args)
    img = load_image(args.image)
    regions = detect_mser(img, cfg.mser_params())
    out = args.out or os.path.join(_output_root(), os.path.splitext(os.path.basename(args.image))[0] + "_regions.json")
    dump_regions(regions, out)
    print(f"{len(regions)} regions -> {out}")
    return 0


def cmd_propose(args) -> int:
    cfg = _resolve_config(args)
    out_dir = args.out or os.path.join(_output_root(), "proposals")
    os.makedirs(out_dir, exist_ok=True)
    save_config(cfg, os.path.join(out_dir, "config.txt"))
    t0 = time.perf_counter()
    results = propose_paths(
        args.images, cfg,
        debug_dir=os.path.join(out_dir, "debug") if args.debug else None,
        patches_dir=os.path.join(out_dir, "patches") if cfg["augment.export_patches"] else None,
        workers=cfg["workers"],
    )
    dets, extra = proposals_to_detections(results)
    path = os.path.join(out_dir, "proposals.json")
    fus.write_detections(dets, path, extra)
    failures = sum(1 for r in results if r.error)
    print(f"{len(dets)} proposals from {len(results)} images in {time.perf_counter() - t0:.2f}s -> {path}")
    if failures:
        print(f"{failures} images failed; see log", file=sys.stderr)
        return 1
    return 0


def cmd_fuse(args) -> int:
    cfg = _resolve_config(args)
    refined = fuse_files(args.detections, args.proposals, cfg)
    out = args.out or os.path.join(_output_root(), "refined.json")
    fus.write_detections(refined, out)
    print(f"{len(refined)} refined detections -> {out}")
    return 0


def cmd_eval(args) -> int:
    from . import plots
    from .pipeline import load_ground_truth

    cfg = _resolve_config(args)
    dets = fus.read_detections(args.detections)
    if args.annotations.endswith(".json"):
        gts = {g.image_id: g for g in ev.load_annotations(args.annotations, "coco-json")}
    else:
        if not args.images_dir:
            raise ValueError("yolo-txt annotations need --images-dir for image dims")
        image_dims = {}
        for name in sorted(os.listdir(args.images_dir)):
            if name.endswith((".pgm", ".png")):
                img = load_image(os.path.join(args.images_dir, name))
                image_dims[os.path.splitext(name)[0]] = (img.shape[1], img.shape[0])
        gts = load_ground_truth(args.annotations, image_dims)
    rep = ev.report(dets, gts, operating_point=cfg["eval.operating_point"])
    out = args.out or os.path.join(_output_root(), "metrics")
    os.makedirs(out, exist_ok=True)
    ev.write_report_json(rep, os.path.join(out, "metrics.json"))
    ev.write_report_csv(rep, os.path.join(out, "metrics.csv"))
    ev.write_pr_csv(rep, os.path.join(out, "pr_curves.csv"))
    plots.plot_pr_curves(rep, os.path.join(out, "pr_curves.png"))
    print(ev.format_table([(args.model_name, rep)]))
    return 0


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    stages = tuple(s.strip() for s in args.stages.split(",") if s.strip())
    bad = [s for s in stages if s not in ("propose", "fuse", "eval")]
    if bad:
        raise ValueError(f"unknown stages: {bad}")
    out = args.out or os.path.join(_output_root(), f"run_{time.strftime('%Y%m%d_%H%M%S')}")
    t0 = time.perf_counter()
    outcome = run_dataset(args.dataset, cfg, out, stages=stages, debug=args.debug)
    elapsed = time.perf_counter() - t0
    print(f"run complete in {elapsed:.2f}s -> {outcome.out_dir}")
    if outcome.report is not None:
        print(ev.format_table([("proposals" if "fuse" not in stages else "refined", outcome.report)]))
    return 1 if outcome.failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snowprop", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-image details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    _add_common(p)
    p.add_argument("--out", help="output dataset directory")
    p.add_argument("--num-images", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pyramid", help="write the scale pyramid of one image")
    _add_common(p)
    p.add_argument("image")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pyramid)

    p = sub.add_parser("mser", help="dump stable regions of one image as JSON")
    _add_common(p)
    p.add_argument("image")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mser)

    p = sub.add_parser("propose", help="run the proposal pipeline on images")
    _add_common(p)
    p.add_argument("images", nargs="+")
    p.add_argument("--out", help="output directory")
    p.add_argument("--debug", action="store_true", help="write masks, maps, curves, region dumps")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_propose)

    p = sub.add_parser("fuse", help="refine external detections with proposals")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--proposals", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="score detections against annotations")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True, help="labels dir (yolo-txt) or COCO json")
    p.add_argument("--images-dir", help="images for yolo-txt dims")
    p.add_argument("--operating-point", help="fixed:<t> or best-f1")
    p.add_argument("--model-name", default="detections")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="full pipeline over a dataset directory")
    _add_common(p)
    p.add_argument("dataset", help="directory with images/ and labels/")
    p.add_argument("--out")
    p.add_argument("--stages", default="propose,eval")
    p.add_argument("--debug", action="store_true")
    p.add_argument("--workers", type=int)
    p.add_argument("--operating-point", help="fixed:<t> or best-f1")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
