"""Pipeline configuration: namespaced key=value files with strict keys.

A config file holds one 'section.key=value' per line ('#' comments and
blank lines allowed). Unknown keys are rejected so typos cannot
silently fall back to defaults. parse -> serialize -> parse is the
identity, and a serialized snapshot plus the seed reproduces a run
exactly.
"""

from __future__ import annotations

import math

from .augment import AugmentParams
from .fusion import FusionParams
from .mrmser import MrMserParams
from .mser import MserParams
from .synth import SceneParams


def _parse_bool(s: str) -> bool:
    if s in ("true", "1", "yes"):
        return True
    if s in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got '{s}'")


def _parse_floats(s: str) -> tuple[float, ...]:
    return tuple(float(p) for p in s.split(",") if p.strip())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)  # shortest exact representation
    return str(value)


_MSER_POLARITIES = ("dark-on-bright", "bright-on-dark", "both")
_RST_POLARITIES = ("dark-object", "bright-object", "both")


def _choice(options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {options}, got '{s}'")
        return s

    return parse


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "seed": (int, 0),
    "workers": (int, 1),
    "pyramid.levels": (int, 3),
    "pyramid.decimate": (_parse_bool, False),
    "mser.delta": (int, 5),
    "mser.min_area": (int, 10),
    "mser.max_area_fraction": (float, 0.05),
    "mser.max_variation": (float, 0.5),
    "mser.min_diversity": (float, 0.2),
    "mser.polarity": (_choice(_MSER_POLARITIES), "both"),
    "mrmser.dedup_iou": (float, 0.7),
    "roughset.granule_w": (int, 2),
    "roughset.granule_h": (int, 2),
    "roughset.polarity": (_choice(_RST_POLARITIES), "dark-object"),
    "roughset.min_object_fraction": (float, 0.5),
    "roughset.input": (_choice(("image", "confidence")), "image"),
    "augment.expansions": (_parse_floats, (1.0, 1.3, 1.6)),
    "augment.patch_side": (int, 28),
    "augment.rotations": (int, 4),
    "augment.angle_min": (float, -math.pi / 4),
    "augment.angle_max": (float, math.pi / 4),
    "augment.export_patches": (_parse_bool, False),
    "confidence.weighting": (_choice(("stability", "uniform")), "stability"),
    "confidence.tau": (float, 0.5),
    "confidence.use_expanded": (_parse_bool, False),
    "confidence.max_proposals": (int, 100),
    "fusion.overlap_iou": (float, 0.3),
    "fusion.boost": (float, 0.2),
    "fusion.damp": (float, 0.5),
    "fusion.score_floor": (float, 0.05),
    "fusion.nms_iou": (float, 0.5),
    "eval.operating_point": (str, "fixed:0.25"),
    "synth.width": (int, 1024),
    "synth.height": (int, 768),
    "synth.vehicles": (int, 10),
    "synth.min_size": (int, 12),
    "synth.max_size": (int, 40),
    "synth.vehicle_min": (int, 20),
    "synth.vehicle_max": (int, 60),
    "synth.bg_min": (int, 200),
    "synth.bg_max": (int, 240),
    "synth.noise_sigma": (float, 8.0),
    "synth.occlusion": (float, 0.0),
}


class PipelineConfig:
    """Typed view over the flat key space, with param-object builders."""

    def __init__(self, values: dict | None = None):
        self.values = {k: default for k, (_, default) in SCHEMA.items()}
        for k, v in (values or {}).items():
            if k not in SCHEMA:
                raise ValueError(f"unknown config key '{k}'")
            self.values[k] = v

    def __getitem__(self, key: str):
        return self.values[key]

    def set(self, key: str, raw: str) -> None:
        if key not in SCHEMA:
            raise ValueError(f"unknown config key '{key}'")
        parser = SCHEMA[key][0]
        try:
            self.values[key] = parser(raw)
        except ValueError as exc:
            raise ValueError(f"config key '{key}': {exc}") from exc

    def mser_params(self) -> MserParams:
        return MserParams(
            delta=self["mser.delta"],
            min_area=self["mser.min_area"],
            max_area_fraction=self["mser.max_area_fraction"],
            max_variation=self["mser.max_variation"],
            min_diversity=self["mser.min_diversity"],
            polarity=self["mser.polarity"],
        )

    def mrmser_params(self) -> MrMserParams:
        return MrMserParams(mser=self.mser_params(), dedup_iou=self["mrmser.dedup_iou"])

    def augment_params(self) -> AugmentParams:
        return AugmentParams(
            expansions=self["augment.expansions"],
            patch_side=self["augment.patch_side"],
            rotations_per_patch=self["augment.rotations"],
            angle_range=(self["augment.angle_min"], self["augment.angle_max"]),
            seed=self["seed"],
        )

    def fusion_params(self) -> FusionParams:
        return FusionParams(
            overlap_iou=self["fusion.overlap_iou"],
            boost=self["fusion.boost"],
            damp=self["fusion.damp"],
            score_floor=self["fusion.score_floor"],
            nms_iou=self["fusion.nms_iou"],
        )

    def scene_params(self) -> SceneParams:
        return SceneParams(
            width=self["synth.width"],
            height=self["synth.height"],
            vehicles=self["synth.vehicles"],
            min_size=self["synth.min_size"],
            max_size=self["synth.max_size"],
            vehicle_min=self["synth.vehicle_min"],
            vehicle_max=self["synth.vehicle_max"],
            bg_min=self["synth.bg_min"],
            bg_max=self["synth.bg_max"],
            noise_sigma=self["synth.noise_sigma"],
            occlusion=self["synth.occlusion"],
        )

    def serialize(self) -> str:
        lines = [f"{k}={_fmt(self.values[k])}" for k in sorted(SCHEMA)]
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> PipelineConfig:
    cfg = PipelineConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got '{line}'")
        key, value = line.split("=", 1)
        try:
            cfg.set(key.strip(), value.strip())
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return cfg


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(cfg.serialize())
