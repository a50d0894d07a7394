"""snowprop: stable-region vehicle proposals for snowy aerial imagery.

Pipeline: scale pyramid -> multiresolution MSER -> rough-set
filtration -> stacked confidence map -> scored proposals, plus
score-level fusion with external detector outputs and a COCO-style
metric suite.
"""

__version__ = "0.1.0"

from .boxes import Box, box_iou, map_box_to_base
from .imaging import build_pyramid, load_image, read_pgm, to_grayscale, write_pgm
from .mser import ExtremalRegion, MserParams, detect_mser
from .mrmser import MrMserParams, detect_mr_mser

__all__ = [
    "Box",
    "box_iou",
    "map_box_to_base",
    "build_pyramid",
    "load_image",
    "read_pgm",
    "write_pgm",
    "to_grayscale",
    "ExtremalRegion",
    "MserParams",
    "detect_mser",
    "MrMserParams",
    "detect_mr_mser",
    "__version__",
]
