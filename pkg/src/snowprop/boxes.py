"""Axis-aligned bounding boxes and overlap arithmetic.

Boxes are (x, y, w, h) with a top-left origin in pixel units. Region boxes
are integer valued; detection boxes read from external JSON may be floats.
Areas and overlaps use the continuous convention (area = w*h, no +1).
"""

from __future__ import annotations

from typing import NamedTuple


class Box(NamedTuple):
    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


def box_iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes; 0.0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def map_box_to_base(box: Box, k: int) -> Box:
    """Map a box expressed at pyramid level k back to base resolution.

    Every field is scaled by 2**k; level 0 is the identity.
    """
    if k < 0:
        raise ValueError("pyramid level must be >= 0")
    s = 1 << k
    return Box(box.x * s, box.y * s, box.w * s, box.h * s)
