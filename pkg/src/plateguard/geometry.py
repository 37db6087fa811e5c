"""Axis-aligned bounding-box arithmetic: IoU, center distance, region expansion.

Coordinates are real-valued pixels, origin top-left. Degenerate boxes
(zero or negative extent) are rejected at construction so the operations
never have to re-validate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import PlateGuardError


class ClippedToDegenerate(PlateGuardError):
    """Expansion result collapsed to zero extent after clipping to the frame."""


@dataclass(frozen=True)
class BBox:
    """Nondegenerate box: x1 < x2, y1 < y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box: {self.x1},{self.y1},{self.x2},{self.y2}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def area(self) -> float:
        return self.width * self.height

    def center(self) -> tuple[float, float]:
        return (self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0

    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def contains_point(self, x: float, y: float) -> bool:
        """Inclusive on all four edges."""
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x1, self.y1, self.x2, self.y2


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area; 0.0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area() + b.area() - inter)


def center_distance(a: BBox, b: BBox) -> float:
    """Euclidean distance between box centers, in pixels."""
    ax, ay = a.center()
    bx, by = b.center()
    return math.hypot(ax - bx, ay - by)


def expand(
    b: BBox,
    left: float,
    right: float,
    up: float,
    down: float,
    frame_width: float,
    frame_height: float,
) -> BBox:
    """Grow a box by fractions of its own width (left/right) and height (up/down),
    then clip to [0, frame_width] x [0, frame_height].

    Raises ClippedToDegenerate if the clipped box has no extent (box fully
    outside the frame).
    """
    if min(left, right, up, down) < 0:
        raise ValueError("expansion fractions must be >= 0")
    w, h = b.width, b.height
    x1 = max(0.0, b.x1 - left * w)
    x2 = min(float(frame_width), b.x2 + right * w)
    y1 = max(0.0, b.y1 - up * h)
    y2 = min(float(frame_height), b.y2 + down * h)
    if not (x1 < x2 and y1 < y2):
        raise ClippedToDegenerate(f"box {b.as_tuple()} clipped to nothing")
    return BBox(x1, y1, x2, y2)
