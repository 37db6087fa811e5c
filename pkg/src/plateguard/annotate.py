"""Frame annotation: per-class colored rectangles plus a double border on
violating bikes. Drawing never touches pixels outside the frame and always
returns a new buffer."""

from __future__ import annotations

import math

import numpy as np

from .detection_io import ClassLabel, Detection
from .engine import ViolationFlag
from .geometry import BBox

CLASS_COLORS: dict[ClassLabel, tuple[int, int, int]] = {
    ClassLabel.BIKE: (40, 110, 255),
    ClassLabel.HELMET: (40, 200, 80),
    ClassLabel.NO_HELMET: (230, 40, 40),
    ClassLabel.MIRROR: (40, 200, 200),
    ClassLabel.NUMBER_PLATE: (255, 200, 40),
}
VIOLATION_COLOR = (230, 40, 40)
BOX_THICKNESS = 2
VIOLATION_RING_OFFSET = 2   # px outside the bike rectangle
VIOLATION_RING_THICKNESS = 1


def _pixel_bounds(box: BBox) -> tuple[int, int, int, int]:
    return (
        int(math.floor(box.x1)),
        int(math.floor(box.y1)),
        int(math.ceil(box.x2)) - 1,
        int(math.ceil(box.y2)) - 1,
    )


def _draw_rect(img: np.ndarray, x1: int, y1: int, x2: int, y2: int,
               color: tuple[int, int, int], thickness: int) -> None:
    h, w = img.shape[:2]
    if x2 < x1 or y2 < y1:
        return
    col = np.array(color, dtype=np.uint8)

    def fill(ry1: int, ry2: int, rx1: int, rx2: int) -> None:
        ry1, ry2 = max(ry1, 0), min(ry2, h - 1)
        rx1, rx2 = max(rx1, 0), min(rx2, w - 1)
        if ry1 <= ry2 and rx1 <= rx2:
            img[ry1:ry2 + 1, rx1:rx2 + 1] = col

    fill(y1, min(y1 + thickness - 1, y2), x1, x2)            # top
    fill(max(y2 - thickness + 1, y1), y2, x1, x2)            # bottom
    fill(y1, y2, x1, min(x1 + thickness - 1, x2))            # left
    fill(y1, y2, max(x2 - thickness + 1, x1), x2)            # right


def annotate_frame(img: np.ndarray, dets: list[Detection],
                   flags: list[ViolationFlag]) -> np.ndarray:
    """New image with 2 px class-colored boxes; bikes named in any flag get an
    extra 1 px ring just outside their box."""
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected HxWx3 uint8 frame, got {img.shape} {img.dtype}")
    out = img.copy()
    for det in dets:
        x1, y1, x2, y2 = _pixel_bounds(det.bbox)
        _draw_rect(out, x1, y1, x2, y2, CLASS_COLORS[det.label], BOX_THICKNESS)
    seen: set[tuple[float, float, float, float]] = set()
    for flag in flags:
        key = flag.bike_bbox.as_tuple()
        if key in seen:
            continue
        seen.add(key)
        x1, y1, x2, y2 = _pixel_bounds(flag.bike_bbox)
        o = VIOLATION_RING_OFFSET
        _draw_rect(out, x1 - o, y1 - o, x2 + o, y2 + o,
                   VIOLATION_COLOR, VIOLATION_RING_THICKNESS)
    return out
