from __future__ import annotations

import numpy as np
import pytest

from plateguard.detection_io import ClassLabel, Detection, FrameDetections
from plateguard.geometry import BBox
from plateguard.glyphs import build_atlas


@pytest.fixture(scope="session")
def atlas():
    return build_atlas()


def det(label: str, x1: float, y1: float, x2: float, y2: float,
        conf: float = 0.9, frame_id: int = 0) -> Detection:
    return Detection(frame_id, ClassLabel(label), BBox(x1, y1, x2, y2), conf)


def frame(*dets: Detection, width: int = 1280, height: int = 720,
          frame_id: int = 0) -> FrameDetections:
    return FrameDetections(frame_id, width, height, list(dets))


def random_gray(rng: np.random.Generator, min_side: int = 8, max_side: int = 32) -> np.ndarray:
    h = int(rng.integers(min_side, max_side + 1))
    w = int(rng.integers(min_side, max_side + 1))
    return rng.integers(0, 256, size=(h, w), dtype=np.uint8)
