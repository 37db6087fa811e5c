"""PNG and PGM raster I/O plus small pixel-level helpers.

PNG goes through Pillow; PGM (binary P5) is read and written directly since
it is the fixture format for kernel oracles and the glyph atlas.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

# Low compression: annotated 720p frames are written per processed frame and
# synthetic content is highly compressible anyway.
PNG_COMPRESS_LEVEL = 1


def load_png(path: str | Path) -> np.ndarray:
    """Returns HxW uint8 for grayscale files, HxWx3 uint8 otherwise."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_png(path: str | Path, img: np.ndarray) -> None:
    if img.dtype != np.uint8 or img.ndim not in (2, 3):
        raise ValueError(f"expected uint8 HxW or HxWx3 array, got {img.shape} {img.dtype}")
    mode = "L" if img.ndim == 2 else "RGB"
    Image.fromarray(img, mode=mode).save(path, format="PNG", compress_level=PNG_COMPRESS_LEVEL)


def load_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise ValueError(f"{path}: not a binary P5 PGM")
    width, height, maxval = int(m.group(1)), int(m.group(2)), int(m.group(3))
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=m.end())
    if pixels.size != width * height:
        raise ValueError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).copy()


def save_pgm(path: str | Path, img: np.ndarray) -> None:
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError(f"expected HxW uint8 array, got {img.shape} {img.dtype}")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def nearest_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resample: out[i,j] = in[(i*h_in)//h_out, (j*w_in)//w_out]."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")
    h, w = img.shape[:2]
    rows = (np.arange(out_h) * h) // out_h
    cols = (np.arange(out_w) * w) // out_w
    return img[rows][:, cols]
