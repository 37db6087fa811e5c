"""Plate-crop preprocessing implemented from scratch on 8-bit rasters:
grayscale, bilateral filter, CLAHE, and conditional adaptive binarization
with morphological cleanup.

Image conventions used across the package:

* GrayImage: 2-D uint8 numpy array, shape (height, width);
* RgbImage: 3-D uint8 numpy array, shape (height, width, 3).

Determinism rules, fixed once for every kernel here:

* rounding is round-half-away-from-zero;
* borders are handled by reflection without repeating the edge pixel
  (index -1 maps to 1, index n maps to n-2);
* all intermediate arithmetic is IEEE float64, accumulated in window
  scan order (dy outer, dx inner), so a naive double-loop reference
  produces bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PlateGuardError


class ImageTooSmall(PlateGuardError):
    """Image cannot accommodate the requested tile grid."""


@dataclass(frozen=True)
class PreprocessConfig:
    bilateral_radius: int = 4          # 9x9 window
    sigma_space: float = 75.0
    sigma_color: float = 75.0
    clahe_clip: float = 2.0            # relative clip factor
    clahe_tiles_x: int = 8
    clahe_tiles_y: int = 8
    binarize_contrast_threshold: float = 40.0   # RMS contrast trigger
    adaptive_block: int = 11
    adaptive_c: float = 2.0
    morph_kernel: int = 3
    morph_op: str = "open"             # "open" or "close"

    def __post_init__(self) -> None:
        if self.bilateral_radius < 1:
            raise ValueError("bilateral_radius must be >= 1")
        if self.sigma_space <= 0 or self.sigma_color <= 0:
            raise ValueError("sigmas must be > 0")
        if self.clahe_tiles_x < 1 or self.clahe_tiles_y < 1:
            raise ValueError("tile counts must be >= 1")
        if self.adaptive_block < 3 or self.adaptive_block % 2 == 0:
            raise ValueError("adaptive_block must be odd and >= 3")
        if self.morph_kernel < 1:
            raise ValueError("morph_kernel must be >= 1")
        if self.morph_op not in ("open", "close"):
            raise ValueError(f"morph_op must be open or close: {self.morph_op!r}")


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round-half-away-from-zero, elementwise, as float64."""
    return np.where(x >= 0.0, np.floor(x + 0.5), np.ceil(x - 0.5))


def _reflect_indices(n: int, radius: int) -> np.ndarray:
    """Source index for each position of a reflect-padded axis of length n."""
    if n == 1:
        return np.zeros(n + 2 * radius, dtype=np.intp)
    period = 2 * n - 2
    idx = np.arange(-radius, n + radius) % period
    return np.where(idx < n, idx, period - idx)


def _pad_reflect(img: np.ndarray, radius: int) -> np.ndarray:
    ry = _reflect_indices(img.shape[0], radius)
    rx = _reflect_indices(img.shape[1], radius)
    return img[np.ix_(ry, rx)]


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma: round(0.299 R + 0.587 G + 0.114 B)."""
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected HxWx3 uint8 image, got {img.shape} {img.dtype}")
    r = img[:, :, 0].astype(np.float64)
    g = img[:, :, 1].astype(np.float64)
    b = img[:, :, 2].astype(np.float64)
    luma = 0.299 * r + 0.587 * g + 0.114 * b
    return np.minimum(round_half_away(luma), 255.0).astype(np.uint8)


def bilateral_filter(img: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Edge-preserving smoothing: weights combine a spatial Gaussian on the
    window offset with an intensity Gaussian on the center/neighbor value
    difference, normalized over the (2r+1)^2 window."""
    _check_gray(img)
    r = cfg.bilateral_radius
    h, w = img.shape
    padded = _pad_reflect(img, r)
    padded_f = padded.astype(np.float64)
    center_f = img.astype(np.float64)
    # 256-entry LUT on |center - neighbor| keeps the exp() count tiny.
    color_lut = np.array(
        [math.exp(-(d * d) / (2.0 * cfg.sigma_color * cfg.sigma_color)) for d in range(256)]
    )
    num = np.zeros((h, w), dtype=np.float64)
    den = np.zeros((h, w), dtype=np.float64)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            ws = math.exp(-(dy * dy + dx * dx) / (2.0 * cfg.sigma_space * cfg.sigma_space))
            neigh = padded[r + dy:r + dy + h, r + dx:r + dx + w]
            diff = np.abs(neigh.astype(np.int16) - img.astype(np.int16))
            weight = ws * color_lut[diff]
            num += weight * padded_f[r + dy:r + dy + h, r + dx:r + dx + w]
            den += weight
    return round_half_away(num / den).astype(np.uint8)


def _clahe_tile_mapping(hist: np.ndarray, area: int, clip_factor: float) -> np.ndarray:
    """Clipped-CDF equalization table for one tile, values 0..255 as float64."""
    clip_count = max(1.0, math.floor(clip_factor * area / 256.0 + 0.5))
    clipped = np.minimum(hist.astype(np.float64), clip_count)
    excess = float(area) - float(clipped.sum())
    redistributed = clipped + excess / 256.0
    cdf = np.cumsum(redistributed) / float(area)
    return np.minimum(255.0, np.floor(255.0 * cdf + 0.5))


def clahe(img: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    The image is split into tiles_x x tiles_y tiles (integer splits, so tile
    sizes differ by at most one pixel). Each tile gets a clipped-histogram
    equalization table; every pixel is mapped through the bilinear blend of
    the four surrounding tile tables, clamping beyond the outermost tile
    centers.
    """
    _check_gray(img)
    h, w = img.shape
    tx, ty = cfg.clahe_tiles_x, cfg.clahe_tiles_y
    if w < tx or h < ty:
        raise ImageTooSmall(f"{w}x{h} image cannot hold {tx}x{ty} tiles")
    xs = [(i * w) // tx for i in range(tx + 1)]
    ys = [(i * h) // ty for i in range(ty + 1)]
    maps = np.empty((ty, tx, 256), dtype=np.float64)
    for i in range(ty):
        for j in range(tx):
            tile = img[ys[i]:ys[i + 1], xs[j]:xs[j + 1]]
            hist = np.bincount(tile.ravel(), minlength=256)
            maps[i, j] = _clahe_tile_mapping(hist, tile.size, cfg.clahe_clip)

    cx = np.array([(xs[j] + xs[j + 1] - 1) / 2.0 for j in range(tx)])
    cy = np.array([(ys[i] + ys[i + 1] - 1) / 2.0 for i in range(ty)])

    def axis_blend(coords: np.ndarray, centers: np.ndarray, count: int):
        if count == 1:
            zero = np.zeros(len(coords), dtype=np.intp)
            return zero, zero, np.zeros(len(coords))
        lo = np.clip(np.searchsorted(centers, coords, side="right") - 1, 0, count - 2)
        frac = (coords - centers[lo]) / (centers[lo + 1] - centers[lo])
        return lo, lo + 1, np.clip(frac, 0.0, 1.0)

    jx0, jx1, fx = axis_blend(np.arange(w, dtype=np.float64), cx, tx)
    iy0, iy1, fy = axis_blend(np.arange(h, dtype=np.float64), cy, ty)

    v = img.astype(np.intp)
    iy0g, iy1g = iy0[:, None], iy1[:, None]
    jx0g, jx1g = jx0[None, :], jx1[None, :]
    m00 = maps[iy0g, jx0g, v]
    m01 = maps[iy0g, jx1g, v]
    m10 = maps[iy1g, jx0g, v]
    m11 = maps[iy1g, jx1g, v]
    fxg, fyg = fx[None, :], fy[:, None]
    blended = (1.0 - fyg) * ((1.0 - fxg) * m00 + fxg * m01) + fyg * ((1.0 - fxg) * m10 + fxg * m11)
    return round_half_away(blended).astype(np.uint8)


def _window_means(img: np.ndarray, block: int) -> np.ndarray:
    """Mean over block x block reflected windows; exact integer sums."""
    r = block // 2
    padded = _pad_reflect(img, r).astype(np.int64)
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = np.cumsum(np.cumsum(padded, axis=0), axis=1)
    h, w = img.shape
    sums = (
        integral[block:block + h, block:block + w]
        - integral[0:h, block:block + w]
        - integral[block:block + h, 0:w]
        + integral[0:h, 0:w]
    )
    return sums / float(block * block)


def _erode(binary: np.ndarray, kernel: int) -> np.ndarray:
    r_lo = kernel // 2
    r_hi = kernel - 1 - r_lo
    fg = binary == 255
    pad = max(r_lo, r_hi)
    padded = _pad_reflect(fg, pad)
    h, w = binary.shape
    acc = np.ones((h, w), dtype=bool)
    for dy in range(-r_lo, r_hi + 1):
        for dx in range(-r_lo, r_hi + 1):
            acc &= padded[pad + dy:pad + dy + h, pad + dx:pad + dx + w]
    return np.where(acc, 255, 0).astype(np.uint8)


def _dilate(binary: np.ndarray, kernel: int) -> np.ndarray:
    r_lo = kernel // 2
    r_hi = kernel - 1 - r_lo
    fg = binary == 255
    pad = max(r_lo, r_hi)
    padded = _pad_reflect(fg, pad)
    h, w = binary.shape
    acc = np.zeros((h, w), dtype=bool)
    for dy in range(-r_lo, r_hi + 1):
        for dx in range(-r_lo, r_hi + 1):
            acc |= padded[pad + dy:pad + dy + h, pad + dx:pad + dx + w]
    return np.where(acc, 255, 0).astype(np.uint8)


def morph_open(binary: np.ndarray, kernel: int) -> np.ndarray:
    return _dilate(_erode(binary, kernel), kernel)


def morph_close(binary: np.ndarray, kernel: int) -> np.ndarray:
    return _erode(_dilate(binary, kernel), kernel)


def binarize_and_clean(img: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Adaptive mean threshold (pixel > block mean - C goes white) followed by
    morphological opening (or closing, per config) of the 255-foreground."""
    _check_gray(img)
    means = _window_means(img, cfg.adaptive_block)
    binary = np.where(img.astype(np.float64) > means - cfg.adaptive_c, 255, 0).astype(np.uint8)
    if cfg.morph_op == "open":
        return morph_open(binary, cfg.morph_kernel)
    return morph_close(binary, cfg.morph_kernel)


def rms_contrast(img: np.ndarray) -> float:
    """Population standard deviation of pixel values."""
    return float(np.std(img.astype(np.float64)))


def preprocess_plate(img: np.ndarray, cfg: PreprocessConfig) -> tuple[np.ndarray, list[str]]:
    """Full conditional pipeline: grayscale, bilateral, CLAHE always; the
    binarize/cleanup stage only when the post-CLAHE RMS contrast falls below
    the configured threshold. Returns the result plus the stage names applied."""
    gray = to_grayscale(img)
    stages = ["grayscale"]
    smoothed = bilateral_filter(gray, cfg)
    stages.append("bilateral")
    equalized = clahe(smoothed, cfg)
    stages.append("clahe")
    if rms_contrast(equalized) < cfg.binarize_contrast_threshold:
        equalized = binarize_and_clean(equalized, cfg)
        stages.append("binarize")
    return equalized, stages


def _check_gray(img: np.ndarray) -> None:
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError(f"expected HxW uint8 image, got {img.shape} {img.dtype}")
    if img.size == 0:
        raise ValueError("empty image")
