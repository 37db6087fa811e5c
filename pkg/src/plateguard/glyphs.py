"""Built-in glyph atlas: a 5x7 bitmap font for A-Z and 0-9, scaled to a fixed
cell size by nearest neighbor.

The face is designed so the visually confusable pairs stay machine-separable:
zero carries a slash, one has a flag and a base, I has serifs. No glyph has a
fully blank interior column, which keeps projection-profile segmentation from
splitting a character in two.

Atlas file format: a horizontal PGM strip of the 36 glyphs in A-Z then 0-9
order (ink black, background white) with a sidecar `<file>.meta` text header
declaring the cell dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imgio import load_pgm, nearest_resize, save_pgm

CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"

_FONT_5X7 = {
    "A": (".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "B": ("####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."),
    "C": (".####", "#....", "#....", "#....", "#....", "#....", ".####"),
    "D": ("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."),
    "E": ("#####", "#....", "#....", "####.", "#....", "#....", "#####"),
    "F": ("#####", "#....", "#....", "####.", "#....", "#....", "#...."),
    "G": (".####", "#....", "#....", "#.###", "#...#", "#...#", ".####"),
    "H": ("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "I": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"),
    "J": ("..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."),
    "K": ("#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"),
    "L": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "M": ("#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"),
    "N": ("#...#", "##..#", "##..#", "#.#.#", "#..##", "#..##", "#...#"),
    "O": (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "P": ("####.", "#...#", "#...#", "####.", "#....", "#....", "#...."),
    "Q": (".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"),
    "R": ("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"),
    "S": (".####", "#....", "#....", ".###.", "....#", "....#", "####."),
    "T": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "U": ("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "V": ("#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."),
    "W": ("#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"),
    "X": ("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"),
    "Y": ("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."),
    "Z": ("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"),
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "..##.", ".#...", "#....", "#####"),
    "3": ("#####", "....#", "...#.", "..##.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": ("..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."),
}


@dataclass(frozen=True, eq=False)
class GlyphAtlas:
    """36 equally sized binary glyph bitmaps (True = ink), A-Z then 0-9."""

    glyph_width: int
    glyph_height: int
    masks: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self) -> None:
        missing = set(CHARSET) - set(self.masks)
        if missing:
            raise ValueError(f"atlas missing glyphs: {sorted(missing)}")
        shape = (self.glyph_height, self.glyph_width)
        for ch, mask in self.masks.items():
            if mask.shape != shape or mask.dtype != np.bool_:
                raise ValueError(f"glyph {ch!r}: expected bool array of {shape}")
        flat = [self.masks[c].tobytes() for c in CHARSET]
        if len(set(flat)) != len(CHARSET):
            raise ValueError("atlas contains identical glyphs")

    def __contains__(self, ch: str) -> bool:
        return ch in self.masks


def _base_mask(ch: str) -> np.ndarray:
    rows = _FONT_5X7[ch]
    return np.array([[c == "#" for c in row] for row in rows], dtype=bool)


def build_atlas(glyph_width: int = 16, glyph_height: int = 24,
                pad_x: int = 0, pad_y: int = 0) -> GlyphAtlas:
    """Scale the base font into each cell, optionally leaving a blank border
    inside the cell. Padding widens the effective ink gap between rendered
    characters (useful under wide smoothing kernels); recognition is
    unaffected because cells are cropped to their ink box before matching.
    """
    ink_w = glyph_width - 2 * pad_x
    ink_h = glyph_height - 2 * pad_y
    if ink_w < 5 or ink_h < 7:
        raise ValueError(f"ink region {ink_w}x{ink_h} too small for the 5x7 base font")
    masks = {}
    for ch in CHARSET:
        cell = np.zeros((glyph_height, glyph_width), dtype=bool)
        cell[pad_y:pad_y + ink_h, pad_x:pad_x + ink_w] = nearest_resize(_base_mask(ch), ink_h, ink_w)
        masks[ch] = cell
    return GlyphAtlas(glyph_width=glyph_width, glyph_height=glyph_height, masks=masks)


def save_atlas(atlas: GlyphAtlas, path: str | Path) -> None:
    strip = np.full((atlas.glyph_height, atlas.glyph_width * len(CHARSET)), 255, dtype=np.uint8)
    for i, ch in enumerate(CHARSET):
        x = i * atlas.glyph_width
        strip[:, x:x + atlas.glyph_width][atlas.masks[ch]] = 0
    save_pgm(path, strip)
    meta = (
        f"glyph_width = {atlas.glyph_width}\n"
        f"glyph_height = {atlas.glyph_height}\n"
        f"order = {CHARSET}\n"
    )
    Path(str(path) + ".meta").write_text(meta, encoding="utf-8")


def load_atlas(path: str | Path) -> GlyphAtlas:
    meta_path = Path(str(path) + ".meta")
    fields: dict[str, str] = {}
    for line in meta_path.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    if "glyph_width" not in fields or "glyph_height" not in fields:
        raise ValueError(f"{meta_path}: missing glyph dimensions")
    gw, gh = int(fields["glyph_width"]), int(fields["glyph_height"])
    if fields.get("order", CHARSET) != CHARSET:
        raise ValueError(f"{meta_path}: unexpected glyph order")
    strip = load_pgm(path)
    if strip.shape != (gh, gw * len(CHARSET)):
        raise ValueError(f"{path}: strip is {strip.shape}, expected {(gh, gw * len(CHARSET))}")
    masks = {
        ch: (strip[:, i * gw:(i + 1) * gw] < 128)
        for i, ch in enumerate(CHARSET)
    }
    return GlyphAtlas(glyph_width=gw, glyph_height=gh, masks=masks)
