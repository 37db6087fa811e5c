"""Plate reading: character segmentation + template matching over the glyph
atlas, followed by text post-processing (allowlist, position-aware confusion
correction, plate-grammar parsing).

The recognizer slot is pluggable: the built-in template matcher keeps the
whole pipeline hermetic, and ExternalProcessRecognizer adapts any engine
speaking the one-line-per-plate protocol (send a PNG path, read back text).

Plate grammar: 2 letters (state), 2 digits (district), 1-3 letters (series),
1-4 digits (number).
"""

from __future__ import annotations

import re
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import PlateGuardError
from .glyphs import CHARSET, GlyphAtlas
from .imgio import nearest_resize, save_png


class EmptyImage(PlateGuardError):
    pass


class NoCharactersFound(PlateGuardError):
    pass


class FormatMismatch(PlateGuardError):
    pass


ALLOWED_CHARS = frozenset(CHARSET)

# Confusable pairs, keyed by what the character should have been. The first
# two pairs are the classic O/0 and I/1; the rest are common extras that can
# be switched off to keep only the classic set.
_LETTER_FOR_DIGIT_CORE = {"0": "O", "1": "I"}
_LETTER_FOR_DIGIT_EXTRA = {"5": "S", "8": "B", "2": "Z"}
_SEGMENT_VALLEY_FRACTION = 0.05
_MIN_CELL_WIDTH = 2


@dataclass(frozen=True)
class PlateNumber:
    state: str
    district: str
    series: str
    number: str

    def __post_init__(self) -> None:
        if not re.fullmatch(r"[A-Z]{2}", self.state):
            raise ValueError(f"bad state code: {self.state!r}")
        if not re.fullmatch(r"[0-9]{2}", self.district):
            raise ValueError(f"bad district code: {self.district!r}")
        if not re.fullmatch(r"[A-Z]{1,3}", self.series):
            raise ValueError(f"bad series: {self.series!r}")
        if not re.fullmatch(r"[0-9]{1,4}", self.number):
            raise ValueError(f"bad number: {self.number!r}")

    def text(self) -> str:
        return self.state + self.district + self.series + self.number


@dataclass
class PlateReadResult:
    raw_text: str
    corrected_text: str
    parsed: PlateNumber | None
    char_scores: list[float]
    parse_ok: bool


def filter_allowlist(text: str) -> str:
    """Uppercase, then keep only A-Z and 0-9."""
    return "".join(c for c in text.upper() if c in ALLOWED_CHARS)


def parse_plate_format(text: str) -> PlateNumber:
    """Greedy grammar split; raises FormatMismatch when none exists."""
    m = re.fullmatch(r"([A-Z]{2})([0-9]{2})([A-Z]{1,3})([0-9]{1,4})", text)
    if not m:
        raise FormatMismatch(f"not a valid plate format: {text!r}")
    return PlateNumber(*m.groups())


def correct_by_position(text: str, extra_pairs: bool = True) -> tuple[str, bool]:
    """Fit allowlist-filtered text to the plate grammar by flipping confusable
    characters toward their positionally expected class.

    Every length-compatible split of the grammar is tried; the one needing the
    fewest flips wins. When no split fits, or the minimum is ambiguous between
    different corrected strings, the text is returned unchanged.
    """
    length = len(text)
    if not 6 <= length <= 11:
        return text, False
    letter_for_digit = dict(_LETTER_FOR_DIGIT_CORE)
    if extra_pairs:
        letter_for_digit.update(_LETTER_FOR_DIGIT_EXTRA)
    digit_for_letter = {v: k for k, v in letter_for_digit.items()}

    candidates: list[tuple[int, str]] = []
    for series_len in (1, 2, 3):
        number_len = length - 4 - series_len
        if not 1 <= number_len <= 4:
            continue
        pattern = "LLDD" + "L" * series_len + "D" * number_len
        out: list[str] = []
        changes = 0
        for ch, cls in zip(text, pattern):
            if cls == "L":
                if ch.isalpha():
                    out.append(ch)
                elif ch in letter_for_digit:
                    out.append(letter_for_digit[ch])
                    changes += 1
                else:
                    break
            else:
                if ch.isdigit():
                    out.append(ch)
                elif ch in digit_for_letter:
                    out.append(digit_for_letter[ch])
                    changes += 1
                else:
                    break
        else:
            candidates.append((changes, "".join(out)))
    if not candidates:
        return text, False
    fewest = min(c for c, _ in candidates)
    best = {t for c, t in candidates if c == fewest}
    if len(best) != 1:
        return text, False
    corrected = best.pop()
    return corrected, corrected != text


def otsu_threshold(img: np.ndarray) -> int:
    """Between-class-variance-maximizing split; lowest threshold wins ties."""
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    total = float(img.size)
    total_sum = float(np.dot(np.arange(256, dtype=np.float64), hist))
    best_t, best_var = 0, -1.0
    cum_w = 0.0
    cum_sum = 0.0
    for t in range(256):
        cum_w += hist[t]
        cum_sum += t * hist[t]
        w1 = total - cum_w
        if cum_w == 0.0 or w1 == 0.0:
            continue
        mu0 = cum_sum / cum_w
        mu1 = (total_sum - cum_sum) / w1
        var = cum_w * w1 * (mu0 - mu1) ** 2
        if var > best_var:
            best_var, best_t = var, t
    return best_t


def _ink_mask(img: np.ndarray) -> np.ndarray:
    """Boolean ink (dark-side) mask; Otsu-binarizes unless already binary."""
    values = np.unique(img)
    if np.all(np.isin(values, (0, 255))):
        return img == 0
    return img <= otsu_threshold(img)


def _segment_cells(ink: np.ndarray) -> list[tuple[int, int]]:
    """Column ranges of character cells: maximal runs of columns whose ink sum
    reaches 5% of the max column ink; runs narrower than 2 px are dropped."""
    col_ink = ink.sum(axis=0)
    max_ink = int(col_ink.max()) if col_ink.size else 0
    if max_ink == 0:
        return []
    solid = col_ink >= _SEGMENT_VALLEY_FRACTION * max_ink
    cells: list[tuple[int, int]] = []
    start = None
    for x, flag in enumerate(solid):
        if flag and start is None:
            start = x
        elif not flag and start is not None:
            if x - start >= _MIN_CELL_WIDTH:
                cells.append((start, x))
            start = None
    if start is not None and ink.shape[1] - start >= _MIN_CELL_WIDTH:
        cells.append((start, ink.shape[1]))
    return cells


def _main_ink_run(line_ink: np.ndarray) -> tuple[int, int]:
    """Longest consecutive run of lines holding at least 5% of the peak line
    ink (ties go to the earlier run). Lines outside the run, e.g. detached
    noise specks in a cell margin, never widen the crop."""
    peak = int(line_ink.max())
    min_ink = max(1, int(np.ceil(_SEGMENT_VALLEY_FRACTION * peak)))
    flags = line_ink >= min_ink
    best = (0, 0)
    start = None
    for i, flag in enumerate(list(flags) + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    return best


def _normalize_mask(mask: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Crop to the main ink body, then nearest-neighbor resize.

    The crop is the longest contiguous band of ink-bearing rows crossed with
    the longest band of ink-bearing columns; every glyph is one solid band in
    both axes, so on clean renders this is exactly the ink bounding box and
    the render-read loop stays exact, while stray specks in degraded cells
    cannot shear the glyph off its template."""
    y0, y1 = _main_ink_run(mask.sum(axis=1))
    x0, x1 = _main_ink_run(mask.sum(axis=0))
    cropped = mask[y0:y1, x0:x1]
    return nearest_resize(cropped, out_h, out_w)


class PlateRecognizer(Protocol):
    def recognize(self, img: np.ndarray) -> tuple[str, list[float]]:
        """Returns (text, per-character scores in [0,1]), aligned."""
        ...


class TemplateRecognizer:
    """Segment by projection profile, score cells against normalized glyph
    templates by the fraction of agreeing pixels, emit the argmax character
    (ties resolved by A-Z then 0-9 order)."""

    def __init__(self, atlas: GlyphAtlas):
        self.atlas = atlas
        self._templates = np.stack(
            [_normalize_mask(atlas.masks[ch], atlas.glyph_height, atlas.glyph_width) for ch in CHARSET]
        )
        self._area = float(atlas.glyph_height * atlas.glyph_width)

    def recognize(self, img: np.ndarray) -> tuple[str, list[float]]:
        if img.size == 0:
            raise EmptyImage("zero-size plate crop")
        if img.ndim != 2 or img.dtype != np.uint8:
            raise ValueError(f"expected HxW uint8 image, got {img.shape} {img.dtype}")
        ink = _ink_mask(img)
        cells = _segment_cells(ink)
        if not cells:
            raise NoCharactersFound("no character cells found")
        chars: list[str] = []
        scores: list[float] = []
        for x0, x1 in cells:
            cell = _normalize_mask(ink[:, x0:x1], self.atlas.glyph_height, self.atlas.glyph_width)
            agree = (cell[None, :, :] == self._templates).reshape(len(CHARSET), -1)
            cell_scores = agree.sum(axis=1) / self._area
            best = int(np.argmax(cell_scores))
            chars.append(CHARSET[best])
            scores.append(float(cell_scores[best]))
        return "".join(chars), scores


class ExternalProcessRecognizer:
    """Adapter for an out-of-process engine: for each plate, writes the crop
    as a PNG, sends its path on one line of the child's stdin, and reads the
    recognized text back as one line. Per-character scores are unknown and
    reported as 0.0."""

    def __init__(self, command: list[str]):
        self._proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )

    def recognize(self, img: np.ndarray) -> tuple[str, list[float]]:
        if img.size == 0:
            raise EmptyImage("zero-size plate crop")
        with tempfile.TemporaryDirectory(prefix="plateguard-ocr-") as tmp:
            path = Path(tmp) / "plate.png"
            save_png(path, img)
            assert self._proc.stdin is not None and self._proc.stdout is not None
            self._proc.stdin.write(str(path) + "\n")
            self._proc.stdin.flush()
            text = self._proc.stdout.readline().rstrip("\n")
        return text, [0.0] * len(text)

    def close(self) -> None:
        if self._proc.stdin is not None:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)


def read_plate(img: np.ndarray, recognizer: GlyphAtlas | PlateRecognizer) -> PlateReadResult:
    """Recognize, allowlist-filter (keeping scores aligned), correct by
    position, and parse. Raises NoCharactersFound/EmptyImage from the
    recognizer; a failed grammar parse is reported via parse_ok, not raised."""
    if isinstance(recognizer, GlyphAtlas):
        recognizer = TemplateRecognizer(recognizer)
    text, scores = recognizer.recognize(img)
    kept = [(c, s) for c, s in zip(text.upper(), scores) if c in ALLOWED_CHARS]
    raw = "".join(c for c, _ in kept)
    char_scores = [s for _, s in kept]
    corrected, _ = correct_by_position(raw)
    try:
        parsed: PlateNumber | None = parse_plate_format(corrected)
        parse_ok = True
    except FormatMismatch:
        parsed = None
        parse_ok = False
    return PlateReadResult(
        raw_text=raw,
        corrected_text=corrected,
        parsed=parsed,
        char_scores=char_scores,
        parse_ok=parse_ok,
    )
