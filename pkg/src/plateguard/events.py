"""Violation events, the CSV log, and windowed deduplication.

CSV schema (exact column order, RFC-4180 quoting, LF endings):
timestamp,frame_id,violation_type,plate_text,plate_parsed,plate_confidence,
bike_x1,bike_y1,bike_x2,bike_y2,snapshot_path

Floats are written with repr() so parsing the log recovers every field
exactly; booleans are lowercase true/false.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO

from .engine import ViolationKind
from .errors import PlateGuardError
from .geometry import BBox

CSV_COLUMNS = [
    "timestamp", "frame_id", "violation_type", "plate_text", "plate_parsed",
    "plate_confidence", "bike_x1", "bike_y1", "bike_x2", "bike_y2", "snapshot_path",
]

DEDUP_GRID_PX = 32


class IoFailure(PlateGuardError):
    pass


@dataclass
class ViolationEvent:
    timestamp: str
    frame_id: int
    violation_type: ViolationKind
    plate_text: str
    plate_parsed: bool
    plate_confidence: float
    bike_bbox: BBox
    snapshot_path: str = ""


class ViolationLog:
    """Append-only CSV sink; the header is written on open, every row is
    flushed before the append returns."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            self._fh: IO[str] = open(self.path, "w", encoding="utf-8", newline="")
        except OSError as exc:
            raise IoFailure(f"cannot open log {path}: {exc}") from exc
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(CSV_COLUMNS)
        self._fh.flush()
        self.rows_written = 0

    def append(self, event: ViolationEvent) -> None:
        b = event.bike_bbox
        try:
            self._writer.writerow([
                event.timestamp,
                event.frame_id,
                event.violation_type.value,
                event.plate_text,
                "true" if event.plate_parsed else "false",
                repr(event.plate_confidence),
                repr(b.x1), repr(b.y1), repr(b.x2), repr(b.y2),
                event.snapshot_path,
            ])
            self._fh.flush()
        except OSError as exc:
            raise IoFailure(f"cannot append to log {self.path}: {exc}") from exc
        self.rows_written += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "ViolationLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_violation_log(path: str | Path) -> list[ViolationEvent]:
    events: list[ViolationEvent] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise IoFailure(f"{path}: unexpected CSV header {header}")
        for row in reader:
            if len(row) != len(CSV_COLUMNS):
                raise IoFailure(f"{path}: malformed row {row}")
            events.append(ViolationEvent(
                timestamp=row[0],
                frame_id=int(row[1]),
                violation_type=ViolationKind(row[2]),
                plate_text=row[3],
                plate_parsed=row[4] == "true",
                plate_confidence=float(row[5]),
                bike_bbox=BBox(float(row[6]), float(row[7]), float(row[8]), float(row[9])),
                snapshot_path=row[10],
            ))
    return events


def dedup_key(event: ViolationEvent) -> tuple:
    """Plate text when readable, otherwise the bike center quantized to a
    32 px grid."""
    if event.plate_text:
        return (event.violation_type, event.plate_text)
    cx, cy = event.bike_bbox.center()
    return (event.violation_type, int(math.floor(cx / DEDUP_GRID_PX)), int(math.floor(cy / DEDUP_GRID_PX)))


class Deduplicator:
    """Drops an event when one with the same key was logged fewer than
    `window` frames ago; a window of 0 keeps everything."""

    def __init__(self, window: int):
        if window < 0:
            raise ValueError("dedup window must be >= 0")
        self.window = window
        self._last_logged: dict[tuple, int] = {}

    def check(self, event: ViolationEvent) -> bool:
        """True = keep (and record), False = drop."""
        key = dedup_key(event)
        last = self._last_logged.get(key)
        if last is not None and event.frame_id - last < self.window:
            return False
        self._last_logged[key] = event.frame_id
        return True
