"""Class taxonomy and the recorded-detections wire format.

A detections file is UTF-8, line-delimited JSON. The first line is a header:

    {"format":"plateguard-detections-v1","width":W,"height":H}

and every following line is one detection:

    {"frame_id":n,"class":"<label>","bbox":[x1,y1,x2,y2],"confidence":c}

Records must be sorted by frame_id (non-decreasing). Boxes that extend past
the frame are clipped on ingest; boxes entirely outside it are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, TextIO

from .errors import PlateGuardError
from .geometry import BBox

FORMAT_NAME = "plateguard-detections-v1"


class MalformedRecord(PlateGuardError):
    pass


class UnknownClass(PlateGuardError):
    pass


class InvalidGeometry(PlateGuardError):
    pass


class InvalidConfidence(PlateGuardError):
    pass


class ClassLabel(str, Enum):
    BIKE = "bike"
    HELMET = "helmet"
    NO_HELMET = "no_helmet"
    MIRROR = "mirror"
    NUMBER_PLATE = "number_plate"

    @classmethod
    def parse(cls, value: str) -> "ClassLabel":
        try:
            return cls(value)
        except ValueError:
            raise UnknownClass(f"unknown class label: {value!r}") from None


@dataclass(frozen=True)
class Detection:
    frame_id: int
    label: ClassLabel
    bbox: BBox
    confidence: float

    def __post_init__(self) -> None:
        if self.frame_id < 0:
            raise MalformedRecord(f"negative frame_id: {self.frame_id}")
        if not (0.0 <= self.confidence <= 1.0):
            raise InvalidConfidence(f"confidence out of [0,1]: {self.confidence}")


@dataclass
class FrameDetections:
    """All detections of one frame, in file order, plus the frame dimensions."""

    frame_id: int
    width: int
    height: int
    detections: list[Detection] = field(default_factory=list)

    def __post_init__(self) -> None:
        for d in self.detections:
            if d.frame_id != self.frame_id:
                raise ValueError(f"detection frame {d.frame_id} != frame {self.frame_id}")

    def by_label(self, label: ClassLabel) -> list[Detection]:
        return [d for d in self.detections if d.label is label]


def _clip_bbox(x1: float, y1: float, x2: float, y2: float, width: int, height: int) -> BBox:
    if x2 <= x1 or y2 <= y1:
        raise InvalidGeometry(f"degenerate bbox: [{x1},{y1},{x2},{y2}]")
    cx1 = max(0.0, min(x1, float(width)))
    cx2 = max(0.0, min(x2, float(width)))
    cy1 = max(0.0, min(y1, float(height)))
    cy2 = max(0.0, min(y2, float(height)))
    if cx2 <= cx1 or cy2 <= cy1:
        raise InvalidGeometry(f"bbox entirely outside {width}x{height} frame: [{x1},{y1},{x2},{y2}]")
    return BBox(cx1, cy1, cx2, cy2)


def parse_header_line(line: str) -> tuple[int, int]:
    """Returns (width, height) from the file header line."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"header is not valid JSON: {exc}") from None
    if not isinstance(obj, dict) or set(obj) != {"format", "width", "height"}:
        raise MalformedRecord(f"header must have exactly format/width/height: {line.strip()!r}")
    if obj["format"] != FORMAT_NAME:
        raise MalformedRecord(f"unsupported format: {obj['format']!r}")
    w, h = obj["width"], obj["height"]
    if not (isinstance(w, int) and isinstance(h, int)) or w <= 0 or h <= 0:
        raise MalformedRecord(f"bad frame dimensions: {w}x{h}")
    return w, h


def parse_detection_line(line: str, frame_width: int, frame_height: int) -> Detection:
    """Parse and validate one record line; clips the bbox to the frame."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"record is not valid JSON: {exc}") from None
    if not isinstance(obj, dict) or set(obj) != {"frame_id", "class", "bbox", "confidence"}:
        raise MalformedRecord(f"record must have exactly frame_id/class/bbox/confidence: {line.strip()!r}")
    frame_id = obj["frame_id"]
    if not isinstance(frame_id, int) or frame_id < 0:
        raise MalformedRecord(f"bad frame_id: {frame_id!r}")
    label = ClassLabel.parse(obj["class"]) if isinstance(obj["class"], str) else None
    if label is None:
        raise MalformedRecord(f"class must be a string: {obj['class']!r}")
    bbox = obj["bbox"]
    if not (isinstance(bbox, list) and len(bbox) == 4 and all(isinstance(v, (int, float)) for v in bbox)):
        raise MalformedRecord(f"bbox must be [x1,y1,x2,y2]: {bbox!r}")
    conf = obj["confidence"]
    if not isinstance(conf, (int, float)):
        raise MalformedRecord(f"confidence must be a number: {conf!r}")
    if not (0.0 <= conf <= 1.0):
        raise InvalidConfidence(f"confidence out of [0,1]: {conf}")
    box = _clip_bbox(float(bbox[0]), float(bbox[1]), float(bbox[2]), float(bbox[3]), frame_width, frame_height)
    return Detection(frame_id=frame_id, label=label, bbox=box, confidence=float(conf))


def serialize_detection(det: Detection) -> str:
    b = det.bbox
    return json.dumps(
        {
            "frame_id": det.frame_id,
            "class": det.label.value,
            "bbox": [b.x1, b.y1, b.x2, b.y2],
            "confidence": det.confidence,
        },
        separators=(",", ":"),
    )


def serialize_header(width: int, height: int) -> str:
    return json.dumps({"format": FORMAT_NAME, "width": width, "height": height}, separators=(",", ":"))


def read_detections(stream: TextIO) -> tuple[int, int, Iterator[FrameDetections]]:
    """Read a detections stream: returns (width, height, frame iterator).

    Frames are yielded in file order; frame ids absent from the file yield
    nothing. Out-of-order records raise MalformedRecord.
    """
    header = stream.readline()
    if not header.strip():
        raise MalformedRecord("empty detections file (missing header)")
    width, height = parse_header_line(header)

    def frames() -> Iterator[FrameDetections]:
        current: FrameDetections | None = None
        last_id = -1
        for lineno, line in enumerate(stream, start=2):
            if not line.strip():
                continue
            det = parse_detection_line(line, width, height)
            if det.frame_id < last_id:
                raise MalformedRecord(
                    f"line {lineno}: frame_id {det.frame_id} after {last_id} (file must be sorted)"
                )
            last_id = det.frame_id
            if current is None or det.frame_id != current.frame_id:
                if current is not None:
                    yield current
                current = FrameDetections(det.frame_id, width, height)
            current.detections.append(det)
        if current is not None:
            yield current

    return width, height, frames()


def write_detections(stream: TextIO, width: int, height: int, detections: Iterable[Detection]) -> None:
    stream.write(serialize_header(width, height) + "\n")
    for det in detections:
        stream.write(serialize_detection(det) + "\n")


def filter_by_confidence(dets: FrameDetections, threshold: float) -> FrameDetections:
    """Keep detections with confidence >= threshold (boundary kept), order preserved."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold out of [0,1]: {threshold}")
    kept = [d for d in dets.detections if d.confidence >= threshold]
    return FrameDetections(dets.frame_id, dets.width, dets.height, kept)
