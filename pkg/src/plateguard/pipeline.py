"""Frame-stream processing: evaluate each frame's detections, OCR plates of
violating bikes, deduplicate, log to CSV, write snapshots and annotated
frames.

The clock is injected so runs are reproducible: with --fixed-clock and the
same inputs, two runs produce byte-identical CSV, snapshots, and annotated
frames.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .annotate import annotate_frame
from .config import RunConfig
from .detection_io import FrameDetections, read_detections
from .engine import BikeGroup, evaluate_frame
from .errors import PlateGuardError
from .events import Deduplicator, IoFailure, ViolationEvent, ViolationLog
from .geometry import BBox, ClippedToDegenerate, expand
from .glyphs import build_atlas
from .imgio import load_png, save_png
from .ocr import TemplateRecognizer, read_plate
from .preprocess import preprocess_plate

log = logging.getLogger("plateguard")

SNAPSHOT_EXPAND = 0.2


class InputMismatch(PlateGuardError):
    pass


class Clock:
    def now(self) -> str:
        return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class FixedClock(Clock):
    def __init__(self, timestamp: str):
        self.timestamp = timestamp

    def now(self) -> str:
        return self.timestamp


@dataclass
class RunSummary:
    frames_processed: int
    violations_logged: int
    elapsed_seconds: float
    fps: float


def _list_frame_images(frames_dir: Path) -> dict[int, Path]:
    frames: dict[int, Path] = {}
    if not frames_dir.is_dir():
        return frames
    for path in sorted(frames_dir.iterdir()):
        m = re.fullmatch(r"(\d+)\.png", path.name)
        if not m:
            continue
        fid = int(m.group(1))
        if fid in frames:
            raise InputMismatch(f"duplicate images for frame {fid}: {frames[fid].name}, {path.name}")
        frames[fid] = path
    return frames


def _crop(img: np.ndarray, box: BBox) -> np.ndarray:
    h, w = img.shape[:2]
    x1 = max(0, int(np.floor(box.x1)))
    y1 = max(0, int(np.floor(box.y1)))
    x2 = min(w, int(np.ceil(box.x2)))
    y2 = min(h, int(np.ceil(box.y2)))
    return img[y1:y2, x1:x2]


def _read_group_plate(group: BikeGroup, frame_img: np.ndarray | None, cfg: RunConfig,
                      recognizer: TemplateRecognizer) -> tuple[str, bool, float]:
    """(plate_text, parsed, mean char score); empty text when there is no
    associated plate, no frame pixels, or nothing readable in the crop."""
    if group.plate is None or frame_img is None:
        return "", False, 0.0
    crop = _crop(frame_img, group.plate.bbox)
    if crop.size == 0:
        return "", False, 0.0
    try:
        processed, _ = preprocess_plate(crop, cfg.preprocess)
        result = read_plate(processed, recognizer)
    except PlateGuardError as exc:   # NoCharactersFound, ImageTooSmall, ...
        log.debug("frame %s: plate read failed: %s", group.plate.frame_id, exc)
        return "", False, 0.0
    confidence = sum(result.char_scores) / len(result.char_scores) if result.char_scores else 0.0
    return result.corrected_text, result.parse_ok, confidence


def process_stream(frames_dir: str | Path, detections_path: str | Path,
                   cfg: RunConfig, out_dir: str | Path, clock: Clock | None = None) -> RunSummary:
    frames_dir = Path(frames_dir)
    out = Path(out_dir)
    clock = clock or (FixedClock(cfg.fixed_clock) if cfg.fixed_clock else Clock())
    try:
        (out / "annotated").mkdir(parents=True, exist_ok=True)
        (out / "snapshots").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output dir {out}: {exc}") from exc

    with open(detections_path, "r", encoding="utf-8") as fh:
        width, height, frame_iter = read_detections(fh)
        det_frames = {f.frame_id: f for f in frame_iter}

    image_paths = _list_frame_images(frames_dir)
    if cfg.strict:
        missing = sorted(set(det_frames) - set(image_paths))
        if missing:
            raise InputMismatch(f"detections reference frames without images: {missing[:10]}")

    recognizer = TemplateRecognizer(build_atlas())
    dedup = Deduplicator(cfg.dedup_window)
    logged = 0
    frame_ids = sorted(set(det_frames) | set(image_paths))

    start = time.perf_counter()
    with ViolationLog(out / "violations.csv") as sink:
        for fid in frame_ids:
            dets = det_frames.get(fid) or FrameDetections(fid, width, height)
            filtered = _apply_thresholds(dets, cfg)
            results = evaluate_frame(filtered, cfg.engine)
            all_flags = [flag for _, flags in results for flag in flags]

            frame_img = load_png(image_paths[fid]) if fid in image_paths else None
            annotated = None
            if frame_img is not None:
                annotated = annotate_frame(frame_img, filtered.detections, all_flags)

            seq: dict[tuple[int, str], int] = {}
            for group, flags in results:
                if not flags:
                    continue
                plate_text, plate_parsed, plate_conf = _read_group_plate(
                    group, frame_img, cfg, recognizer)
                for flag in flags:
                    event = ViolationEvent(
                        timestamp=clock.now(),
                        frame_id=fid,
                        violation_type=flag.kind,
                        plate_text=plate_text,
                        plate_parsed=plate_parsed,
                        plate_confidence=plate_conf,
                        bike_bbox=group.bike.bbox,
                    )
                    if not dedup.check(event):
                        continue
                    if annotated is not None:
                        k = (fid, flag.kind.value)
                        n = seq.get(k, 0)
                        seq[k] = n + 1
                        snap_name = f"{fid}_{flag.kind.value}_{n}.png"
                        _write_snapshot(annotated, group.bike.bbox, out / "snapshots" / snap_name)
                        event.snapshot_path = f"snapshots/{snap_name}"
                    sink.append(event)
                    logged += 1
            if annotated is not None:
                try:
                    save_png(out / "annotated" / f"{fid:06d}.png", annotated)
                except OSError as exc:
                    raise IoFailure(f"cannot write annotated frame {fid}: {exc}") from exc
    elapsed = time.perf_counter() - start
    n = len(frame_ids)
    return RunSummary(
        frames_processed=n,
        violations_logged=logged,
        elapsed_seconds=elapsed,
        fps=n / elapsed if elapsed > 0 else 0.0,
    )


def _apply_thresholds(dets: FrameDetections, cfg: RunConfig) -> FrameDetections:
    kept = [d for d in dets.detections if d.confidence >= cfg.engine.threshold_for(d.label)]
    return FrameDetections(dets.frame_id, dets.width, dets.height, kept)


def _write_snapshot(annotated: np.ndarray, bike: BBox, path: Path) -> None:
    h, w = annotated.shape[:2]
    try:
        region = expand(bike, SNAPSHOT_EXPAND, SNAPSHOT_EXPAND, SNAPSHOT_EXPAND,
                        SNAPSHOT_EXPAND, w, h)
    except ClippedToDegenerate:
        region = bike
    crop = _crop(annotated, region)
    try:
        save_png(path, crop)
    except OSError as exc:
        raise IoFailure(f"cannot write snapshot {path}: {exc}") from exc
