"""Detection metrics (precision/recall, all-point-interpolated AP, mAP@.50,
mAP@.50-.95), exact-match OCR accuracy, and the preprocessing ablation runner.

Matching protocol: per class and per frame, predictions sorted by descending
confidence greedily claim the unmatched ground truth with the highest IoU at
or above the threshold. Classes without any ground truth are excluded from
mAP means rather than scored zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .detection_io import ClassLabel, FrameDetections
from .errors import PlateGuardError
from .geometry import iou
from .glyphs import GlyphAtlas
from .ocr import (
    EmptyImage,
    NoCharactersFound,
    TemplateRecognizer,
    filter_allowlist,
    read_plate,
)
from .preprocess import PreprocessConfig, bilateral_filter, clahe, preprocess_plate, to_grayscale

IOU_SWEEP = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))   # 0.50 .. 0.95


class NoGroundTruth(PlateGuardError):
    pass


class LengthMismatch(PlateGuardError):
    pass


class EmptyCorpus(PlateGuardError):
    pass


@dataclass
class MatchResult:
    """Per-class (confidence, is_true_positive) records plus GT counts.

    Records are collected frame by frame (confidence-descending within each
    frame), so the stable global sort used by AP has a deterministic
    tie-break: earlier frame, then within-frame rank."""

    records: dict[ClassLabel, list[tuple[float, bool]]] = field(default_factory=dict)
    gt_counts: dict[ClassLabel, int] = field(default_factory=dict)


def match_detections(
    preds: Iterable[FrameDetections],
    gts: Iterable[FrameDetections],
    iou_threshold: float,
) -> MatchResult:
    pred_by_frame = {f.frame_id: f for f in preds}
    gt_by_frame = {f.frame_id: f for f in gts}
    result = MatchResult()
    for label in ClassLabel:
        result.records[label] = []
        result.gt_counts[label] = 0
    for fid in sorted(set(pred_by_frame) | set(gt_by_frame)):
        frame_preds = pred_by_frame.get(fid)
        frame_gts = gt_by_frame.get(fid)
        for label in ClassLabel:
            gt_boxes = frame_gts.by_label(label) if frame_gts else []
            result.gt_counts[label] += len(gt_boxes)
            p = frame_preds.by_label(label) if frame_preds else []
            order = sorted(range(len(p)), key=lambda i: (-p[i].confidence, i))
            taken = [False] * len(gt_boxes)
            for i in order:
                best_j = -1
                best_iou = 0.0
                for j, gt in enumerate(gt_boxes):
                    if taken[j]:
                        continue
                    ov = iou(p[i].bbox, gt.bbox)
                    if ov >= iou_threshold and ov > best_iou:
                        best_iou, best_j = ov, j
                if best_j >= 0:
                    taken[best_j] = True
                    result.records[label].append((p[i].confidence, True))
                else:
                    result.records[label].append((p[i].confidence, False))
    return result


def average_precision(match: MatchResult, label: ClassLabel) -> float:
    """All-point interpolated AP: area under the precision envelope over
    recall. Raises NoGroundTruth when the class has no GT (undefined)."""
    n_gt = match.gt_counts.get(label, 0)
    if n_gt == 0:
        raise NoGroundTruth(f"no ground truth for {label.value}")
    records = match.records.get(label, [])
    if not records:
        return 0.0
    ordered = sorted(records, key=lambda r: -r[0])
    tp = np.cumsum([1 if hit else 0 for _, hit in ordered])
    fp = np.cumsum([0 if hit else 1 for _, hit in ordered])
    recall = tp / n_gt
    precision = tp / (tp + fp)
    # Precision envelope: at each point, the max precision at recall >= r.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recall, envelope):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return float(ap)


def precision_recall(match: MatchResult, label: ClassLabel) -> tuple[float, float]:
    n_gt = match.gt_counts.get(label, 0)
    if n_gt == 0:
        raise NoGroundTruth(f"no ground truth for {label.value}")
    records = match.records.get(label, [])
    tp = sum(1 for _, hit in records if hit)
    precision = tp / len(records) if records else 0.0
    return precision, tp / n_gt


@dataclass
class MapReport:
    per_class_ap50: dict[ClassLabel, float]
    map50: float
    map50_95: float


def map_suite(preds: Sequence[FrameDetections], gts: Sequence[FrameDetections]) -> MapReport:
    per_threshold_means: list[float] = []
    per_class_ap50: dict[ClassLabel, float] = {}
    for thr in IOU_SWEEP:
        match = match_detections(preds, gts, thr)
        aps: list[float] = []
        for label in ClassLabel:
            try:
                ap = average_precision(match, label)
            except NoGroundTruth:
                continue
            aps.append(ap)
            if thr == IOU_SWEEP[0]:
                per_class_ap50[label] = ap
        if not aps:
            raise NoGroundTruth("no class has any ground truth")
        per_threshold_means.append(sum(aps) / len(aps))
    return MapReport(
        per_class_ap50=per_class_ap50,
        map50=per_threshold_means[0],
        map50_95=sum(per_threshold_means) / len(per_threshold_means),
    )


def ocr_accuracy(pred_texts: Sequence[str], gt_texts: Sequence[str]) -> float:
    """Fraction of exact matches after allowlist normalization of both sides."""
    if len(pred_texts) != len(gt_texts):
        raise LengthMismatch(f"{len(pred_texts)} predictions vs {len(gt_texts)} truths")
    if not gt_texts:
        raise LengthMismatch("empty lists")
    hits = sum(
        1 for p, g in zip(pred_texts, gt_texts)
        if filter_allowlist(p) == filter_allowlist(g)
    )
    return hits / len(gt_texts)


ABLATION_STAGES = (
    "none",
    "grayscale",
    "grayscale+bilateral",
    "grayscale+bilateral+clahe",
    "full",
)


@dataclass(frozen=True)
class AblationRow:
    stage: str
    accuracy: float


def _stage_image(rgb: np.ndarray, stage: str, cfg: PreprocessConfig) -> np.ndarray:
    if stage == "none":
        # No preprocessing at all: the single-channel recognizer sees the
        # first channel of the raw crop.
        return rgb[:, :, 0]
    gray = to_grayscale(rgb)
    if stage == "grayscale":
        return gray
    smoothed = bilateral_filter(gray, cfg)
    if stage == "grayscale+bilateral":
        return smoothed
    if stage == "grayscale+bilateral+clahe":
        return clahe(smoothed, cfg)
    if stage == "full":
        return preprocess_plate(rgb, cfg)[0]
    raise ValueError(f"unknown stage: {stage!r}")


def run_ablation(
    corpus: Sequence[tuple[np.ndarray, str]],
    atlas: GlyphAtlas,
    cfg: PreprocessConfig,
) -> list[AblationRow]:
    """OCR accuracy after each cumulative preprocessing stage, in canonical
    order. Unreadable images count as wrong, never as errors."""
    if not corpus:
        raise EmptyCorpus("ablation corpus is empty")
    recognizer = TemplateRecognizer(atlas)
    truths = [text for _, text in corpus]
    rows: list[AblationRow] = []
    for stage in ABLATION_STAGES:
        preds: list[str] = []
        for rgb, _ in corpus:
            try:
                result = read_plate(_stage_image(rgb, stage, cfg), recognizer)
                preds.append(result.corrected_text)
            except (NoCharactersFound, EmptyImage):
                preds.append("")
        rows.append(AblationRow(stage, ocr_accuracy(preds, truths)))
    return rows
