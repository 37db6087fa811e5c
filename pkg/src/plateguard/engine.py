"""Per-frame violation rules: accessory-to-bike grouping, helmet and mirror
checks, plate association.

Gating regions (all fractions relative to the bike box, centers tested with
inclusive bounds):

* head region: full bike width, from ``y1 - head_region_up*h`` down to
  ``y1 + head_region_down*h`` (riders' heads usually sit above the box);
* mirror region: bike box widened by ``mirror_region_horizontal*w`` on each
  side, upper ``mirror_region_vertical_upper`` of the bike height.

Each helmet/no-helmet/mirror detection is assigned to at most one bike: the
gated candidate with the smallest center distance, earlier bike winning ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .detection_io import ClassLabel, Detection, FrameDetections
from .geometry import BBox, center_distance, iou

DEFAULT_CONFIDENCE_THRESHOLD = 0.610


@dataclass(frozen=True)
class EngineConfig:
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    min_mirrors: int = 1
    head_region_up: float = 0.6
    head_region_down: float = 0.4
    mirror_region_horizontal: float = 0.2
    mirror_region_vertical_upper: float = 0.6
    plate_distance_factor: float = 0.5
    # Optional per-class overrides of the global confidence threshold.
    class_confidence_thresholds: dict[ClassLabel, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ValueError(f"confidence_threshold out of [0,1]: {self.confidence_threshold}")
        if self.min_mirrors < 0:
            raise ValueError(f"min_mirrors must be >= 0: {self.min_mirrors}")
        for name in ("head_region_up", "head_region_down", "mirror_region_horizontal",
                     "mirror_region_vertical_upper", "plate_distance_factor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def threshold_for(self, label: ClassLabel) -> float:
        return self.class_confidence_thresholds.get(label, self.confidence_threshold)


class ViolationKind(str, Enum):
    NO_HELMET = "no_helmet"
    MISSING_MIRROR = "missing_mirror"


@dataclass
class ViolationFlag:
    kind: ViolationKind
    bike_bbox: BBox
    evidence: list[Detection] = field(default_factory=list)


@dataclass
class BikeGroup:
    bike: Detection
    helmets: list[Detection] = field(default_factory=list)
    no_helmets: list[Detection] = field(default_factory=list)
    mirrors: list[Detection] = field(default_factory=list)
    plate: Detection | None = None


def head_region(bike: BBox, cfg: EngineConfig) -> BBox:
    h = bike.height
    return BBox(bike.x1, bike.y1 - cfg.head_region_up * h, bike.x2, bike.y1 + cfg.head_region_down * h)


def mirror_region(bike: BBox, cfg: EngineConfig) -> BBox:
    w, h = bike.width, bike.height
    return BBox(
        bike.x1 - cfg.mirror_region_horizontal * w,
        bike.y1,
        bike.x2 + cfg.mirror_region_horizontal * w,
        bike.y1 + cfg.mirror_region_vertical_upper * h,
    )


def _assign_to_nearest(accessory: Detection, bikes: list[Detection], regions: list[BBox]) -> int | None:
    """Index of the nearest bike whose gating region contains the accessory
    center; earlier bike wins distance ties. None when no region matches."""
    cx, cy = accessory.bbox.center()
    best: int | None = None
    best_dist = 0.0
    for i, (bike, region) in enumerate(zip(bikes, regions)):
        if not region.contains_point(cx, cy):
            continue
        dist = center_distance(accessory.bbox, bike.bbox)
        if best is None or dist < best_dist:
            best, best_dist = i, dist
    return best


def group_by_bike(dets: FrameDetections, cfg: EngineConfig) -> list[BikeGroup]:
    """One group per bike, in input order. Accessories outside every gating
    region are left ungrouped (they still exist in the frame for annotation)."""
    bikes = dets.by_label(ClassLabel.BIKE)
    groups = [BikeGroup(bike=b) for b in bikes]
    if not groups:
        return []
    head_regions = [head_region(b.bbox, cfg) for b in bikes]
    mirror_regions = [mirror_region(b.bbox, cfg) for b in bikes]
    for det in dets.detections:
        if det.label in (ClassLabel.HELMET, ClassLabel.NO_HELMET):
            idx = _assign_to_nearest(det, bikes, head_regions)
            if idx is not None:
                target = groups[idx].helmets if det.label is ClassLabel.HELMET else groups[idx].no_helmets
                target.append(det)
        elif det.label is ClassLabel.MIRROR:
            idx = _assign_to_nearest(det, bikes, mirror_regions)
            if idx is not None:
                groups[idx].mirrors.append(det)
    return groups


def check_helmet(group: BikeGroup) -> ViolationFlag | None:
    """Flag when a no-helmet rider is detected, or when no headwear at all is
    found for the bike. An explicit no-helmet detection outranks a helmet on
    the same bike (rider/pillion case)."""
    if group.no_helmets:
        return ViolationFlag(ViolationKind.NO_HELMET, group.bike.bbox, list(group.no_helmets))
    if not group.helmets:
        return ViolationFlag(ViolationKind.NO_HELMET, group.bike.bbox, [])
    return None


def check_mirrors(group: BikeGroup, cfg: EngineConfig) -> ViolationFlag | None:
    if len(group.mirrors) < cfg.min_mirrors:
        return ViolationFlag(ViolationKind.MISSING_MIRROR, group.bike.bbox, list(group.mirrors))
    return None


def associate_plate(group: BikeGroup, plates: list[Detection], cfg: EngineConfig) -> Detection | None:
    """Best plate for a bike: max IoU among overlapping plates; otherwise the
    nearest plate within plate_distance_factor x bike diagonal. Ties go to the
    higher confidence, then to input order. Does not consume from `plates`;
    the caller enforces one-bike-per-plate."""
    bike = group.bike.bbox
    overlapping: list[tuple[float, float, int, Detection]] = []
    for i, plate in enumerate(plates):
        ov = iou(plate.bbox, bike)
        if ov > 0.0:
            overlapping.append((ov, plate.confidence, i, plate))
    if overlapping:
        # max IoU, then max confidence, then earliest input index
        overlapping.sort(key=lambda t: (-t[0], -t[1], t[2]))
        return overlapping[0][3]
    limit = cfg.plate_distance_factor * bike.diagonal()
    near: list[tuple[float, float, int, Detection]] = []
    for i, plate in enumerate(plates):
        dist = center_distance(plate.bbox, bike)
        if dist <= limit:
            near.append((dist, -plate.confidence, i, plate))
    if not near:
        return None
    near.sort(key=lambda t: (t[0], t[1], t[2]))
    return near[0][3]


def evaluate_frame(
    dets: FrameDetections, cfg: EngineConfig
) -> list[tuple[BikeGroup, list[ViolationFlag]]]:
    """Full per-frame rule pass: confidence filter, grouping, helmet/mirror
    checks, plate association (greedy over bikes in input order)."""
    kept = [d for d in dets.detections if d.confidence >= cfg.threshold_for(d.label)]
    filtered = FrameDetections(dets.frame_id, dets.width, dets.height, kept)
    groups = group_by_bike(filtered, cfg)
    plates = filtered.by_label(ClassLabel.NUMBER_PLATE)
    remaining = list(plates)
    results: list[tuple[BikeGroup, list[ViolationFlag]]] = []
    for group in groups:
        flags: list[ViolationFlag] = []
        helmet_flag = check_helmet(group)
        if helmet_flag is not None:
            flags.append(helmet_flag)
        mirror_flag = check_mirrors(group, cfg)
        if mirror_flag is not None:
            flags.append(mirror_flag)
        plate = associate_plate(group, remaining, cfg)
        if plate is not None:
            group.plate = plate
            remaining.remove(plate)
        results.append((group, flags))
    return results
