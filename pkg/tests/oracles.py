"""Naive reference implementations used as test oracles.

Everything here is written as literal double loops over the stated rules,
independently of the package's vectorized code paths. These are the ground
truth the implementation must match (bit-exactly for the raster kernels).
"""

from __future__ import annotations

import math

import numpy as np

from plateguard.detection_io import ClassLabel, Detection, FrameDetections
from plateguard.engine import EngineConfig


def reflect(i: int, n: int) -> int:
    """Mirror an index into [0, n): reflection without repeating the edge."""
    if n == 1:
        return 0
    period = 2 * n - 2
    i %= period
    return i if i < n else period - i


def naive_grayscale(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            r, g, b = (float(img[y, x, 0]), float(img[y, x, 1]), float(img[y, x, 2]))
            luma = 0.299 * r + 0.587 * g + 0.114 * b
            out[y, x] = min(255, int(math.floor(luma + 0.5)))
    return out


def naive_bilateral(img: np.ndarray, radius: int, sigma_space: float, sigma_color: float) -> np.ndarray:
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            center = int(img[y, x])
            num = 0.0
            den = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy = reflect(y + dy, h)
                    xx = reflect(x + dx, w)
                    val = int(img[yy, xx])
                    ws = math.exp(-(dy * dy + dx * dx) / (2.0 * sigma_space * sigma_space))
                    d = abs(center - val)
                    wc = math.exp(-(d * d) / (2.0 * sigma_color * sigma_color))
                    weight = ws * wc
                    num += weight * float(val)
                    den += weight
            out[y, x] = int(math.floor(num / den + 0.5))
    return out


def naive_gaussian_blur(img: np.ndarray, radius: int, sigma_space: float) -> np.ndarray:
    """Same spatial kernel as the bilateral, color term removed."""
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            num = 0.0
            den = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy = reflect(y + dy, h)
                    xx = reflect(x + dx, w)
                    ws = math.exp(-(dy * dy + dx * dx) / (2.0 * sigma_space * sigma_space))
                    num += ws * float(img[yy, xx])
                    den += ws
            out[y, x] = int(math.floor(num / den + 0.5))
    return out


def naive_clahe_mapping(hist: list[int], area: int, clip_factor: float) -> list[float]:
    clip_count = max(1.0, math.floor(clip_factor * area / 256.0 + 0.5))
    clipped = [min(float(hv), clip_count) for hv in hist]
    excess = float(area) - sum(clipped)
    redistributed = [cv + excess / 256.0 for cv in clipped]
    mapping = []
    running = 0.0
    for v in range(256):
        running += redistributed[v]
        cdf = running / float(area)
        mapping.append(min(255.0, math.floor(255.0 * cdf + 0.5)))
    return mapping


def naive_clahe(img: np.ndarray, tiles_x: int, tiles_y: int, clip_factor: float) -> np.ndarray:
    h, w = img.shape
    xs = [(j * w) // tiles_x for j in range(tiles_x + 1)]
    ys = [(i * h) // tiles_y for i in range(tiles_y + 1)]
    mappings: list[list[list[float]]] = []
    for i in range(tiles_y):
        row = []
        for j in range(tiles_x):
            tile = img[ys[i]:ys[i + 1], xs[j]:xs[j + 1]]
            hist = [0] * 256
            for v in tile.ravel():
                hist[int(v)] += 1
            row.append(naive_clahe_mapping(hist, tile.size, clip_factor))
        mappings.append(row)
    cx = [(xs[j] + xs[j + 1] - 1) / 2.0 for j in range(tiles_x)]
    cy = [(ys[i] + ys[i + 1] - 1) / 2.0 for i in range(tiles_y)]

    def axis(coord: float, centers: list[float], count: int) -> tuple[int, int, float]:
        if count == 1:
            return 0, 0, 0.0
        lo = 0
        for j in range(count):
            if centers[j] <= coord:
                lo = j
        lo = min(lo, count - 2)
        frac = (coord - centers[lo]) / (centers[lo + 1] - centers[lo])
        return lo, lo + 1, min(1.0, max(0.0, frac))

    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        i0, i1, fy = axis(float(y), cy, tiles_y)
        for x in range(w):
            j0, j1, fx = axis(float(x), cx, tiles_x)
            v = int(img[y, x])
            m00 = mappings[i0][j0][v]
            m01 = mappings[i0][j1][v]
            m10 = mappings[i1][j0][v]
            m11 = mappings[i1][j1][v]
            blended = (1.0 - fy) * ((1.0 - fx) * m00 + fx * m01) + fy * ((1.0 - fx) * m10 + fx * m11)
            out[y, x] = int(math.floor(blended + 0.5))
    return out


def naive_plain_he(img: np.ndarray) -> np.ndarray:
    hist = [0] * 256
    for v in img.ravel():
        hist[int(v)] += 1
    total = img.size
    mapping = []
    running = 0
    for v in range(256):
        running += hist[v]
        mapping.append(min(255, int(math.floor(255.0 * (running / total) + 0.5))))
    out = np.zeros_like(img)
    for y in range(img.shape[0]):
        for x in range(img.shape[1]):
            out[y, x] = mapping[int(img[y, x])]
    return out


def naive_adaptive_threshold(img: np.ndarray, block: int, c: float) -> np.ndarray:
    h, w = img.shape
    r = block // 2
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            total = 0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    total += int(img[reflect(y + dy, h), reflect(x + dx, w)])
            mean = total / float(block * block)
            out[y, x] = 255 if float(img[y, x]) > mean - c else 0
    return out


def naive_erode(binary: np.ndarray, kernel: int) -> np.ndarray:
    h, w = binary.shape
    r_lo = kernel // 2
    r_hi = kernel - 1 - r_lo
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            keep = True
            for dy in range(-r_lo, r_hi + 1):
                for dx in range(-r_lo, r_hi + 1):
                    if binary[reflect(y + dy, h), reflect(x + dx, w)] != 255:
                        keep = False
            out[y, x] = 255 if keep else 0
    return out


def naive_dilate(binary: np.ndarray, kernel: int) -> np.ndarray:
    h, w = binary.shape
    r_lo = kernel // 2
    r_hi = kernel - 1 - r_lo
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            hit = False
            for dy in range(-r_lo, r_hi + 1):
                for dx in range(-r_lo, r_hi + 1):
                    if binary[reflect(y + dy, h), reflect(x + dx, w)] == 255:
                        hit = True
            out[y, x] = 255 if hit else 0
    return out


def naive_open(binary: np.ndarray, kernel: int) -> np.ndarray:
    return naive_dilate(naive_erode(binary, kernel), kernel)


def naive_close(binary: np.ndarray, kernel: int) -> np.ndarray:
    return naive_erode(naive_dilate(binary, kernel), kernel)


def pixel_count_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    """IoU of integer-coordinate boxes by counting unit pixels."""
    def inside(px: int, py: int, box) -> bool:
        return box[0] <= px < box[2] and box[1] <= py < box[3]

    x_lo = min(a[0], b[0])
    x_hi = max(a[2], b[2])
    y_lo = min(a[1], b[1])
    y_hi = max(a[3], b[3])
    inter = union = 0
    for px in range(x_lo, x_hi):
        for py in range(y_lo, y_hi):
            in_a, in_b = inside(px, py, a), inside(px, py, b)
            inter += in_a and in_b
            union += in_a or in_b
    return inter / union if union else 0.0


# ---------------------------------------------------------------------------
# Violation-engine oracle: an independent straight-line re-statement of the
# grouping/flagging/association rules, structured around accessories rather
# than bikes.
# ---------------------------------------------------------------------------

def _center(det: Detection) -> tuple[float, float]:
    b = det.bbox
    return (b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0


def _dist(a: Detection, b: Detection) -> float:
    (ax, ay), (bx, by) = _center(a), _center(b)
    return math.sqrt((ax - bx) ** 2 + (ay - by) ** 2)


def _box_iou(a: Detection, b: Detection) -> float:
    ba, bb = a.bbox, b.bbox
    ix = min(ba.x2, bb.x2) - max(ba.x1, bb.x1)
    iy = min(ba.y2, bb.y2) - max(ba.y1, bb.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (ba.x2 - ba.x1) * (ba.y2 - ba.y1)
    area_b = (bb.x2 - bb.x1) * (bb.y2 - bb.y1)
    return inter / (area_a + area_b - inter)


def oracle_evaluate_frame(dets: FrameDetections, cfg: EngineConfig) -> list[dict]:
    """Returns, per bike in input order, a dict with the bike detection, its
    accessory lists, its plate (or None), and the flag kinds in order."""
    def threshold(label: ClassLabel) -> float:
        return cfg.class_confidence_thresholds.get(label, cfg.confidence_threshold)

    kept = [d for d in dets.detections if d.confidence >= threshold(d.label)]
    bikes = [d for d in kept if d.label is ClassLabel.BIKE]

    def in_head_region(acc: Detection, bike: Detection) -> bool:
        bx, by = bike.bbox, bike.bbox
        h = by.y2 - by.y1
        cx, cy = _center(acc)
        return (bx.x1 <= cx <= bx.x2
                and by.y1 - cfg.head_region_up * h <= cy <= by.y1 + cfg.head_region_down * h)

    def in_mirror_region(acc: Detection, bike: Detection) -> bool:
        b = bike.bbox
        w = b.x2 - b.x1
        h = b.y2 - b.y1
        cx, cy = _center(acc)
        return (b.x1 - cfg.mirror_region_horizontal * w <= cx <= b.x2 + cfg.mirror_region_horizontal * w
                and b.y1 <= cy <= b.y1 + cfg.mirror_region_vertical_upper * h)

    groups = [
        {"bike": b, "helmets": [], "no_helmets": [], "mirrors": [], "plate": None, "flags": []}
        for b in bikes
    ]
    for det in kept:
        if det.label in (ClassLabel.HELMET, ClassLabel.NO_HELMET):
            gate = in_head_region
        elif det.label is ClassLabel.MIRROR:
            gate = in_mirror_region
        else:
            continue
        best = None
        best_dist = None
        for i, bike in enumerate(bikes):
            if not gate(det, bike):
                continue
            d = _dist(det, bike)
            if best is None or d < best_dist:
                best, best_dist = i, d
        if best is not None:
            key = {"helmet": "helmets", "no_helmet": "no_helmets", "mirror": "mirrors"}[det.label.value]
            groups[best][key].append(det)

    remaining = [d for d in kept if d.label is ClassLabel.NUMBER_PLATE]
    for g in groups:
        if g["no_helmets"] or (not g["helmets"] and not g["no_helmets"]):
            g["flags"].append("no_helmet")
        if len(g["mirrors"]) < cfg.min_mirrors:
            g["flags"].append("missing_mirror")

        chosen = None
        best_iou = 0.0
        best_conf = 0.0
        for p in remaining:
            ov = _box_iou(p, g["bike"])
            if ov > 0.0 and (ov > best_iou or (ov == best_iou and p.confidence > best_conf)):
                chosen, best_iou, best_conf = p, ov, p.confidence
        if chosen is None:
            b = g["bike"].bbox
            limit = cfg.plate_distance_factor * math.sqrt((b.x2 - b.x1) ** 2 + (b.y2 - b.y1) ** 2)
            best_dist = None
            for p in remaining:
                d = _dist(p, g["bike"])
                if d <= limit and (best_dist is None or d < best_dist
                                   or (d == best_dist and p.confidence > best_conf)):
                    chosen, best_dist, best_conf = p, d, p.confidence
        if chosen is not None:
            g["plate"] = chosen
            remaining.remove(chosen)
    return groups


# ---------------------------------------------------------------------------
# Average-precision oracle: literal all-point interpolation over explicitly
# enumerated PR points, plus a matching pass written the slow way.
# ---------------------------------------------------------------------------

def oracle_match_class(preds: list[Detection], gts: list[Detection], thr: float) -> list[tuple[float, bool]]:
    """Greedy highest-IoU matching for a single class within a single frame."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    taken = set()
    records = []
    for i in order:
        best_j, best_iou = None, 0.0
        for j, gt in enumerate(gts):
            if j in taken:
                continue
            ov = _box_iou(preds[i], gt)
            if ov >= thr and ov > best_iou:
                best_j, best_iou = j, ov
        if best_j is not None:
            taken.add(best_j)
            records.append((preds[i].confidence, True))
        else:
            records.append((preds[i].confidence, False))
    return records


def oracle_ap(records: list[tuple[float, bool]], n_gt: int) -> float:
    if n_gt == 0:
        raise ValueError("undefined AP")
    if not records:
        return 0.0
    ordered = sorted(records, key=lambda r: -r[0])
    points = []
    tp = fp = 0
    for _, hit in ordered:
        if hit:
            tp += 1
        else:
            fp += 1
        points.append((tp / n_gt, tp / (tp + fp)))
    ap = 0.0
    prev_r = 0.0
    for r in sorted({p[0] for p in points}):
        if r <= prev_r:
            continue
        p_max = max(p for rr, p in points if rr >= r)
        ap += (r - prev_r) * p_max
        prev_r = r
    return ap


def oracle_map_suite(pred_frames: list[FrameDetections], gt_frames: list[FrameDetections]):
    """(per-class ap50, map50, map50_95) with zero-GT classes excluded."""
    thresholds = [0.50 + 0.05 * i for i in range(10)]
    per_class_ap50 = {}
    per_thr_means = []
    frame_ids = sorted({f.frame_id for f in pred_frames} | {f.frame_id for f in gt_frames})
    preds_by = {f.frame_id: f for f in pred_frames}
    gts_by = {f.frame_id: f for f in gt_frames}
    for t_index, thr in enumerate(thresholds):
        aps = []
        for label in ClassLabel:
            n_gt = sum(len(gts_by[fid].by_label(label)) for fid in frame_ids if fid in gts_by)
            if n_gt == 0:
                continue
            records = []
            for fid in frame_ids:
                p = preds_by[fid].by_label(label) if fid in preds_by else []
                g = gts_by[fid].by_label(label) if fid in gts_by else []
                records.extend(oracle_match_class(p, g, thr))
            ap = oracle_ap(records, n_gt)
            aps.append(ap)
            if t_index == 0:
                per_class_ap50[label] = ap
        per_thr_means.append(sum(aps) / len(aps))
    return per_class_ap50, per_thr_means[0], sum(per_thr_means) / len(per_thr_means)
