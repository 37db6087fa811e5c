"""plateguard: detector-agnostic traffic-violation pipeline.

Turns per-frame object detections (bike, helmet, no_helmet, mirror,
number_plate) into flagged violations, reads license plates from crops with a
from-scratch preprocessing + template-OCR + grammar-correction stack, logs
events to CSV with snapshots, and evaluates itself with standard detection
and OCR metrics.
"""

__version__ = "0.1.0"
