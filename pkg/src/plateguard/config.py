"""Run configuration and the flat `key = value` config-file format.

Keys mirror the engine/preprocess/run field names; per-class confidence
overrides use `confidence_threshold_<class>`. Unknown keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .detection_io import ClassLabel
from .engine import EngineConfig
from .errors import PlateGuardError
from .preprocess import PreprocessConfig


class ConfigError(PlateGuardError):
    pass


@dataclass
class RunConfig:
    engine: EngineConfig = field(default_factory=EngineConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    dedup_window: int = 50
    output_dir: str | None = None
    fixed_clock: str | None = None
    strict: bool = False

    def __post_init__(self) -> None:
        if self.dedup_window < 0:
            raise ConfigError("dedup_window must be >= 0")


_ENGINE_FLOAT_KEYS = (
    "confidence_threshold", "head_region_up", "head_region_down",
    "mirror_region_horizontal", "mirror_region_vertical_upper", "plate_distance_factor",
)
_PRE_FLOAT_KEYS = (
    "sigma_space", "sigma_color", "clahe_clip", "binarize_contrast_threshold", "adaptive_c",
)
_PRE_INT_KEYS = (
    "bilateral_radius", "clahe_tiles_x", "clahe_tiles_y", "adaptive_block", "morph_kernel",
)


def _parse_bool(key: str, value: str) -> bool:
    if value == "true":
        return True
    if value == "false":
        return False
    raise ConfigError(f"{key}: expected true or false, got {value!r}")


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    engine_kwargs: dict = {}
    class_thresholds = dict(cfg.engine.class_confidence_thresholds)
    pre_kwargs: dict = {}
    run_kwargs: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in _ENGINE_FLOAT_KEYS:
                engine_kwargs[key] = float(value)
            elif key == "min_mirrors":
                engine_kwargs[key] = int(value)
            elif key.startswith("confidence_threshold_"):
                label = ClassLabel.parse(key[len("confidence_threshold_"):])
                class_thresholds[label] = float(value)
            elif key in _PRE_FLOAT_KEYS:
                pre_kwargs[key] = float(value)
            elif key in _PRE_INT_KEYS:
                pre_kwargs[key] = int(value)
            elif key == "morph_op":
                pre_kwargs[key] = value
            elif key == "dedup_window":
                run_kwargs[key] = int(value)
            elif key in ("output_dir", "fixed_clock"):
                run_kwargs[key] = value
            elif key == "strict":
                run_kwargs[key] = _parse_bool(key, value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except (ValueError, PlateGuardError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    try:
        engine = replace(cfg.engine, class_confidence_thresholds=class_thresholds, **engine_kwargs)
        preprocess = replace(cfg.preprocess, **pre_kwargs)
        return replace(cfg, engine=engine, preprocess=preprocess, **run_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base)
