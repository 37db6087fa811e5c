"""Command-line surface.

Subcommands:
  process  --frames DIR --detections FILE --out DIR [--config FILE]
           [--fixed-clock ISO8601] [--strict]
  ablate   --corpus DIR --out FILE
  eval     --pred FILE --truth FILE [--out FILE]
  synth plates --n N --seed S --out DIR [--scale K]
  synth scenes --n N --seed S --out DIR [--width W] [--height H] [--no-frames]

PLATEGUARD_LOG (quiet|info|debug) controls diagnostics on stderr; results go
to stdout and to files only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .detection_io import ClassLabel, read_detections
from .errors import PlateGuardError
from .glyphs import load_atlas
from .imgio import load_png
from .metrics import NoGroundTruth, map_suite, match_detections, precision_recall, run_ablation
from .pipeline import FixedClock, process_stream
from .synth import write_plate_corpus, write_scene_corpus

log = logging.getLogger("plateguard")

_LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    name = os.environ.get("PLATEGUARD_LOG", "quiet")
    if name not in _LOG_LEVELS:
        raise ConfigError(f"PLATEGUARD_LOG must be one of {sorted(_LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(stream=sys.stderr, level=_LOG_LEVELS[name],
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plateguard")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("process", help="run the violation pipeline on a frame stream")
    p.add_argument("--frames", required=True, help="directory of <frame_id>.png images")
    p.add_argument("--detections", required=True, help="detections file (plateguard-detections-v1)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--fixed-clock", help="ISO-8601 timestamp to stamp every event with")
    p.add_argument("--strict", action="store_true",
                   help="fail when detections reference frames without images")

    a = sub.add_parser("ablate", help="preprocessing ablation on a plate corpus")
    a.add_argument("--corpus", required=True, help="corpus dir from `synth plates`")
    a.add_argument("--out", required=True, help="machine-readable JSONL output file")
    a.add_argument("--config", help="flat key = value config file")

    e = sub.add_parser("eval", help="detection metrics: predictions vs ground truth")
    e.add_argument("--pred", required=True, help="predictions in detections format")
    e.add_argument("--truth", required=True, help="ground truth in detections format")
    e.add_argument("--out", help="optional JSONL metrics record file")

    s = sub.add_parser("synth", help="generate synthetic corpora")
    ssub = s.add_subparsers(dest="what", required=True)
    sp = ssub.add_parser("plates", help="degraded plate images with truth texts")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--scale", type=int, default=2, help="glyph atlas scale factor")
    sc = ssub.add_parser("scenes", help="detection scenes with truth and frame images")
    sc.add_argument("--n", type=int, required=True)
    sc.add_argument("--seed", type=int, required=True)
    sc.add_argument("--out", required=True)
    sc.add_argument("--width", type=int, default=1280)
    sc.add_argument("--height", type=int, default=720)
    sc.add_argument("--no-frames", action="store_true", help="skip frame image rendering")
    return parser


def _load_run_config(path: str | None) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _cmd_process(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args.config)
    if args.strict:
        cfg.strict = True
    clock = FixedClock(args.fixed_clock) if args.fixed_clock else None
    summary = process_stream(args.frames, args.detections, cfg, args.out, clock=clock)
    print(f"frames processed: {summary.frames_processed}")
    print(f"violations logged: {summary.violations_logged}")
    print(f"elapsed: {summary.elapsed_seconds:.3f} s")
    print(f"fps: {summary.fps:.2f}")
    return 0


def _load_plate_corpus(corpus_dir: Path) -> list[tuple]:
    plates = corpus_dir / "plates"
    corpus = []
    for png in sorted(plates.glob("*.png")):
        txt = png.with_suffix(".txt")
        if not txt.exists():
            raise PlateGuardError(f"missing truth text for {png.name}")
        corpus.append((load_png(png), txt.read_text(encoding="utf-8").strip()))
    return corpus


def _cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args.config)
    corpus_dir = Path(args.corpus)
    atlas = load_atlas(corpus_dir / "atlas.pgm")
    corpus = _load_plate_corpus(corpus_dir)
    rows = run_ablation(corpus, atlas, cfg.preprocess)
    width = max(len(r.stage) for r in rows)
    print(f"{'stage':<{width}}  accuracy")
    for row in rows:
        print(f"{row.stage:<{width}}  {row.accuracy:.4f}")
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps({"stage": row.stage, "accuracy": row.accuracy}) + "\n")
    return 0


def _read_frames(path: str) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        _, _, frames = read_detections(fh)
        return list(frames)


def _cmd_eval(args: argparse.Namespace) -> int:
    preds = _read_frames(args.pred)
    gts = _read_frames(args.truth)
    report = map_suite(preds, gts)
    match50 = match_detections(preds, gts, 0.5)
    records = []
    print(f"{'class':<14}{'precision':>10}{'recall':>10}{'ap@.50':>10}")
    for label in ClassLabel:
        try:
            p, r = precision_recall(match50, label)
        except NoGroundTruth:
            continue
        ap = report.per_class_ap50[label]
        print(f"{label.value:<14}{p:>10.4f}{r:>10.4f}{ap:>10.4f}")
        records.append({"class": label.value, "precision": p, "recall": r, "ap50": ap})
    print(f"{'mAP@.50':<14}{report.map50:>30.4f}")
    print(f"{'mAP@.50-.95':<14}{report.map50_95:>30.4f}")
    records.append({"metric": "map50", "value": report.map50})
    records.append({"metric": "map50_95", "value": report.map50_95})
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.what == "plates":
        write_plate_corpus(args.out, args.n, args.seed, atlas_scale=args.scale)
        print(f"wrote {args.n} plates to {args.out}")
    else:
        write_scene_corpus(args.out, args.n, args.seed, frame_width=args.width,
                           frame_height=args.height, render_frames=not args.no_frames)
        print(f"wrote {args.n} scenes to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        args = _build_parser().parse_args(argv)
        if args.command == "process":
            return _cmd_process(args)
        if args.command == "ablate":
            return _cmd_ablate(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "synth":
            return _cmd_synth(args)
        raise AssertionError(f"unhandled command {args.command}")
    except PlateGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
