"""Command line: synth, track, eval, dominants, overlay."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw

from . import evaluation, synth, tracker
from .contour import STATIC, VARIABLE, dominant_points_of
from .frames import GrayFrame, binarize, load_frame_sequence, load_ground_truth, read_gray
from .klt import KLTConfig
from .pso import PsoParams

GREEN = (0, 255, 0)
RED = (255, 0, 0)
YELLOW = (255, 255, 0)

# config-file key -> (argparse dest, type)
CONFIG_KEYS = {
    "mode": ("mode", str),
    "seed": ("seed", int),
    "klt-window": ("klt_window", int),
    "klt-iters": ("klt_iters", int),
    "klt-tol": ("klt_tol", float),
    "klt-lambda": ("klt_lambda", float),
    "pso-w": ("pso_w", float),
    "pso-c1": ("pso_c1", float),
    "pso-c2": ("pso_c2", float),
    "pso-pop": ("pso_pop", int),
    "pso-accept-tol": ("pso_accept_tol", float),
    "pso-max-iter": ("pso_max_iter", int),
}


class CliError(Exception):
    pass


def read_config_file(path: str | Path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise CliError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key not in CONFIG_KEYS:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}")
        dest, typ = CONFIG_KEYS[key]
        try:
            out[dest] = typ(value)
        except ValueError:
            raise CliError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
        if dest == "mode" and out[dest] not in (STATIC, VARIABLE):
            raise CliError(f"{path}:{lineno}: mode must be static or variable")
    return out


def merge_config_file(args: argparse.Namespace) -> argparse.Namespace:
    """Fill flags left unset on the command line from ``--config``."""
    if getattr(args, "config", None):
        for dest, value in read_config_file(args.config).items():
            if getattr(args, dest) is None:
                setattr(args, dest, value)
    if args.mode is None:
        args.mode = STATIC
    if args.seed is None:
        args.seed = 0
    return args


def config_from_args(args: argparse.Namespace) -> tracker.TrackerConfig:
    """Resolve CLI flags over config-file values over defaults."""
    args = merge_config_file(args)
    klt_over = {
        "window_half": args.klt_window, "max_iter": args.klt_iters,
        "tol": args.klt_tol, "lambda_threshold": args.klt_lambda,
    }
    klt = replace(KLTConfig(), **{k: v for k, v in klt_over.items() if v is not None})
    pso_over = {
        "w": args.pso_w, "c1": args.pso_c1, "c2": args.pso_c2, "population": args.pso_pop,
        "accept_tol": args.pso_accept_tol, "max_iter_per_frame": args.pso_max_iter,
    }
    pso_over = {k: v for k, v in pso_over.items() if v is not None}
    pso = None
    if pso_over:
        pso = replace(PsoParams(population=tracker.DEFAULT_POPULATION[args.mode]), **pso_over)
    return tracker.TrackerConfig(mode=args.mode, pso=pso, klt=klt, rng_seed=args.seed)


def _add_tracking_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=(STATIC, VARIABLE), help="default static")
    p.add_argument("--seed", type=int, help="default 0")
    p.add_argument("--config", metavar="FILE", help="key = value file; flags given here take precedence")
    g = p.add_argument_group("KLT")
    g.add_argument("--klt-window", type=int, help="window half-width in pixels (default 7)")
    g.add_argument("--klt-iters", type=int, help="max iterations per point (default 30)")
    g.add_argument("--klt-tol", type=float, help="convergence step in pixels (default 0.03)")
    g.add_argument("--klt-lambda", type=float, help="absolute min-eigenvalue threshold")
    g = p.add_argument_group("PSO")
    g.add_argument("--pso-w", type=float)
    g.add_argument("--pso-c1", type=float)
    g.add_argument("--pso-c2", type=float)
    g.add_argument("--pso-pop", type=int)
    g.add_argument("--pso-accept-tol", type=float)
    g.add_argument("--pso-max-iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualtrack", description="Dominant-point KLT + multiswarm PSO tracker")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth", help="render a synthetic sequence with ground truth")
    p.add_argument("--spec", required=True, help="JSON scene description")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("track", help="track the target through a frame directory")
    p.add_argument("frames_dir")
    p.add_argument("--out", required=True, help="result CSV path")
    p.add_argument("--gt", help="ground-truth file; prints a metric summary when given")
    _add_tracking_flags(p)

    p = sub.add_parser("eval", help="score a result CSV against ground truth")
    p.add_argument("result")
    p.add_argument("gt")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--lsm-fraction", type=float, default=0.95)
    p.add_argument("--td-rule", choices=(evaluation.IOU_RULE, evaluation.CENTER_RATIO_RULE),
                   default=evaluation.IOU_RULE)

    p = sub.add_parser("dominants", help="dump the dominant points of one frame as CSV")
    p.add_argument("frame")
    p.add_argument("--mode", choices=(STATIC, VARIABLE), default=STATIC)

    p = sub.add_parser("overlay", help="draw boxes, dominant points and particles onto frames")
    p.add_argument("frames_dir")
    p.add_argument("result")
    p.add_argument("--out-dir", required=True)
    return parser


def _evaluate(result_csv: Path, gt_path: Path, iou_threshold=0.5, lsm_fraction=0.95,
              rule=evaluation.IOU_RULE) -> evaluation.MetricReport:
    rows = tracker.read_result_csv(result_csv)
    truth = load_ground_truth(gt_path)
    boxes, first = tracker.align_to_truth(rows, len(truth))
    return evaluation.evaluate(boxes, truth[first:], iou_threshold, lsm_fraction, rule=rule)


def cmd_synth(args) -> int:
    spec = synth.SceneSpec.load(args.spec)
    frames, truth = synth.generate(spec)
    synth.write_scene(frames, truth, args.out_dir)
    print(f"wrote {len(frames)} frames to {args.out_dir}")
    return 0


def cmd_track(args) -> int:
    config = config_from_args(args)
    frames = load_frame_sequence(args.frames_dir)
    result = tracker.run(frames, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tracker.write_result_csv(result, out)
    tracker.write_points_csv(result, tracker.points_path(out))
    out.with_name(out.stem + ".config.txt").write_text(tracker.describe(config))
    if result.status != "complete":
        print(f"warning: {result.status} at frame {result.frames[-1].index}", file=sys.stderr)
    if args.gt:
        sys.stdout.write(_evaluate(out, Path(args.gt)).summary())
    return 0


def cmd_eval(args) -> int:
    report = _evaluate(Path(args.result), Path(args.gt), args.iou_threshold, args.lsm_fraction, args.td_rule)
    evaluation.emit_plots(report, args.out_dir)
    sys.stdout.write(report.summary())
    return 0


def cmd_dominants(args) -> int:
    frame = GrayFrame(read_gray(args.frame), 0)
    _, _, dom = dominant_points_of(binarize(frame), mode=args.mode)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("x", "y", "k", "cos"))
    for (x, y), k, c in zip(dom.points, dom.support, dom.cosine):
        w.writerow((x, y, k, f"{c:.6f}"))
    return 0


def _read_points(path: Path) -> dict[int, list[tuple[str, float, float]]]:
    pts: dict[int, list] = defaultdict(list)
    if not path.is_file():
        return pts
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            pts[int(row["frame"])].append((row["kind"], float(row["x"]), float(row["y"])))
    return pts


def cmd_overlay(args) -> int:
    frames_dir = Path(args.frames_dir)
    frames = load_frame_sequence(frames_dir)
    rows = {r.frame: r for r in tracker.read_result_csv(args.result)}
    pts = _read_points(tracker.points_path(args.result))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if out.resolve() == frames_dir.resolve():
        raise CliError("--out-dir must differ from the frame directory")
    for f in frames:
        img = Image.fromarray(np.round(f.data * 255).astype(np.uint8)).convert("RGB")
        draw = ImageDraw.Draw(img)
        for kind, x, y in pts.get(f.index, ()):
            if kind == "particle":
                draw.point((round(x), round(y)), fill=RED)
        for kind, x, y in pts.get(f.index, ()):
            if kind == "dominant":
                draw.rectangle((round(x) - 1, round(y) - 1, round(x) + 1, round(y) + 1), fill=GREEN)
        row = rows.get(f.index)
        if row is not None and row.box is not None:
            b = row.box
            draw.rectangle((b.x, b.y, b.x + b.w, b.y + b.h), outline=YELLOW)
        img.save(out / f"overlay_{f.index:04d}.png")
    print(f"wrote {len(frames)} overlays to {out}")
    return 0


COMMANDS = {
    "synth": cmd_synth, "track": cmd_track, "eval": cmd_eval,
    "dominants": cmd_dominants, "overlay": cmd_overlay,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CliError, OSError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
