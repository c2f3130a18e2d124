"""Single-target tracking metrics: overlap, TD/FD/MD, precision, success, LSM.

All functions take two frame-aligned sequences: the tracker's boxes
(``None`` where no box was emitted) and the ground truth (``None`` where
the target is absent).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .frames import Rect

IOU_RULE = "iou"
CENTER_RATIO_RULE = "center-ratio"

DEFAULT_PRECISION_THRESHOLDS = tuple(float(t) for t in range(0, 51))
DEFAULT_SUCCESS_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(21))

Boxes = Sequence[Optional[Rect]]


def overlap_score(a: Rect, b: Rect) -> float:
    """Intersection over union of two axis-aligned rectangles."""
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        raise ValueError("overlap_score needs rectangles with positive area")
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    return inter / (a.w * a.h + b.w * b.h - inter)


def _check(boxes: Boxes, truth: Boxes) -> None:
    if len(boxes) != len(truth):
        raise ValueError(f"result covers {len(boxes)} frames but ground truth {len(truth)}")


def _iou(box: Optional[Rect], gt: Rect) -> float:
    if box is None or box.w <= 0 or box.h <= 0:
        return 0.0
    return overlap_score(box, gt)


def center_error(box: Optional[Rect], gt: Rect) -> float:
    if box is None:
        return math.inf
    (bx, by), (gx, gy) = box.center, gt.center
    return math.hypot(bx - gx, by - gy)


def per_frame_iou(boxes: Boxes, truth: Boxes) -> list[Optional[float]]:
    _check(boxes, truth)
    return [None if gt is None else _iou(b, gt) for b, gt in zip(boxes, truth)]


def per_frame_center_error(boxes: Boxes, truth: Boxes) -> list[Optional[float]]:
    _check(boxes, truth)
    return [None if gt is None else center_error(b, gt) for b, gt in zip(boxes, truth)]


def _frame_ok(box: Rect, gt: Rect, iou_threshold: float, rule: str) -> bool:
    if rule == IOU_RULE:
        return _iou(box, gt) >= iou_threshold
    if rule == CENTER_RATIO_RULE:
        # centre distance against the box-to-truth area ratio, taken literally
        return center_error(box, gt) <= (box.w * box.h) / (gt.w * gt.h)
    raise ValueError(f"unknown detection rule {rule!r}")


def detection_counts(boxes: Boxes, truth: Boxes, iou_threshold: float = 0.5,
                     rule: str = IOU_RULE) -> tuple[int, int, int]:
    """(true, false, missed) detection counts.

    A box emitted on a frame without a target counts as a false detection.
    """
    _check(boxes, truth)
    n_td = n_fd = n_md = 0
    for box, gt in zip(boxes, truth):
        if gt is None:
            n_fd += box is not None
        elif box is None:
            n_md += 1
        elif _frame_ok(box, gt, iou_threshold, rule):
            n_td += 1
        else:
            n_fd += 1
    return n_td, n_fd, n_md


def td_fd_md(boxes: Boxes, truth: Boxes, iou_threshold: float = 0.5,
             rule: str = IOU_RULE) -> tuple[float, float, float]:
    """True, false and missed detection percentages."""
    n_td, n_fd, n_md = detection_counts(boxes, truth, iou_threshold, rule)
    n = sum(gt is not None for gt in truth)
    td = 100.0 * n_td / n if n else 0.0
    fd = 100.0 * n_fd / (n_td + n_fd) if n_td + n_fd else 0.0
    md = 100.0 * n_md / (n_td + n_md) if n_td + n_md else 0.0
    return td, fd, md


def precision_curve(boxes: Boxes, truth: Boxes,
                    thresholds: Sequence[float] = DEFAULT_PRECISION_THRESHOLDS) -> list[tuple[float, float]]:
    """Fraction of target-present frames with centre error <= each threshold."""
    errs = np.array([e for e in per_frame_center_error(boxes, truth) if e is not None])
    if len(errs) == 0:
        return [(float(t), 0.0) for t in thresholds]
    return [(float(t), float(np.mean(errs <= t))) for t in thresholds]


def success_curve(boxes: Boxes, truth: Boxes,
                  thresholds: Sequence[float] = DEFAULT_SUCCESS_THRESHOLDS
                  ) -> tuple[list[tuple[float, float]], float]:
    """Fraction of target-present frames with IoU above each threshold, and
    the average overlap score."""
    ious = np.array([v for v in per_frame_iou(boxes, truth) if v is not None])
    if len(ious) == 0:
        return [(float(t), 0.0) for t in thresholds], 0.0
    curve = [(float(t), float(np.mean(ious > t))) for t in thresholds]
    return curve, float(ious.mean())


def _longest_dense_window(success: np.ndarray, fraction: float) -> int:
    """Length of the longest window whose success rate is at least ``fraction``."""
    n = len(success)
    if n == 0:
        return 0
    prefix = np.concatenate([[0.0], np.cumsum(success - fraction)])
    eps = 1e-9
    # left_min[i]: smallest prefix in [0, i]; right_max[j]: largest in [j, n]
    left_min = np.minimum.accumulate(prefix)
    right_max = np.maximum.accumulate(prefix[::-1])[::-1]
    best = i = j = 0
    while i <= n and j <= n:
        if right_max[j] - left_min[i] >= -eps:
            best = max(best, j - i)
            j += 1
        else:
            i += 1
    return best


def lsm(boxes: Boxes, truth: Boxes, iou_threshold: float = 0.5, fraction: float = 0.95) -> float:
    """Longest run of frames tracked at success rate >= ``fraction``, as a
    share of the sequence length.  Target-absent frames split runs."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    ious = per_frame_iou(boxes, truth)
    if not ious:
        return 0.0
    best = 0
    run: list[float] = []
    for v in ious + [None]:
        if v is None:
            best = max(best, _longest_dense_window(np.array(run, dtype=float), fraction))
            run = []
        else:
            run.append(1.0 if v >= iou_threshold else 0.0)
    return best / len(ious)


@dataclass
class MetricReport:
    td: float
    fd: float
    md: float
    precision_curve: list[tuple[float, float]]
    success_curve: list[tuple[float, float]]
    aos: float
    lsm: float
    iou: list[Optional[float]] = field(default_factory=list)
    center_error: list[Optional[float]] = field(default_factory=list)
    iou_threshold: float = 0.5
    lsm_fraction: float = 0.95
    precision_at: float = 20.0

    @property
    def mean_center_error(self) -> float:
        errs = [e for e in self.center_error if e is not None]
        return float(np.mean(errs)) if errs else math.inf

    @property
    def precision_at_threshold(self) -> float:
        errs = np.array([e for e in self.center_error if e is not None])
        return float(np.mean(errs <= self.precision_at)) if len(errs) else 0.0

    def summary(self) -> str:
        return "".join([
            f"TD = {self.td:.4f}\n",
            f"FD = {self.fd:.4f}\n",
            f"MD = {self.md:.4f}\n",
            f"AOS = {self.aos:.6f}\n",
            f"LSM = {self.lsm:.6f}\n",
            f"precision@{self.precision_at:g} = {self.precision_at_threshold:.6f}\n",
            f"mean_center_error = {self.mean_center_error:.6f}\n",
            f"iou_threshold = {self.iou_threshold:g}\n",
            f"lsm_fraction = {self.lsm_fraction:g}\n",
            f"frames = {len(self.iou)}\n",
        ])


def evaluate(boxes: Boxes, truth: Boxes, iou_threshold: float = 0.5, lsm_fraction: float = 0.95,
             precision_thresholds: Sequence[float] = DEFAULT_PRECISION_THRESHOLDS,
             success_thresholds: Sequence[float] = DEFAULT_SUCCESS_THRESHOLDS,
             rule: str = IOU_RULE, precision_at: float = 20.0) -> MetricReport:
    td, fd, md = td_fd_md(boxes, truth, iou_threshold, rule)
    s_curve, aos = success_curve(boxes, truth, success_thresholds)
    return MetricReport(
        td=td, fd=fd, md=md,
        precision_curve=precision_curve(boxes, truth, precision_thresholds),
        success_curve=s_curve,
        aos=aos,
        lsm=lsm(boxes, truth, iou_threshold, lsm_fraction),
        iou=per_frame_iou(boxes, truth),
        center_error=per_frame_center_error(boxes, truth),
        iou_threshold=iou_threshold,
        lsm_fraction=lsm_fraction,
        precision_at=precision_at,
    )


def _write_curve(path: Path, curve: Sequence[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("threshold,fraction\n")
        for t, frac in curve:
            fh.write(f"{t:g},{frac:.6f}\n")


def emit_plots(report: MetricReport, out_dir: str | Path) -> list[Path]:
    """Write ``precision.csv``, ``success.csv`` and ``summary.txt``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = [out / "precision.csv", out / "success.csv", out / "summary.txt"]
    _write_curve(paths[0], report.precision_curve)
    _write_curve(paths[1], report.success_curve)
    paths[2].write_text(report.summary())
    return paths
