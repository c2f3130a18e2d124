"""The dual tracking loop: KLT on the dominant points, PSO on the polygon."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import bbox as bbox_mod
from .contour import GROUP_SIZE, STATIC, VARIABLE, DominantPoints, dominant_points_of
from .frames import GrayFrame, Rect, binarize
from .klt import KLTConfig, frame_lambda, track_dominant_points, track_point
from .pso import (
    CONVERGED,
    EXHAUSTED,
    DegeneratePolygon,
    MultiSwarm,
    PsoParams,
    build_polygon,
    on_segment,
    reinit_dominant_point,
    run_frame,
)

log = logging.getLogger(__name__)

DEFAULT_POPULATION = {STATIC: 25, VARIABLE: 33}

# per-point states reported for each frame
LIVE, LOST, REINIT, FROZEN = "live", "lost", "reinit", "frozen"
_KLT_FAILURES = ("untextured", "residual", "out of frame", "border", "diverged")


class TrackingError(ValueError):
    pass


@dataclass(frozen=True)
class TrackerConfig:
    mode: str = STATIC
    # None means "PsoParams() with the population implied by mode"
    pso: Optional[PsoParams] = None
    klt: KLTConfig = KLTConfig()
    bbox_p: int = 2
    bbox_l: int = 2
    bbox_b: int = 2
    bbox_axes: str = bbox_mod.IMAGE_AXES
    bbox_order: str = "sum"
    threshold: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in GROUP_SIZE:
            raise ValueError(f"mode must be one of {sorted(GROUP_SIZE)}")

    @property
    def group_size(self) -> int:
        return GROUP_SIZE[self.mode]

    def resolved_pso(self) -> PsoParams:
        if self.pso is None:
            return PsoParams(population=DEFAULT_POPULATION[self.mode])
        return self.pso


@dataclass
class ReinitEvent:
    frame: int
    kind: str  # "dominant_point" or "particle"
    index: int
    position: tuple[float, float]
    reason: str = ""


@dataclass
class FrameRecord:
    index: int
    box: Optional[bbox_mod.BoundingBox]
    dominants: np.ndarray
    point_status: list[str]
    pso_state: Optional[str] = None
    iterations: int = 0
    particles: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    accepted: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    status: str = "ok"  # init | ok | degraded | lost


@dataclass
class TrackResult:
    frames: list[FrameRecord]
    events: list[ReinitEvent]
    initial: DominantPoints
    status: str = "complete"  # complete | track lost

    def boxes(self) -> list[Optional[bbox_mod.BoundingBox]]:
        return [f.box for f in self.frames]


def describe(config: TrackerConfig) -> str:
    """Every resolved parameter, one ``key = value`` per line."""
    pso = config.resolved_pso()
    lines = [
        f"mode = {config.mode}",
        f"group_size = {config.group_size}",
        f"population = {pso.population}",
    ]
    for f in fields(PsoParams):
        if f.name != "population":
            lines.append(f"pso.{f.name} = {getattr(pso, f.name)}")
    for f in fields(KLTConfig):
        lines.append(f"klt.{f.name} = {getattr(config.klt, f.name)}")
    lines += [
        f"bbox.p = {config.bbox_p}",
        f"bbox.l = {config.bbox_l}",
        f"bbox.b = {config.bbox_b}",
        f"bbox.axes = {config.bbox_axes}",
        f"bbox.order = {config.bbox_order}",
        f"threshold = {config.threshold}",
        f"seed = {config.rng_seed}",
    ]
    return "\n".join(lines) + "\n"


def _box_from(ms: MultiSwarm, pso: PsoParams, config: TrackerConfig):
    keep = ms.accepted() & on_segment(ms, pso.accept_tol)
    if not keep.any():
        return None, keep
    box = bbox_mod.bounding_box(ms.positions[keep], config.bbox_p, config.bbox_l, config.bbox_b,
                                axes=config.bbox_axes, strategy=config.bbox_order)
    return box, keep


def _carry(prev: GrayFrame, curr: GrayFrame, pos: np.ndarray, cfg: KLTConfig) -> Optional[np.ndarray]:
    """KLT-track a single position one frame forward, None if that fails."""
    tp = track_point(prev, curr, pos, cfg.window_half, cfg.max_iter, cfg.tol,
                     min_eig=frame_lambda(prev, cfg), residual_bound=cfg.residual_bound,
                     det_eps=cfg.det_eps, interpolation=cfg.interpolation)
    return np.array(tp.position) if tp.live else None


def _merge_dead_segments(points: np.ndarray, status: list[str], klt_failed: np.ndarray,
                         stationary: np.ndarray, closed: bool):
    """Collapse every segment whose two end vertices both failed KLT this
    frame into its midpoint."""
    n = len(points)
    pairs = [(i, i + 1) for i in range(n - 1)] + ([(n - 1, 0)] if closed and n > 2 else [])
    drop: set[int] = set()
    for i, j in pairs:
        if klt_failed[i] and klt_failed[j] and i not in drop and j not in drop and n - len(drop) > 2:
            points[i] = (points[i] + points[j]) / 2.0
            drop.add(j)
    if not drop:
        return points, status, stationary
    keep = [k for k in range(n) if k not in drop]
    return points[keep], [status[k] for k in keep], stationary[keep]


def run(
    frames: Sequence[GrayFrame],
    config: TrackerConfig = TrackerConfig(),
    invalidate: Optional[Mapping[int, Sequence[int]]] = None,
) -> TrackResult:
    """Track the target through ``frames``.

    ``invalidate`` maps a frame index to dominant-point indices that are
    forced lost on that frame (used to exercise re-initialization).
    """
    if len(frames) < 3:
        raise TrackingError("need at least 3 frames: frame 1, frame 2 and one tracked frame")
    invalidate = dict(invalidate or {})
    pso = config.resolved_pso()
    rng = np.random.default_rng(config.rng_seed)
    first = frames[0]
    bounds = (0.0, 0.0, first.width - 1.0, first.height - 1.0)

    _, _, dom = dominant_points_of(binarize(first, config.threshold), mode=config.mode)
    if len(dom) < 2:
        raise TrackingError("target contour yields fewer than 2 dominant points")
    closed = dom.closed
    points = dom.as_array()
    stationary = np.zeros(len(points), dtype=int)
    records = [FrameRecord(first.index, None, points.copy(), [LIVE] * len(points), status="init")]
    events: list[ReinitEvent] = []
    ms: Optional[MultiSwarm] = None

    for t in range(1, len(frames)):
        prev, curr = frames[t - 1], frames[t]
        tracked, stationary = track_dominant_points(prev, curr, points, config.klt, stationary)
        new_points = points.copy()
        status: list[str] = []
        klt_failed = np.zeros(len(points), dtype=bool)
        forced = set(invalidate.get(t, ()))
        for i, tp in enumerate(tracked):
            if tp.live and i not in forced:
                new_points[i] = tp.position
                status.append(LIVE)
                continue
            reason = "forced" if i in forced else tp.reason
            replacement = None
            if ms is not None:
                acc = ms.accepted()
                replacement = reinit_dominant_point(points[i], ms.positions[acc], ms.moving()[acc])
            if replacement is not None:
                # particles sit at their previous-frame positions
                moved = _carry(prev, curr, replacement, config.klt)
                if moved is not None:
                    replacement = moved
                new_points[i] = replacement
                stationary[i] = 0
                status.append(REINIT)
                events.append(ReinitEvent(curr.index, "dominant_point", i,
                                           (float(replacement[0]), float(replacement[1])), reason))
            else:
                status.append(FROZEN)
                klt_failed[i] = reason in _KLT_FAILURES
        points, status, stationary = _merge_dead_segments(new_points, status, klt_failed, stationary, closed)

        try:
            polygon = build_polygon(points, closed)
        except DegeneratePolygon:
            records.append(FrameRecord(curr.index, None, points.copy(), status, status="lost"))
            return TrackResult(records, events, dom, "track lost")
        if len(polygon.vertices) != len(points):
            points = polygon.vertices.copy()
            stationary = np.zeros(len(points), dtype=int)
            status = [LIVE] * len(points)

        if ms is None:
            ms = MultiSwarm.create(polygon, bounds, pso, rng)
        else:
            ms.set_polygon(polygon)
        before = len(ms.reinit_log)
        state, iters = run_frame(ms, pso, rng)
        for (i, pos), why in zip(ms.reinit_log[before:], ms.reinit_reasons[before:]):
            events.append(ReinitEvent(curr.index, "particle", i, pos, why))

        box, keep = _box_from(ms, pso, config)
        frame_status = "ok" if state == CONVERGED else "degraded"
        if box is None:
            frame_status = "lost"
        rec = FrameRecord(curr.index, box, points.copy(), status, state, iters,
                          ms.positions.copy(), keep, frame_status)
        records.append(rec)
        if state == EXHAUSTED:
            log.info("frame %d: PSO exhausted after %d iterations", curr.index, iters)
        if box is None and all(s == FROZEN for s in status):
            return TrackResult(records, events, dom, "track lost")
    return TrackResult(records, events, dom)


RESULT_HEADER = ("frame", "qx", "qy", "breadth", "length", "status")


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def write_result_csv(result: TrackResult, path: str | Path) -> Path:
    """One row per tracked frame; frames without a box get NaN fields."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for rec in result.frames:
            if rec.status == "init":
                continue
            b = rec.box
            vals = ["NaN"] * 4 if b is None else [_fmt(b.qx), _fmt(b.qy), _fmt(b.breadth), _fmt(b.length)]
            w.writerow([rec.index, *vals, rec.status])
    return path


def points_path(result_csv: str | Path) -> Path:
    p = Path(result_csv)
    return p.with_name(p.stem + ".points.csv")


def write_points_csv(result: TrackResult, path: str | Path) -> Path:
    """Dominant points and particle positions per frame, for overlays."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("frame", "kind", "x", "y", "accepted"))
        for rec in result.frames:
            for x, y in rec.dominants:
                w.writerow([rec.index, "dominant", _fmt(x), _fmt(y), 1])
            for (x, y), acc in zip(rec.particles, rec.accepted):
                w.writerow([rec.index, "particle", _fmt(x), _fmt(y), int(acc)])
    return path


@dataclass(frozen=True)
class ResultRow:
    frame: int
    box: Optional[Rect]
    status: str


def read_result_csv(path: str | Path) -> list[ResultRow]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"result file not found: {path}")
    rows: list[ResultRow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RESULT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(RESULT_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                frame = int(row[0])
                qx, qy, br, ln = (float(v) for v in row[1:5])
                status = row[5]
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
            box = None if any(math.isnan(v) for v in (qx, qy, br, ln)) else Rect(qx, qy, br, ln)
            rows.append(ResultRow(frame, box, status))
    return rows


def align_to_truth(rows: Sequence[ResultRow], n_truth: int) -> tuple[list[Optional[Rect]], int]:
    """Boxes for frames ``first..n_truth-1`` where ``first`` is the first
    tracked frame; frames past the end of the result count as no box."""
    if not rows:
        raise ValueError("result holds no tracked frames")
    first = min(r.frame for r in rows)
    if first >= n_truth:
        raise ValueError(f"result starts at frame {first} but ground truth has {n_truth} frames")
    by_frame = {r.frame: r.box for r in rows}
    return [by_frame.get(k) for k in range(first, n_truth)], first
