"""Single-scale Lucas-Kanade-Tomasi point tracking."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .frames import GrayFrame

LIVE = "live"
LOST = "lost"

INTERPOLATION_ORDER = {"linear": 1, "cubic": 3}


@dataclass(frozen=True)
class KLTConfig:
    window_half: int = 7
    max_iter: int = 30
    tol: float = 0.03
    # absolute min-eigenvalue threshold; None derives it from each frame
    lambda_threshold: Optional[float] = None
    lambda_fraction: float = 0.01
    residual_bound: float = 0.1
    stationary_frames: int = 3
    det_eps: float = 1e-10
    # image sampling between pixels: "cubic" spline or "linear" (bilinear)
    interpolation: str = "cubic"

    def __post_init__(self):
        if self.interpolation not in INTERPOLATION_ORDER:
            raise ValueError(f"interpolation must be one of {sorted(INTERPOLATION_ORDER)}")


@dataclass(frozen=True)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray


@dataclass(frozen=True)
class StructureTensor:
    zxx: float
    zxy: float
    zyy: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.zxx, self.zxy], [self.zxy, self.zyy]])

    @property
    def det(self) -> float:
        return self.zxx * self.zyy - self.zxy * self.zxy


@dataclass(frozen=True)
class TrackedPoint:
    position: tuple[float, float]
    status: str
    residual: float
    iterations_used: int
    displacement: tuple[float, float] = (0.0, 0.0)
    reason: str = ""

    @property
    def live(self) -> bool:
        return self.status == LIVE


def image_gradients(frame: GrayFrame | np.ndarray) -> GradientField:
    """Central differences inside, one-sided differences on the border."""
    data = frame.data if isinstance(frame, GrayFrame) else np.asarray(frame, dtype=float)
    if data.shape[0] < 3 or data.shape[1] < 3:
        raise ValueError(f"frame must be at least 3x3, got {data.shape[1]}x{data.shape[0]}")
    gy, gx = np.gradient(data)
    return GradientField(gx=gx, gy=gy)


def bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``img`` at real coordinates; coordinates are clamped to the image."""
    h, w = img.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(int), w - 2) if w > 1 else np.zeros_like(xs, int)
    y0 = np.minimum(np.floor(ys).astype(int), h - 2) if h > 1 else np.zeros_like(ys, int)
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _window(center, window_half: int, shape) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    off = np.arange(-window_half, window_half + 1, dtype=float)
    ox, oy = np.meshgrid(off, off)
    xs = center[0] + ox.ravel()
    ys = center[1] + oy.ravel()
    h, w = shape
    inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    return xs, ys, inside


def structure_tensor(grad: GradientField, center: Sequence[float], window_half: int = 7) -> StructureTensor:
    """Windowed sum of gradient outer products (uniform weights).

    Window samples falling outside the frame are dropped.
    """
    xs, ys, inside = _window(center, window_half, grad.gx.shape)
    gx = bilinear(grad.gx, xs[inside], ys[inside])
    gy = bilinear(grad.gy, xs[inside], ys[inside])
    return StructureTensor(float(gx @ gx), float(gx @ gy), float(gy @ gy))


def min_eigenvalue(z: StructureTensor) -> float:
    tr = z.zxx + z.zyy
    disc = math.sqrt((z.zxx - z.zyy) ** 2 + 4.0 * z.zxy ** 2)
    return (tr - disc) / 2.0


def is_trackable(z: StructureTensor, lambda_threshold: float) -> bool:
    if lambda_threshold < 0:
        raise ValueError("lambda_threshold must be >= 0")
    return min_eigenvalue(z) > lambda_threshold


def min_eigenvalue_map(frame: GrayFrame | np.ndarray, window_half: int = 7) -> np.ndarray:
    """Minimum eigenvalue of the structure tensor centred on every pixel."""
    grad = image_gradients(frame)
    size = 2 * window_half + 1

    def box(a):
        return ndimage.uniform_filter(a, size=size, mode="constant") * (size * size)

    zxx = box(grad.gx * grad.gx)
    zxy = box(grad.gx * grad.gy)
    zyy = box(grad.gy * grad.gy)
    disc = np.sqrt((zxx - zyy) ** 2 + 4.0 * zxy ** 2)
    return np.maximum((zxx + zyy - disc) / 2.0, 0.0)


def frame_lambda(frame: GrayFrame, cfg: KLTConfig) -> float:
    """Trackability threshold: the configured value, or a fraction of the
    frame's strongest corner response."""
    if cfg.lambda_threshold is not None:
        return cfg.lambda_threshold
    return cfg.lambda_fraction * float(min_eigenvalue_map(frame, cfg.window_half).max())


class Sampler:
    """Samples one image at real coordinates, clamped to the image.

    Cubic sampling prefilters the image once so every later lookup is a
    plain B-spline evaluation.
    """

    def __init__(self, img: np.ndarray, interpolation: str = "cubic"):
        self.img = np.asarray(img, dtype=float)
        self.order = INTERPOLATION_ORDER[interpolation]
        self.coef = (ndimage.spline_filter(self.img, order=self.order, mode="nearest")
                     if self.order > 1 else self.img)

    def __call__(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        if self.order == 1:
            return bilinear(self.img, xs, ys)
        h, w = self.img.shape
        coords = [np.clip(ys, 0.0, h - 1.0), np.clip(xs, 0.0, w - 1.0)]
        return ndimage.map_coordinates(self.coef, coords, order=self.order, mode="nearest", prefilter=False)


@dataclass(frozen=True)
class FramePair:
    """Samplers for the previous frame, its gradient and the current frame."""

    prev: Sampler
    gx: Sampler
    gy: Sampler
    curr: Sampler
    shape: tuple[int, int]

    @classmethod
    def build(cls, prev: GrayFrame, curr: GrayFrame, interpolation: str = "cubic",
              grad: Optional[GradientField] = None) -> "FramePair":
        if prev.data.shape != curr.data.shape:
            raise ValueError("frames differ in size")
        grad = image_gradients(prev) if grad is None else grad
        return cls(Sampler(prev.data, interpolation), Sampler(grad.gx, interpolation),
                   Sampler(grad.gy, interpolation), Sampler(curr.data, interpolation), prev.data.shape)


def track_point(
    prev: GrayFrame,
    curr: GrayFrame,
    pt: Sequence[float],
    window_half: int = 7,
    max_iter: int = 30,
    tol: float = 0.03,
    min_eig: float = 0.0,
    residual_bound: float = 0.1,
    det_eps: float = 1e-10,
    interpolation: str = "cubic",
    pair: Optional[FramePair] = None,
) -> TrackedPoint:
    """Iteratively solve ``Z d = e`` for the displacement of one window.

    ``Z`` is built from the gradient of ``prev`` over the window and stays
    fixed; ``e`` is re-sampled from ``curr`` at the shifted window on every
    iteration.  ``pair`` lets callers share prefiltered samplers between
    points.
    """
    if pair is None:
        pair = FramePair.build(prev, curr, interpolation)
    h, w = pair.shape
    x0, y0 = float(pt[0]), float(pt[1])

    def lost(reason, pos=(x0, y0), residual=math.inf, iters=0, d=(0.0, 0.0)):
        return TrackedPoint(tuple(map(float, pos)), LOST, residual, iters, tuple(map(float, d)), reason)

    xs, ys, inside = _window((x0, y0), window_half, (h, w))
    if inside.sum() * 2 < inside.size:
        return lost("border")
    xs, ys = xs[inside], ys[inside]
    I = pair.prev(xs, ys)
    gx = pair.gx(xs, ys)
    gy = pair.gy(xs, ys)
    z = StructureTensor(float(gx @ gx), float(gx @ gy), float(gy @ gy))
    if z.det < det_eps or min_eigenvalue(z) <= min_eig:
        return lost("untextured")
    inv = np.array([[z.zyy, -z.zxy], [-z.zxy, z.zxx]]) / z.det

    d = np.zeros(2)
    iters = 0
    for iters in range(1, max_iter + 1):
        diff = I - pair.curr(xs + d[0], ys + d[1])
        step = inv @ np.array([diff @ gx, diff @ gy])
        d += step
        if not np.all(np.isfinite(d)):
            return lost("diverged", iters=iters)
        if math.hypot(step[0], step[1]) < tol:
            break

    nx, ny = x0 + d[0], y0 + d[1]
    if not (0.0 <= nx <= w - 1 and 0.0 <= ny <= h - 1):
        return lost("out of frame", (nx, ny), iters=iters, d=d)
    _, _, inside_new = _window((nx, ny), window_half, (h, w))
    if inside_new.sum() * 2 < inside_new.size:
        return lost("border", (nx, ny), iters=iters, d=d)
    residual = float(np.mean(np.abs(I - pair.curr(xs + d[0], ys + d[1]))))
    if residual > residual_bound:
        return lost("residual", (nx, ny), residual, iters, d)
    return TrackedPoint((float(nx), float(ny)), LIVE, residual, iters, (float(d[0]), float(d[1])))


def track_dominant_points(
    prev: GrayFrame,
    curr: GrayFrame,
    pts: Sequence[Sequence[float]] | np.ndarray,
    cfg: KLTConfig = KLTConfig(),
    stationary: Optional[np.ndarray] = None,
) -> tuple[list[TrackedPoint], np.ndarray]:
    """Track every point independently from ``prev`` to ``curr``.

    ``stationary`` counts, per point, the consecutive frames in which the
    point did not move at all; the updated counters are returned alongside
    the tracked points.  A point still for ``cfg.stationary_frames`` frames
    is reported lost.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("no points to track")
    counts = np.zeros(len(pts), dtype=int) if stationary is None else np.array(stationary, dtype=int)
    pair = FramePair.build(prev, curr, cfg.interpolation)
    lam = frame_lambda(prev, cfg)
    out: list[TrackedPoint] = []
    for i, p in enumerate(pts):
        tp = track_point(prev, curr, p, cfg.window_half, cfg.max_iter, cfg.tol,
                         min_eig=lam, residual_bound=cfg.residual_bound,
                         det_eps=cfg.det_eps, pair=pair)
        if tp.live and tp.position == (float(p[0]), float(p[1])):
            counts[i] += 1
            if counts[i] >= cfg.stationary_frames:
                tp = TrackedPoint(tp.position, LOST, tp.residual, tp.iterations_used,
                                  tp.displacement, "stationary")
        elif tp.live:
            counts[i] = 0
        out.append(tp)
    return out, counts
