"""Axis-aligned bounding box built from converged particle positions.

The box starts at an anchor averaged from the particles nearest the image
origin.  Its two side lengths are distances from that anchor to the mean of
the particles furthest towards the top-right and the bottom-left.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .frames import Rect

LENGTH = "length"
BREADTH = "breadth"

# How the two measured distances map onto the box axes.  "image" puts the
# distance to the top-right group on the horizontal axis; "literal" adds it
# to y, reproducing the original corner formulas verbatim.
IMAGE_AXES = "image"
LITERAL_AXES = "literal"


@dataclass(frozen=True)
class BoundingBox:
    qx: float
    qy: float
    length: float  # vertical extent
    breadth: float  # horizontal extent

    @property
    def degenerate(self) -> bool:
        return self.length == 0.0 or self.breadth == 0.0

    def corners(self) -> tuple[tuple[float, float], ...]:
        q = (self.qx, self.qy)
        return (
            q,
            (self.qx, self.qy + self.length),
            (self.qx + self.breadth, self.qy),
            (self.qx + self.breadth, self.qy + self.length),
        )

    def as_rect(self) -> Rect:
        return Rect(self.qx, self.qy, self.breadth, self.length)


def _as_points(accepted) -> np.ndarray:
    pts = np.asarray(accepted, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("no accepted particles")
    return pts


def _order_key(pts: np.ndarray, target: str, strategy: str) -> np.ndarray:
    """Sort keys, ascending = most extreme first."""
    x, y = pts[:, 0], pts[:, 1]
    if strategy == "sum":
        keys = {"origin": x + y, LENGTH: y - x, BREADTH: x - y}
        return keys[target]
    if strategy == "lex":
        keys = {"origin": (x, y), LENGTH: (-x, y), BREADTH: (x, -y)}
        primary, secondary = keys[target]
        # lexsort treats its last key as the primary one
        return np.argsort(np.lexsort((secondary, primary)), kind="stable")
    raise ValueError(f"unknown ordering strategy {strategy!r}")


def _extreme_mean(pts: np.ndarray, count: int, target: str, strategy: str) -> np.ndarray:
    count = max(1, min(int(count), len(pts)))
    order = np.argsort(_order_key(pts, target, strategy), kind="stable")
    return pts[order[:count]].mean(axis=0)


def anchor_point(accepted: Sequence, p: int = 10, strategy: str = "sum") -> np.ndarray:
    """Ceiled mean of the ``p`` particles nearest the origin."""
    pts = _as_points(accepted)
    return np.ceil(_extreme_mean(pts, p, "origin", strategy))


def extent_points(accepted: Sequence, count: int = 10, mode: str = LENGTH,
                  strategy: str = "sum") -> np.ndarray:
    """Mean of the ``count`` particles furthest towards (max x, min y) for
    ``length`` mode, or (min x, max y) for ``breadth`` mode."""
    if mode not in (LENGTH, BREADTH):
        raise ValueError(f"mode must be {LENGTH!r} or {BREADTH!r}")
    return _extreme_mean(_as_points(accepted), count, mode, strategy)


def bounding_box(accepted: Sequence, p: int = 10, l: int = 10, b: int = 10,
                 axes: str = IMAGE_AXES, strategy: str = "sum") -> BoundingBox:
    pts = _as_points(accepted)
    q = anchor_point(pts, p, strategy)
    len_pt = extent_points(pts, l, LENGTH, strategy)
    bre_pt = extent_points(pts, b, BREADTH, strategy)
    to_len = math.hypot(q[0] - len_pt[0], q[1] - len_pt[1])
    to_bre = math.hypot(q[0] - bre_pt[0], q[1] - bre_pt[1])
    if axes == LITERAL_AXES:
        length, breadth = to_len, to_bre
    elif axes == IMAGE_AXES:
        length, breadth = to_bre, to_len
    else:
        raise ValueError(f"unknown axis convention {axes!r}")
    return BoundingBox(float(q[0]), float(q[1]), float(length), float(breadth))
