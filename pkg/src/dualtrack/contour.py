"""Freeman chain-code contour tracing and k-cosine dominant points.

Points are ``(x, y)`` pixel coordinates with ``y`` growing downwards.
Freeman codes follow the usual counter-clockwise numbering, so code 0 is
east, 2 is north (``y - 1``), 4 is west and 6 is south.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .frames import BinaryImage, FrameError

STATIC = "static"
VARIABLE = "variable"
GROUP_SIZE = {STATIC: 5, VARIABLE: 10}

DIRECTIONS = ((1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1))
_CODE_OF = {d: c for c, d in enumerate(DIRECTIONS)}

Point = tuple[int, int]


@dataclass(frozen=True)
class ChainCode:
    """A traced contour.

    ``points[i] + DIRECTIONS[codes[i]] == points[i + 1]``.  For a closed
    contour the last code leads back to the seed, so ``len(points) ==
    len(codes)``; an open one has one more point than codes.
    """

    seed: Point
    codes: tuple[int, ...]
    points: tuple[Point, ...]
    closed: bool = True


@dataclass(frozen=True)
class Breakpoints:
    points: tuple[Point, ...]
    closed: bool = True
    # position of each breakpoint in the chain it came from
    chain_index: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class DominantPoints:
    points: tuple[Point, ...]
    support: tuple[int, ...]
    cosine: tuple[float, ...]
    closed: bool = True
    # index of each dominant point within the breakpoint list
    breakpoint_index: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64).reshape(-1, 2)


def chain_from_points(points: Sequence[Point], closed: bool) -> ChainCode:
    """Build a chain code from an explicit 8-connected pixel walk."""
    pts = [tuple(map(int, p)) for p in points]
    pairs = list(zip(pts, pts[1:] + (pts[:1] if closed else [])))
    codes = []
    for a, b in pairs:
        step = (b[0] - a[0], b[1] - a[1])
        if step not in _CODE_OF:
            raise ValueError(f"{a} -> {b} is not an 8-neighbour step")
        codes.append(_CODE_OF[step])
    return ChainCode(seed=pts[0], codes=tuple(codes), points=tuple(pts), closed=closed)


def trace_contour(image: BinaryImage, seed: Point) -> ChainCode:
    """Moore-neighbour boundary trace, clockwise on screen.

    Stops when the walk is back at the seed and about to repeat its first
    move.  An isolated pixel yields an empty code list.
    """
    fg = image.data
    h, w = fg.shape
    sx, sy = int(seed[0]), int(seed[1])
    if not (0 <= sx < w and 0 <= sy < h) or not fg[sy, sx]:
        raise FrameError(f"seed {seed} is not a foreground pixel")

    def is_fg(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and bool(fg[y, x])

    # start the scan from a background neighbour, preferring west
    back = None
    for c in (4, 3, 2, 1, 0, 7, 6, 5):
        dx, dy = DIRECTIONS[c]
        if not is_fg(sx + dx, sy + dy):
            back = c
            break
    if back is None:
        raise FrameError(f"seed {seed} is an interior pixel")

    points: list[Point] = []
    codes: list[int] = []
    cur = (sx, sy)
    first_move = None
    limit = 4 * int(fg.sum()) + 16
    while True:
        move = prev = None
        for i in range(1, 8):
            c = (back - i) % 8
            dx, dy = DIRECTIONS[c]
            if is_fg(cur[0] + dx, cur[1] + dy):
                move, prev = c, (c + 1) % 8
                break
        if move is None:
            points.append(cur)  # isolated pixel
            break
        if cur == (sx, sy) and move == first_move:
            break
        if first_move is None:
            first_move = move
        points.append(cur)
        codes.append(move)
        dx, dy = DIRECTIONS[move]
        nxt = (cur[0] + dx, cur[1] + dy)
        pdx, pdy = DIRECTIONS[prev]
        back = _CODE_OF[(cur[0] + pdx - nxt[0], cur[1] + pdy - nxt[1])]
        cur = nxt
        if len(codes) > limit:
            raise RuntimeError("contour trace did not terminate")
    return ChainCode(seed=(sx, sy), codes=tuple(codes), points=tuple(points), closed=True)


def extract_breakpoints(chain: ChainCode) -> Breakpoints:
    """Drop every linear point, i.e. one whose incoming and outgoing codes match."""
    codes = chain.codes
    pts = chain.points
    if len(codes) < 2:
        return Breakpoints(pts, chain.closed, tuple(range(len(pts))))
    keep = [0]
    if chain.closed:
        for i in range(1, len(pts)):
            if codes[i - 1] != codes[i]:
                keep.append(i)
    else:
        for i in range(1, len(pts) - 1):
            if codes[i - 1] != codes[i]:
                keep.append(i)
        keep.append(len(pts) - 1)
    return Breakpoints(tuple(pts[i] for i in keep), chain.closed, tuple(keep))


def group_breakpoints(bps: Breakpoints | Sequence, mode: str = STATIC) -> list[list[int]]:
    """Split breakpoint indices into consecutive non-overlapping groups."""
    n = len(bps)
    if n == 0:
        raise ValueError("no breakpoints to group")
    size = GROUP_SIZE[mode]
    return [list(range(s, min(s + size, n))) for s in range(0, n, size)]


def _arm_index(i: int, k: int, n: int, closed: bool) -> tuple[int, int]:
    if closed:
        return (i - k) % n, (i + k) % n
    return max(i - k, 0), min(i + k, n - 1)


def k_cosine(points: Breakpoints | Sequence[Point], i: int, k: int,
             closed: bool | None = None) -> float:
    """Cosine of the angle at point ``i`` between arms reaching ``k`` points
    backwards and forwards.  A zero-length arm counts as straight (-1)."""
    if k < 1:
        raise ValueError("support k must be >= 1")
    if isinstance(points, Breakpoints):
        if closed is None:
            closed = points.closed
        points = points.points
    closed = True if closed is None else closed
    n = len(points)
    lo, hi = _arm_index(i, k, n, closed)
    px, py = points[i]
    ax, ay = points[lo][0] - px, points[lo][1] - py
    bx, by = points[hi][0] - px, points[hi][1] - py
    na = math.hypot(ax, ay)
    nb = math.hypot(bx, by)
    if na == 0.0 or nb == 0.0:
        return -1.0
    c = (ax * bx + ay * by) / (na * nb)
    return max(-1.0, min(1.0, c))


def best_support(bps: Breakpoints, i: int, k_max: int) -> tuple[int, float]:
    """Support with the largest k-cosine; the smallest k wins ties."""
    best_k, best_c = 1, -math.inf
    for k in range(1, max(k_max, 1) + 1):
        c = k_cosine(bps, i, k)
        if c > best_c:
            best_k, best_c = k, c
    return best_k, best_c


def detect_dominant_points(bps: Breakpoints, mode: str = STATIC) -> DominantPoints:
    n = len(bps)
    if n < 3:
        return DominantPoints(bps.points, (0,) * n, (-1.0,) * n, bps.closed, tuple(range(n)))
    selected: list[tuple[int, int, float]] = []
    for group in group_breakpoints(bps, mode):
        k_max = len(group)
        if bps.closed:
            # larger supports wrap past the opposite side of the contour
            k_max = min(k_max, (n - 1) // 2)
        scored = [(i, *best_support(bps, i, k_max)) for i in group]
        top = max(c for _, _, c in scored)
        selected.extend(s for s in scored if s[2] == top)

    out: list[tuple[int, int, float]] = []
    for s in selected:
        if out and bps.points[out[-1][0]] == bps.points[s[0]]:
            continue
        out.append(s)
    if bps.closed and len(out) > 1 and bps.points[out[0][0]] == bps.points[out[-1][0]]:
        out.pop()
    return DominantPoints(
        points=tuple(bps.points[i] for i, _, _ in out),
        support=tuple(k for _, k, _ in out),
        cosine=tuple(c for _, _, c in out),
        closed=bps.closed,
        breakpoint_index=tuple(i for i, _, _ in out),
    )


def dominant_points_of(image: BinaryImage, seed: Point | None = None,
                       mode: str = STATIC) -> tuple[ChainCode, Breakpoints, DominantPoints]:
    """Run the whole frame-one contour analysis on a binary image."""
    from .frames import find_boundary_seed

    if seed is None:
        seed = find_boundary_seed(image)
    chain = trace_contour(image, seed)
    bps = extract_breakpoints(chain)
    return chain, bps, detect_dominant_points(bps, mode)
