"""Deterministic synthetic sequences with exact ground truth."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from skimage.draw import polygon as raster_polygon

from .frames import GrayFrame, Rect, write_frame, write_ground_truth


class SceneError(ValueError):
    pass


@dataclass
class Occlusion:
    start: int  # first occluded frame, inclusive
    end: int  # last occluded frame, inclusive
    rect: tuple[int, int, int, int]  # x, y, w, h


@dataclass
class SceneSpec:
    width: int = 180
    height: int = 144
    n_frames: int = 60
    shape: str = "square"  # square | lshape | polygon
    size: int = 20
    # polygon vertices relative to the shape origin, for shape == "polygon"
    vertices: list[tuple[float, float]] = field(default_factory=list)
    start: tuple[float, float] = (20.0, 62.0)
    velocity: tuple[float, float] = (2.0, 0.0)
    # optional piecewise motion: (n_frames, vx, vy) legs, overrides velocity
    path: list[tuple[int, float, float]] = field(default_factory=list)
    texture: str = "flat"  # flat | noise
    background: str = "flat"  # flat | drift
    noise_amplitude: float = 0.2
    seed: int = 0
    occlusions: list[Occlusion] = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        d["occlusions"] = [o if isinstance(o, Occlusion) else Occlusion(o["start"], o["end"], tuple(o["rect"]))
                           for o in d.get("occlusions", [])]
        for key in ("start", "velocity"):
            if key in d:
                d[key] = tuple(d[key])
        if "vertices" in d:
            d["vertices"] = [tuple(v) for v in d["vertices"]]
        if "path" in d:
            d["path"] = [tuple(leg) for leg in d["path"]]
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SceneError(f"unknown scene keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "SceneSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def shape_mask(spec: SceneSpec) -> np.ndarray:
    """Boolean mask of the shape in its own coordinates (origin top-left)."""
    s = spec.size
    if spec.shape == "square":
        return np.ones((s, s), dtype=bool)
    if spec.shape == "lshape":
        m = np.zeros((s, s), dtype=bool)
        arm = max(s // 2, 1)
        m[:, :arm] = True
        m[s - arm:, :] = True
        return m
    if spec.shape == "polygon":
        if len(spec.vertices) < 3:
            raise SceneError("polygon shape needs at least 3 vertices")
        v = np.asarray(spec.vertices, dtype=float)
        if v.min() < 0:
            raise SceneError("polygon vertices must be non-negative")
        h = int(np.ceil(v[:, 1].max())) + 1
        w = int(np.ceil(v[:, 0].max())) + 1
        m = np.zeros((h, w), dtype=bool)
        rr, cc = raster_polygon(v[:, 1], v[:, 0], shape=m.shape)
        m[rr, cc] = True
        return m
    raise SceneError(f"unknown shape {spec.shape!r}")


def trajectory(spec: SceneSpec) -> np.ndarray:
    """Integer top-left offset of the shape in every frame."""
    if spec.path:
        steps = []
        for n, vx, vy in spec.path:
            steps.extend([(vx, vy)] * int(n))
        if len(steps) < spec.n_frames - 1:
            steps.extend([steps[-1] if steps else (0.0, 0.0)] * (spec.n_frames - 1 - len(steps)))
        steps = np.asarray(steps[: spec.n_frames - 1], dtype=float).reshape(-1, 2)
    else:
        steps = np.tile(np.asarray(spec.velocity, dtype=float), (max(spec.n_frames - 1, 0), 1))
    pos = np.vstack([np.asarray(spec.start, dtype=float), np.asarray(spec.start) + np.cumsum(steps, axis=0)])
    return np.round(pos).astype(int)


def validate(spec: SceneSpec) -> None:
    if spec.width < 3 or spec.height < 3 or spec.n_frames < 1:
        raise SceneError("frame size must be at least 3x3 and n_frames >= 1")
    if spec.texture not in ("flat", "noise") or spec.background not in ("flat", "drift"):
        raise SceneError("texture must be flat|noise and background flat|drift")
    if not 0.0 <= spec.noise_amplitude <= 0.2:
        raise SceneError("noise_amplitude must lie in [0, 0.2] to keep the target separable")
    mask = shape_mask(spec)
    ys, xs = np.nonzero(mask)
    for k, (ox, oy) in enumerate(trajectory(spec)):
        if ox + xs.min() < 0 or oy + ys.min() < 0 or ox + xs.max() >= spec.width or oy + ys.max() >= spec.height:
            raise SceneError(f"shape leaves the frame at frame {k}")


def generate(spec: SceneSpec) -> tuple[list[GrayFrame], list[Optional[Rect]]]:
    validate(spec)
    rng = np.random.default_rng(spec.seed)
    mask = shape_mask(spec)
    mh, mw = mask.shape
    ys, xs = np.nonzero(mask)
    a = spec.noise_amplitude
    fg_tex = 0.9 + a * (rng.random(mask.shape) - 0.5) if spec.texture == "noise" else np.ones(mask.shape)
    if spec.background == "drift":
        bg_tex = 0.1 + a * (rng.random((spec.height, spec.width + spec.n_frames)) - 0.5)
    frames: list[GrayFrame] = []
    truth: list[Optional[Rect]] = []
    for k, (ox, oy) in enumerate(trajectory(spec)):
        if spec.background == "drift":
            bg = bg_tex[:, k:k + spec.width].copy()
        else:
            bg = np.zeros((spec.height, spec.width))
        img = bg.copy()
        img[oy:oy + mh, ox:ox + mw][mask] = fg_tex[mask]
        for occ in spec.occlusions:
            if occ.start <= k <= occ.end:
                x, y, w, h = occ.rect
                img[y:y + h, x:x + w] = bg[y:y + h, x:x + w]
        frames.append(GrayFrame(np.clip(img, 0.0, 1.0), index=k))
        truth.append(Rect(float(ox + xs.min()), float(oy + ys.min()),
                          float(xs.max() - xs.min() + 1), float(ys.max() - ys.min() + 1)))
    return frames, truth


def write_scene(frames: Sequence[GrayFrame], truth: Sequence[Optional[Rect]], out_dir: str | Path) -> Path:
    """Write ``frame_0000.pgm``... and ``groundtruth.txt`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for f in frames:
        write_frame(f, out / f"frame_{f.index:04d}.pgm")
    write_ground_truth(truth, out / "groundtruth.txt")
    return out
