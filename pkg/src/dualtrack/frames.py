"""Frame sequences, ground truth files, binarization and contour seeds."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class GrayFrame:
    """Grayscale frame, intensities in [0, 1], indexed as ``data[y, x]``."""

    data: np.ndarray
    index: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise FrameError(f"frame data must be 2-D, got shape {data.shape}")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise FrameError("frame intensities must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class BinaryImage:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=bool)
        if data.ndim != 2:
            raise FrameError(f"binary image must be 2-D, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


# ``None`` marks a frame where the target is absent.
GroundTruthTrack = list[Optional[Rect]]


def _natural_key(path: Path):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", path.name)]


def read_gray(path: str | Path) -> np.ndarray:
    """Decode an image file to float intensities in [0, 1].

    Colour images are reduced by averaging their channels.
    """
    with Image.open(path) as im:
        if im.mode in ("L", "P", "1"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        elif im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64) / 257.0
        else:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
            arr = rgb.mean(axis=2)
    return np.clip(arr / 255.0, 0.0, 1.0)


IMAGE_SUFFIXES = frozenset({".pgm", ".ppm", ".pnm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".gif"})


def load_frame_sequence(directory_path: str | Path, pattern: str = "*") -> list[GrayFrame]:
    """Load every image in a directory, in natural filename order.

    With the default pattern only files with a known image suffix are read,
    so a ground-truth file next to the frames is ignored.
    """
    directory = Path(directory_path)
    if not directory.is_dir():
        raise FrameError(f"frame directory not found: {directory}")
    files = sorted((p for p in directory.glob(pattern) if p.is_file()), key=_natural_key)
    if pattern == "*":
        files = [p for p in files if p.suffix.lower() in IMAGE_SUFFIXES]
    if not files:
        raise FrameError(f"no files match {pattern!r} in {directory}")
    frames: list[GrayFrame] = []
    shape = None
    for i, path in enumerate(files):
        try:
            data = read_gray(path)
        except OSError as exc:
            raise FrameError(f"cannot decode {path}: {exc}") from exc
        if shape is None:
            shape = data.shape
        elif data.shape != shape:
            raise FrameError(
                f"{path}: size {data.shape[1]}x{data.shape[0]} differs from "
                f"first frame {shape[1]}x{shape[0]}"
            )
        frames.append(GrayFrame(data, index=i))
    return frames


def write_frame(frame: GrayFrame | np.ndarray, path: str | Path) -> None:
    data = frame.data if isinstance(frame, GrayFrame) else np.asarray(frame)
    img = np.round(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(img).save(path)


def binarize(frame: GrayFrame, threshold: float = 0.5) -> BinaryImage:
    if not 0.0 <= threshold <= 1.0:
        raise FrameError(f"threshold must be in [0, 1], got {threshold}")
    return BinaryImage(frame.data >= threshold)


def boundary_mask(image: BinaryImage) -> np.ndarray:
    """Foreground pixels with at least one background 8-neighbour.

    Pixels outside the image count as background.
    """
    fg = image.data
    padded = np.pad(fg, 1, constant_values=False)
    interior = np.ones_like(fg)
    h, w = fg.shape
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            interior &= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return fg & ~interior


def find_boundary_seed(image: BinaryImage) -> tuple[int, int]:
    """First boundary pixel in raster order, returned as ``(x, y)``."""
    ys, xs = np.nonzero(boundary_mask(image))
    if len(ys) == 0:
        raise FrameError("no target in frame")
    # np.nonzero walks row-major, so the first hit is raster-first
    return (int(xs[0]), int(ys[0]))


def _parse_gt_line(line: str, lineno: int) -> Optional[Rect]:
    parts = [p for p in re.split(r"[,\t ]+", line.strip()) if p]
    if len(parts) == 1 and parts[0].lower() == "nan":
        return None
    if len(parts) != 4:
        raise FrameError(f"ground truth line {lineno}: expected 4 values, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise FrameError(f"ground truth line {lineno}: {exc}") from exc
    if all(math.isnan(v) for v in vals):
        return None
    if any(math.isnan(v) for v in vals):
        raise FrameError(f"ground truth line {lineno}: partially missing rectangle")
    x, y, w, h = vals
    if w <= 0 or h <= 0:
        raise FrameError(f"ground truth line {lineno}: non-positive size {w}x{h}")
    return Rect(x, y, w, h)


def load_ground_truth(path: str | Path) -> GroundTruthTrack:
    track: GroundTruthTrack = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            track.append(_parse_gt_line(line, lineno))
    return track


def write_ground_truth(track: Sequence[Optional[Rect]], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rect in track:
            if rect is None:
                fh.write("NaN,NaN,NaN,NaN\n")
            else:
                fh.write(f"{rect.x:g},{rect.y:g},{rect.w:g},{rect.h:g}\n")
