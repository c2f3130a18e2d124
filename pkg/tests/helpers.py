"""Image builders shared by the test modules."""
import numpy as np

from dualtrack.frames import BinaryImage, GrayFrame


def binary(rows):
    """BinaryImage from a list of '0'/'1' strings."""
    return BinaryImage(np.array([[c == "1" for c in r] for r in rows]))


def square_image(size=5, pad=3):
    a = np.zeros((size + 2 * pad, size + 2 * pad), bool)
    a[pad:pad + size, pad:pad + size] = True
    return BinaryImage(a)


def smooth_texture(shape, rng, dx=0.0, dy=0.0):
    """Band-limited random texture sampled at (x - dx, y - dy)."""
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(float)
    x -= dx
    y -= dy
    img = np.zeros(shape)
    total = 0.0
    for _ in range(6):
        fx, fy = rng.uniform(0.15, 0.45, 2) * rng.choice([-1, 1], 2)
        ph = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.5, 1.0)
        img += amp * np.sin(fx * x + fy * y + ph)
        total += amp
    # fixed affine map, so a shifted copy keeps exactly the same intensities
    return GrayFrame(0.5 + 0.4 * img / total)
