"""Reference bilinear and bicubic resamplers (backward mapping, edge clamp).

These are the comparison methods: each target pixel is pulled through the
inverse transform into source coordinates and blended from its neighborhood.
Out-of-range source coordinates use edge-clamped addressing, the dominant
convention in image libraries.
"""

from __future__ import annotations

import numpy as np

from .geometry import AffineTransform
from .raster import RasterImage

KEYS_A = -0.5  # cubic convolution kernel parameter


def _source_coords(t: AffineTransform, dst_w: int, dst_h: int) -> tuple[np.ndarray, np.ndarray]:
    tx, ty = np.meshgrid(np.arange(dst_w, dtype=np.float64), np.arange(dst_h, dtype=np.float64))
    inv = t.inverse()
    return inv.apply(tx, ty)


def bilinear_resample(image: RasterImage, t: AffineTransform, dst_w: int, dst_h: int) -> RasterImage:
    """Resample through t's inverse with 2x2 bilinear blending."""
    sx, sy = _source_coords(t, dst_w, dst_h)
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0

    h, w = image.height, image.width
    xi0 = np.clip(x0.astype(np.int64), 0, w - 1)
    xi1 = np.clip(xi0 + 1, 0, w - 1)
    yi0 = np.clip(y0.astype(np.int64), 0, h - 1)
    yi1 = np.clip(yi0 + 1, 0, h - 1)

    data = image.data
    out = (
        data[yi0, xi0] * ((1.0 - fx) * (1.0 - fy))[:, :, None]
        + data[yi0, xi1] * (fx * (1.0 - fy))[:, :, None]
        + data[yi1, xi0] * ((1.0 - fx) * fy)[:, :, None]
        + data[yi1, xi1] * (fx * fy)[:, :, None]
    )
    return RasterImage(out)


def cubic_kernel(t: np.ndarray, a: float = KEYS_A) -> np.ndarray:
    """Keys cubic convolution kernel; interpolating, support (-2, 2)."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2 = t * t
    t3 = t2 * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def bicubic_resample(image: RasterImage, t: AffineTransform, dst_w: int, dst_h: int) -> RasterImage:
    """Resample through t's inverse with the 4x4 Keys cubic kernel (a = -0.5)."""
    sx, sy = _source_coords(t, dst_w, dst_h)
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0

    h, w = image.height, image.width
    data = image.data
    out = np.zeros((dst_h, dst_w, image.channels))
    for dy in range(-1, 3):
        wy = cubic_kernel(fy - dy)
        yi = np.clip(y0.astype(np.int64) + dy, 0, h - 1)
        for dx in range(-1, 3):
            wx = cubic_kernel(fx - dx)
            xi = np.clip(x0.astype(np.int64) + dx, 0, w - 1)
            out += data[yi, xi] * (wx * wy)[:, :, None]
    return RasterImage(out)
