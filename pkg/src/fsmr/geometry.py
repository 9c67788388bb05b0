"""Affine transforms and forward mapping of pixel grids to scattered meshes.

Coordinate convention: pixel centers sit at integer coordinates, so a W-pixel
row spans the continuous domain [-0.5, W - 0.5]. Positive rotation angles turn
counter-clockwise in the mathematical orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import RasterImage


@dataclass(frozen=True)
class AffineTransform:
    """Invertible map (x, y) -> (a*x + b*y + tx, c*x + d*y + ty)."""

    a: float
    b: float
    c: float
    d: float
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self) -> None:
        if self.determinant == 0.0:
            raise ValueError("affine transform must be invertible (det != 0)")

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def apply(self, x, y):
        """Map coordinates; accepts scalars or arrays, returns (x', y')."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return self.a * x + self.b * y + self.tx, self.c * x + self.d * y + self.ty

    def inverse(self) -> "AffineTransform":
        det = self.determinant
        ia, ib = self.d / det, -self.b / det
        ic, id_ = -self.c / det, self.a / det
        return AffineTransform(
            ia, ib, ic, id_,
            -(ia * self.tx + ib * self.ty),
            -(ic * self.tx + id_ * self.ty),
        )

    def then(self, other: "AffineTransform") -> "AffineTransform":
        """Composition: apply self first, then `other`."""
        return AffineTransform(
            other.a * self.a + other.b * self.c,
            other.a * self.b + other.b * self.d,
            other.c * self.a + other.d * self.c,
            other.c * self.b + other.d * self.d,
            other.a * self.tx + other.b * self.ty + other.tx,
            other.c * self.tx + other.d * self.ty + other.ty,
        )


@dataclass
class MeshCloud:
    """Scattered samples in target-grid coordinates, one value row per channel."""

    xs: np.ndarray          # (N,) float64
    ys: np.ndarray          # (N,) float64
    values: np.ndarray      # (N, channels) float64
    source_dims: tuple[int, int]
    target_dims: tuple[int, int]

    def __post_init__(self) -> None:
        self.xs = np.asarray(self.xs, dtype=np.float64).ravel()
        self.ys = np.asarray(self.ys, dtype=np.float64).ravel()
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        self.values = values
        if not (self.xs.shape[0] == self.ys.shape[0] == self.values.shape[0]):
            raise ValueError("xs, ys and values must have matching lengths")
        if self.values.shape[1] < 1:
            raise ValueError("cloud needs at least one channel")
        if not (np.all(np.isfinite(self.xs)) and np.all(np.isfinite(self.ys))
                and np.all(np.isfinite(self.values))):
            raise ValueError("cloud coordinates and values must be finite")

    def __len__(self) -> int:
        return self.xs.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


def identity() -> AffineTransform:
    return AffineTransform(1.0, 0.0, 0.0, 1.0)


def translation(dx: float, dy: float) -> AffineTransform:
    return AffineTransform(1.0, 0.0, 0.0, 1.0, dx, dy)


def rotation_about(angle_degrees: float, center_x: float, center_y: float) -> AffineTransform:
    """Rigid rotation about a center point (determinant 1)."""
    if not math.isfinite(angle_degrees):
        raise ValueError("rotation angle must be finite")
    theta = math.radians(angle_degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    a, b, c, d = cos_t, -sin_t, sin_t, cos_t
    return AffineTransform(
        a, b, c, d,
        center_x - a * center_x - b * center_y,
        center_y - c * center_x - d * center_y,
    )


def zoom_about(factor: float, center_x: float, center_y: float) -> AffineTransform:
    """Uniform scaling about a center point (determinant factor**2)."""
    if factor <= 0.0:
        raise ValueError(f"zoom factor must be positive, got {factor}")
    return AffineTransform(
        factor, 0.0, 0.0, factor,
        center_x * (1.0 - factor),
        center_y * (1.0 - factor),
    )


def resize_transform(src_w: int, src_h: int, dst_w: int, dst_h: int) -> AffineTransform:
    """Map source pixel centers to destination pixel centers.

    Uses the pixel-center alignment x' = (x + 0.5) * dst/src - 0.5, which keeps
    the image edges at -0.5 fixed.
    """
    if min(src_w, src_h, dst_w, dst_h) < 1:
        raise ValueError("image dimensions must be >= 1")
    sx = dst_w / src_w
    sy = dst_h / src_h
    return AffineTransform(sx, 0.0, 0.0, sy, 0.5 * sx - 0.5, 0.5 * sy - 0.5)


def forward_map(
    image: RasterImage,
    t: AffineTransform,
    target_w: int,
    target_h: int,
    margin: float = 8.0,
) -> MeshCloud:
    """Push every source pixel through the transform into target coordinates.

    Sample order is row-major in source coordinates (x fastest), which pins the
    output ordering for determinism. Samples landing outside the target domain
    expanded by `margin` on every side are discarded: they cannot influence any
    reconstructed block, and clamping them instead would double-count border
    evidence.
    """
    h, w = image.height, image.width
    nx, ny = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    sx, sy = t.apply(nx.ravel(), ny.ravel())
    values = image.data.reshape(h * w, image.channels)

    keep = (
        (sx >= -0.5 - margin) & (sx <= target_w - 0.5 + margin)
        & (sy >= -0.5 - margin) & (sy <= target_h - 0.5 + margin)
    )
    return MeshCloud(
        xs=sx[keep],
        ys=sy[keep],
        values=values[keep],
        source_dims=(w, h),
        target_dims=(target_w, target_h),
    )
