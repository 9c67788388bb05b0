"""Regular-grid image container and PNG/PPM file IO.

All in-memory math is float64; quantization to 8 bit happens only at encode
time (round half away from zero, clamped to [0, 255]).
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np
from PIL import Image

# ITU-R BT.601 luma weights, used for single-scalar statistics on color images.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass
class RasterImage:
    """Image on a regular pixel grid, stored as (height, width, channels) float64."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D pixel data, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pixel values must be finite")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def plane(self, c: int) -> np.ndarray:
        return self.data[:, :, c]

    def luma(self) -> np.ndarray:
        """Single luminance plane; BT.601 weighted for RGB, identity for gray."""
        if self.channels == 1:
            return self.data[:, :, 0]
        if self.channels == 3:
            return self.data @ _LUMA_WEIGHTS
        raise ValueError(f"no luma definition for {self.channels} channels")

    def to_uint8(self) -> np.ndarray:
        """Quantize to 8 bit: round half away from zero, clamp to [0, 255]."""
        rounded = np.floor(np.abs(self.data) + 0.5) * np.sign(self.data)
        return np.clip(rounded, 0.0, 255.0).astype(np.uint8)

    def quantized(self) -> "RasterImage":
        return RasterImage(self.to_uint8().astype(np.float64))


def read_image(path: str | os.PathLike) -> RasterImage:
    """Read a PNG (or PPM/PGM test fixture) as an 8-bit gray or RGB raster.

    Palette/alpha inputs are collapsed to RGB; 16-bit gray is rescaled to 8 bit.
    """
    with Image.open(path) as im:
        if im.mode in ("L", "RGB"):
            converted = im.copy()
        elif im.mode in ("1", "LA", "I", "I;16", "F"):
            converted = im.convert("L")
        else:
            converted = im.convert("RGB")
        arr = np.asarray(converted, dtype=np.float64)
    return RasterImage(arr)


def write_image(image: RasterImage, path: str | os.PathLike) -> None:
    """Write as 8-bit PNG/PPM. The write is atomic: temp file then rename."""
    arr = image.to_uint8()
    if arr.shape[2] == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    elif arr.shape[2] == 3:
        pil = Image.fromarray(arr, mode="RGB")
    else:
        raise ValueError(f"cannot encode {arr.shape[2]}-channel image")
    path = os.fspath(path)
    fmt = "PPM" if path.lower().endswith((".ppm", ".pgm")) else "PNG"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            pil.save(fh, format=fmt)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
