"""Analytic band-limited test patterns.

A pattern is a small sum of 2-D sinusoids with radial frequencies kept below
half of the Nyquist rate (0.25 cycles/pixel), so it can be evaluated exactly
at any continuous position. That makes it a ground-truth oracle for geometric
resampling: the ideal output pixel under a transform t is the pattern at
t^{-1}(x, y), no interpolation involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import RasterImage

MAX_RADIAL_FREQ = 0.25  # cycles/pixel, half of Nyquist
_AMPLITUDE_SPAN = 100.0
_OFFSET = 127.5


@dataclass(frozen=True)
class BandLimitedPattern:
    """Sum of sinusoids: offset + sum_j A_j cos(2 pi (fx_j x + fy_j y) + ph_j)."""

    amplitudes: tuple[float, ...]
    freq_x: tuple[float, ...]
    freq_y: tuple[float, ...]
    phases: tuple[float, ...]
    offset: float = _OFFSET

    def evaluate(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        out = np.full(np.broadcast(x, y).shape, self.offset)
        for a, fx, fy, ph in zip(self.amplitudes, self.freq_x, self.freq_y, self.phases):
            out += a * np.cos(2.0 * np.pi * (fx * x + fy * y) + ph)
        return out

    def render(self, width: int, height: int) -> RasterImage:
        """Sample the pattern at the integer pixel grid."""
        gx, gy = np.meshgrid(np.arange(width, dtype=np.float64),
                             np.arange(height, dtype=np.float64))
        return RasterImage(self.evaluate(gx, gy))


def make_pattern(seed: int, max_components: int = 8) -> BandLimitedPattern:
    """Draw a random pattern of 3..max_components sinusoids from a seed.

    Radial frequency magnitudes stay in [0.03, 0.22] cycles/pixel, which keeps
    the band limit intact under rotation. Total amplitude is normalized so the
    rendered values stay well inside [0, 255].
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, max_components + 1))
    mags = rng.uniform(0.03, 0.88 * MAX_RADIAL_FREQ, size=n)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    amps = rng.uniform(0.3, 1.0, size=n)
    amps *= _AMPLITUDE_SPAN / amps.sum()
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return BandLimitedPattern(
        amplitudes=tuple(amps),
        freq_x=tuple(mags * np.cos(angles)),
        freq_y=tuple(mags * np.sin(angles)),
        phases=tuple(phases),
    )
