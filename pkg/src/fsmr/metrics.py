"""PSNR and SSIM fidelity metrics.

PSNR averages the MSE over all pixels and channels. SSIM is the Gaussian-
window formulation (11x11, sigma 1.5, C1 = (0.01 peak)^2, C2 = (0.03 peak)^2);
the local map is computed wherever the window fits entirely inside the image
and averaged per channel, then across channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .raster import RasterImage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass
class QualityReport:
    """PSNR/SSIM pair with per-channel breakdown."""

    psnr_db: float
    ssim: float
    psnr_per_channel: list[float] = field(default_factory=list)
    ssim_per_channel: list[float] = field(default_factory=list)


def _check_pair(reference: RasterImage, test: RasterImage, peak: float) -> None:
    if reference.data.shape != test.data.shape:
        raise ValueError(
            f"image shapes differ: {reference.data.shape} vs {test.data.shape}"
        )
    if peak <= 0.0:
        raise ValueError(f"peak must be positive, got {peak}")


def _planes(img: RasterImage, luma_only: bool) -> list[np.ndarray]:
    if luma_only:
        return [img.luma()]
    return [img.plane(c) for c in range(img.channels)]


def psnr(reference: RasterImage, test: RasterImage, peak: float = 255.0,
         luma_only: bool = False) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    _check_pair(reference, test, peak)
    refs = _planes(reference, luma_only)
    tests = _planes(test, luma_only)
    mse = float(np.mean([np.mean((r - t) ** 2) for r, t in zip(refs, tests)]))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian tap vector."""
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a symmetric 1-D window."""
    rows = np.lib.stride_tricks.sliding_window_view(plane, taps.size, axis=1) @ taps
    return np.lib.stride_tricks.sliding_window_view(rows, taps.size, axis=0) @ taps


def _ssim_plane(ref: np.ndarray, test: np.ndarray, peak: float) -> float:
    taps = gaussian_window()
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    mu_r = _filter_valid(ref, taps)
    mu_t = _filter_valid(test, taps)
    rr = _filter_valid(ref * ref, taps) - mu_r * mu_r
    tt = _filter_valid(test * test, taps) - mu_t * mu_t
    rt = _filter_valid(ref * test, taps) - mu_r * mu_t

    num = (2.0 * mu_r * mu_t + c1) * (2.0 * rt + c2)
    den = (mu_r * mu_r + mu_t * mu_t + c1) * (rr + tt + c2)
    return float(np.mean(num / den))


def ssim(reference: RasterImage, test: RasterImage, peak: float = 255.0,
         luma_only: bool = False) -> float:
    """Mean local structural similarity; 1.0 for identical images."""
    _check_pair(reference, test, peak)
    if reference.height < SSIM_WINDOW or reference.width < SSIM_WINDOW:
        raise ValueError("image too small for SSIM")
    refs = _planes(reference, luma_only)
    tests = _planes(test, luma_only)
    return float(np.mean([_ssim_plane(r, t, peak) for r, t in zip(refs, tests)]))


def quality_report(reference: RasterImage, test: RasterImage, peak: float = 255.0,
                   luma_only: bool = False) -> QualityReport:
    """Bundle PSNR and SSIM with per-channel values."""
    _check_pair(reference, test, peak)
    if luma_only:
        p = psnr(reference, test, peak, luma_only=True)
        s = ssim(reference, test, peak, luma_only=True)
        return QualityReport(p, s, [p], [s])
    per_p = []
    per_s = []
    for c in range(reference.channels):
        ref_c = RasterImage(reference.plane(c))
        test_c = RasterImage(test.plane(c))
        per_p.append(psnr(ref_c, test_c, peak))
        per_s.append(ssim(ref_c, test_c, peak))
    return QualityReport(
        psnr(reference, test, peak),
        ssim(reference, test, peak),
        per_p,
        per_s,
    )
