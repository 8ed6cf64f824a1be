"""Canny edge maps and smoothed edge potentials.

Edge potentials give two modalities a shared, differentiable surface that
mono-modal Demons can work on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import TooSmall
from .imaging import as_image, gaussian_smooth

# relative tolerance separating genuine maxima from floating-point ties
_TIE_TOL = 1e-9

# neighbor offsets (dx, dy) per quantized gradient direction
_SECTOR_OFFSETS = ((1, 0), (1, 1), (0, 1), (-1, 1))


@dataclass(frozen=True)
class EdgeConfig:
    gauss_sigma: float = 1.4
    low_threshold: float = 0.1
    high_threshold: float = 0.25
    potential_sigma: float = 2.0

    def __post_init__(self):
        if not 0 < self.low_threshold < self.high_threshold <= 1:
            raise ValueError("require 0 < low_threshold < high_threshold <= 1")
        if self.gauss_sigma < 0 or self.potential_sigma < 0:
            raise ValueError("smoothing sigmas must be >= 0")


def sobel_gradients(img):
    gx = ndimage.sobel(img, axis=1, mode="nearest")
    gy = ndimage.sobel(img, axis=0, mode="nearest")
    return gx, gy


def quantize_direction(gx, gy):
    """Map gradient angles to sectors 0..3 (0, 45, 90, 135 degrees)."""
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    return (np.floor((angle + 22.5) / 45.0).astype(np.intp)) % 4


def non_maximum_suppression(mag, sector):
    """Keep pixels that dominate both neighbors along their gradient direction.

    Exact ties are broken toward the neighbor on the negative side, so a
    symmetric ridge two pixels wide thins to one pixel.
    """
    h, w = mag.shape
    tol = _TIE_TOL * float(mag.max()) if mag.size else 0.0
    padded = np.pad(mag, 1, mode="edge")
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dx, dy) in enumerate(_SECTOR_OFFSETS):
        fwd = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        back = padded[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        ok = (mag >= fwd - tol) & (mag > back + tol)
        keep |= (sector == s) & ok
    return keep & (mag > tol)


def hysteresis(mag, candidates, low, high):
    """Weak pixels survive only when 8-connected to a strong pixel."""
    weak = candidates & (mag >= low)
    strong = candidates & (mag >= high)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(mag.shape, dtype=bool)
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels]


def canny(img, cfg: EdgeConfig = EdgeConfig()) -> np.ndarray:
    """Binary edge map (float 0/1) with thresholds relative to the peak gradient."""
    img = as_image(img)
    if img.shape[0] < 5 or img.shape[1] < 5:
        raise TooSmall(f"canny needs at least 5x5, got {img.shape[1]}x{img.shape[0]}")
    smooth = gaussian_smooth(img, cfg.gauss_sigma)
    gx, gy = sobel_gradients(smooth)
    mag = np.hypot(gx, gy)
    peak = float(mag.max())
    if peak <= 0:
        return np.zeros(img.shape)
    thin = non_maximum_suppression(mag, quantize_direction(gx, gy))
    edges = hysteresis(mag, thin, cfg.low_threshold * peak, cfg.high_threshold * peak)
    return edges.astype(np.float64)


def edge_potential(edges, cfg: EdgeConfig = EdgeConfig()) -> np.ndarray:
    """Gaussian-smoothed edge map rescaled to a peak of 1 (all-zero stays zero)."""
    edges = as_image(edges)
    pot = gaussian_smooth(edges, cfg.potential_sigma)
    peak = float(pot.max())
    if peak > 0:
        pot = pot / peak
    return pot
