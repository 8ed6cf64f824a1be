"""Joint histograms, Shannon entropy and mutual information (bits)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadBinCount, DimensionMismatch, TooFewSamples
from .imaging import SimilarityParams, as_image, bicubic_sample, image_center, similarity_inverse

DEFAULT_BINS = 64
MIN_SURVIVORS = 50


@dataclass(frozen=True)
class JointHistogram:
    counts: np.ndarray  # (bins, bins) int64, rows index the first image

    @property
    def bins(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def pdf(self) -> np.ndarray:
        total = self.total
        if total == 0:
            return np.zeros(self.counts.shape)
        return self.counts / total


def _check_bins(bins):
    if int(bins) != bins or bins < 2:
        raise BadBinCount(f"bins must be an integer >= 2, got {bins}")
    return int(bins)


def bin_index(values, bins: int) -> np.ndarray:
    idx = np.floor(np.asarray(values, dtype=np.float64) * bins)
    return np.clip(idx, 0, bins - 1).astype(np.intp)


def histogram_from_values(va, vb, bins: int = DEFAULT_BINS) -> JointHistogram:
    bins = _check_bins(bins)
    ia = bin_index(np.ravel(va), bins)
    ib = bin_index(np.ravel(vb), bins)
    counts = np.bincount(ia * bins + ib, minlength=bins * bins).reshape(bins, bins)
    return JointHistogram(counts.astype(np.int64))


def joint_histogram(a, b, bins: int = DEFAULT_BINS) -> JointHistogram:
    """Count co-occurring intensity pairs; intensity ``v`` falls in bin ``floor(v * bins)``."""
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return histogram_from_values(a, b, bins)


def entropy(p) -> float:
    """Shannon entropy in bits; zero-probability outcomes contribute nothing."""
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mi_from_histogram(hist: JointHistogram) -> float:
    pab = hist.pdf()
    h_a = entropy(pab.sum(axis=1))
    h_b = entropy(pab.sum(axis=0))
    return h_a + h_b - entropy(pab)


def mutual_information(a, b, bins: int = DEFAULT_BINS) -> float:
    """``H(A) + H(B) - H(A, B)`` from the dense joint histogram."""
    return mi_from_histogram(joint_histogram(a, b, bins))


class MISampler:
    """Sampled MI between ``fixed`` and a similarity-warped ``moving``.

    The fixed-image sample positions are drawn once from ``seed``; every
    evaluation reuses them, so finite differences see common random numbers.
    When ``n_samples`` reaches the pixel count every pixel is used once.
    """

    def __init__(self, fixed, moving, n_samples: int = 20000,
                 bins: int = DEFAULT_BINS, seed: int = 0):
        if n_samples < 100:
            raise ValueError(f"n_samples must be >= 100, got {n_samples}")
        self.fixed = as_image(fixed)
        self.moving = as_image(moving)
        self.bins = _check_bins(bins)
        h, w = self.fixed.shape
        if n_samples >= h * w:
            # more samples than pixels would only repeat pixels; use each one once
            flat = np.arange(h * w)
        else:
            flat = np.random.default_rng(seed).integers(0, h * w, size=int(n_samples))
        self.ys = (flat // w).astype(np.float64)
        self.xs = (flat % w).astype(np.float64)
        self.fixed_bins = bin_index(self.fixed.ravel()[flat], self.bins)
        self.center = image_center(self.fixed.shape)

    def histogram(self, p: SimilarityParams) -> JointHistogram:
        mh, mw = self.moving.shape
        sx, sy = similarity_inverse(p, self.xs, self.ys, self.center)
        # a sample survives while it lands on some pixel footprint of the moving image
        inside = (sx >= -0.5) & (sx <= mw - 0.5) & (sy >= -0.5) & (sy <= mh - 0.5)
        n_inside = int(inside.sum())
        if n_inside < MIN_SURVIVORS:
            raise TooFewSamples(f"only {n_inside} samples map inside the moving image")
        vals = bicubic_sample(self.moving, sx[inside], sy[inside])
        ib = bin_index(vals, self.bins)
        idx = self.fixed_bins[inside] * self.bins + ib
        counts = np.bincount(idx, minlength=self.bins * self.bins)
        return JointHistogram(counts.reshape(self.bins, self.bins).astype(np.int64))

    def __call__(self, p: SimilarityParams) -> float:
        return mi_from_histogram(self.histogram(p))


def sampled_mi(fixed, moving, p: SimilarityParams, n_samples: int = 20000,
               bins: int = DEFAULT_BINS, seed: int = 0) -> float:
    """MI estimated from ``n_samples`` seeded fixed-image pixel positions.

    Samples whose inverse-mapped position leaves the moving image are dropped.
    Raises :class:`TooFewSamples` when fewer than 50 survive.
    """
    return MISampler(fixed, moving, n_samples, bins, seed)(p)
