"""Landmark accuracy evaluation and checkerboard overlays."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySets, LengthMismatch, OutOfField
from .imaging import SimilarityParams, as_field, as_image, bilinear_sample, image_center, similarity_forward, \
    similarity_inverse

DEFAULT_SCALE_MM = 1.2


def as_landmarks(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"landmarks must be an (n, 2) array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class EvalReport:
    per_pair_distances: tuple
    mse_px2: float
    rms_px: float
    error_mm: float
    scale_factor: float

    def format(self) -> str:
        lines = [f"pairs          {len(self.per_pair_distances)}"]
        for i, d in enumerate(self.per_pair_distances):
            lines.append(f"  pair {i:<3d}     {d:.4f} px")
        lines += [
            f"mse_px2        {self.mse_px2:.6f}",
            f"rms_px         {self.rms_px:.6f}",
            f"scale_mm_px    {self.scale_factor:.4f}",
            f"error_mm       {self.error_mm:.6f}",
        ]
        return "\n".join(lines)


def report_from_mse(mse_px2: float, scale_factor: float = DEFAULT_SCALE_MM, distances=()) -> EvalReport:
    rms = math.sqrt(mse_px2)
    return EvalReport(tuple(distances), float(mse_px2), rms, rms * scale_factor, float(scale_factor))


def landmark_error(a, b, scale_factor: float = DEFAULT_SCALE_MM) -> EvalReport:
    """Mean squared landmark distance, its root, and the root in millimeters."""
    a = as_landmarks(a)
    b = as_landmarks(b)
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} landmarks")
    if len(a) == 0:
        raise EmptySets("no landmarks to compare")
    d = np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])
    return report_from_mse(float(np.mean(d ** 2)), scale_factor, (float(v) for v in d))


def _field_lookup(field, x, y):
    h, w = field.shape[:2]
    outside = (x < 0) | (x > w - 1) | (y < 0) | (y > h - 1)
    if np.any(outside):
        raise OutOfField(f"{int(outside.sum())} point(s) outside the {w}x{h} field")
    return bilinear_sample(field, x, y)


def map_landmarks(points, p: SimilarityParams, field=None, shape=None) -> np.ndarray:
    """Forward-map points through ``p``, then add the bilinear field vector there.

    The rotation center comes from ``shape`` (or the field's shape).
    """
    pts = as_landmarks(points)
    if field is not None:
        field = as_field(field)
        shape = field.shape[:2] if shape is None else shape
    if shape is None:
        if p.theta != 0 or p.scale != 1:
            raise ValueError("shape is required to locate the rotation center")
        shape = (1, 1)
    x, y = similarity_forward(p, pts[:, 0], pts[:, 1], image_center(shape))
    if field is not None:
        disp = _field_lookup(field, x, y)
        x, y = x + disp[:, 0], y + disp[:, 1]
    return np.column_stack([x, y])


def registered_correspondences(points_fixed, params: SimilarityParams, field=None, shape=None) -> np.ndarray:
    """Where the registration places fixed-image points in the moving image.

    The warped output is ``moving(T^-1(x + V(x)))``, so a fixed point ``x``
    corresponds to ``T^-1(x + V(x))``; comparing this with the true moving
    landmarks gives the landmark error of the registration.
    """
    pts = as_landmarks(points_fixed)
    x, y = pts[:, 0], pts[:, 1]
    if field is not None:
        field = as_field(field)
        shape = field.shape[:2] if shape is None else shape
        disp = _field_lookup(field, x, y)
        x, y = x + disp[:, 0], y + disp[:, 1]
    if shape is None:
        raise ValueError("shape is required to locate the rotation center")
    sx, sy = similarity_inverse(params, x, y, image_center(shape))
    return np.column_stack([sx, sy])


def checkerboard(a, b, tile: int = 16) -> np.ndarray:
    """Tiles from ``a`` where ``floor(x/tile) + floor(y/tile)`` is even, else from ``b``."""
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    if int(tile) != tile or tile < 1:
        raise ValueError(f"tile must be a positive integer, got {tile}")
    ys, xs = np.indices(a.shape)
    from_a = ((xs // tile + ys // tile) % 2) == 0
    return np.where(from_a, a, b)
