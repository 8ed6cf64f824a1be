"""Core image operations: sampling, warping, smoothing and pyramids.

Images are 2-D float64 arrays indexed ``img[y, x]``. Displacement fields
are ``(h, w, 2)`` float64 arrays holding ``(dx, dy)`` per pixel, in pixels.
All boundaries are handled by clamp-to-edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BadTargetDims, DimensionMismatch, InvalidSigma, TooSmall


def as_image(img) -> np.ndarray:
    """Validate and convert to a float64 2-D array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


def as_field(field) -> np.ndarray:
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"expected an (h, w, 2) displacement field, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("displacement field contains non-finite values")
    return arr


def zero_field(height: int, width: int) -> np.ndarray:
    return np.zeros((height, width, 2), dtype=np.float64)


def image_center(shape) -> tuple[float, float]:
    """Rotation center ``(cx, cy)`` of an image with the given ``(h, w)`` shape."""
    h, w = shape[:2]
    return (w - 1) / 2.0, (h - 1) / 2.0


@dataclass(frozen=True)
class SimilarityParams:
    """Translation, rotation about the image center, and isotropic scale.

    The forward map sends a source point ``p`` to
    ``c + scale * R(theta) @ (p - c) + (tx, ty)``.
    """

    tx: float = 0.0
    ty: float = 0.0
    theta: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        vals = (self.tx, self.ty, self.theta, self.scale)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite similarity parameters {vals}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls) -> "SimilarityParams":
        return cls()

    @classmethod
    def from_array(cls, arr) -> "SimilarityParams":
        tx, ty, theta, scale = (float(v) for v in arr)
        return cls(tx, ty, theta, scale)

    def as_array(self) -> np.ndarray:
        return np.array([self.tx, self.ty, self.theta, self.scale], dtype=np.float64)

    def inverse(self) -> "SimilarityParams":
        """Parameters of the inverse map (same rotation center)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        # -(1/s) R(-theta) t
        itx = -(c * self.tx + s * self.ty) / self.scale
        ity = -(-s * self.tx + c * self.ty) / self.scale
        return SimilarityParams(itx, ity, -self.theta, 1.0 / self.scale)


def similarity_forward(p: SimilarityParams, x, y, center):
    """Apply the forward similarity map to coordinates ``(x, y)``."""
    cx, cy = center
    c, s = math.cos(p.theta), math.sin(p.theta)
    x = np.asarray(x, dtype=np.float64) - cx
    y = np.asarray(y, dtype=np.float64) - cy
    return (cx + p.scale * (c * x - s * y) + p.tx,
            cy + p.scale * (s * x + c * y) + p.ty)


def similarity_inverse(p: SimilarityParams, x, y, center):
    """Apply the inverse similarity map; exact for the identity on integer grids."""
    cx, cy = center
    c, s = math.cos(p.theta), math.sin(p.theta)
    x = np.asarray(x, dtype=np.float64) - p.tx - cx
    y = np.asarray(y, dtype=np.float64) - p.ty - cy
    return (cx + (c * x + s * y) / p.scale,
            cy + (-s * x + c * y) / p.scale)


def rescale_params(p: SimilarityParams, from_shape, to_shape, factor: float) -> SimilarityParams:
    """Re-express params estimated on one pyramid level for another.

    A point ``q`` on the source level corresponds to ``factor * q`` on the
    target level. Only the translation changes; the rotation center shift
    between levels is compensated exactly.
    """
    cf = np.array(image_center(from_shape))
    ct = np.array(image_center(to_shape))
    c, s = math.cos(p.theta), math.sin(p.theta)
    sr = p.scale * np.array([[c, -s], [s, c]])
    d = factor * cf - ct
    t = factor * np.array([p.tx, p.ty]) + d - sr @ d
    return SimilarityParams(float(t[0]), float(t[1]), p.theta, p.scale)


def _catmull_rom_weights(t):
    t2 = t * t
    t3 = t2 * t
    return (
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    )


def bicubic_sample(img, x, y):
    """Catmull-Rom bicubic interpolation at (possibly fractional) ``(x, y)``.

    Accepts scalars or arrays of matching shape. Out-of-support coordinates
    read replicated border pixels. Integer coordinates reproduce grid values
    exactly.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scalar = x.ndim == 0 and y.ndim == 0
    x, y = np.broadcast_arrays(x, y)
    # keep floor() well defined for far-away points
    x = np.clip(x, -2.0, w + 1.0)
    y = np.clip(y, -2.0, h + 1.0)
    x0 = np.floor(x)
    y0 = np.floor(y)
    wx = _catmull_rom_weights(x - x0)
    wy = _catmull_rom_weights(y - y0)
    x0 = x0.astype(np.intp)
    y0 = y0.astype(np.intp)
    flat = img.ravel()
    cols = [np.clip(x0 + k, 0, w - 1) for k in (-1, 0, 1, 2)]
    out = np.zeros(x.shape, dtype=np.float64)
    for j, dy in enumerate((-1, 0, 1, 2)):
        base = np.clip(y0 + dy, 0, h - 1) * w
        line = (wx[0] * flat.take(base + cols[0]) + wx[1] * flat.take(base + cols[1])
                + wx[2] * flat.take(base + cols[2]) + wx[3] * flat.take(base + cols[3]))
        out += wy[j] * line
    if scalar:
        return float(out)
    return out


def bilinear_sample(arr, x, y):
    """Bilinear interpolation with clamp-to-edge.

    ``arr`` may be an image ``(h, w)`` or a vector field ``(h, w, c)``; in the
    latter case the result carries a trailing channel axis.
    """
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if arr.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = arr[y0, x0] * (1.0 - fx) + arr[y0, x1] * fx
    bottom = arr[y1, x0] * (1.0 - fx) + arr[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _grid(shape):
    h, w = shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    return xs.astype(np.float64), ys.astype(np.float64)


def warp_similarity(img, p: SimilarityParams) -> np.ndarray:
    """Backward-warp ``img`` by the similarity ``p``; output has the input shape.

    ``out(q) = img(T^-1 q)`` so content moves by the forward map, e.g. a
    translation ``tx=3`` moves content 3 px to the right.
    """
    img = as_image(img)
    xs, ys = _grid(img.shape)
    sx, sy = similarity_inverse(p, xs, ys, image_center(img.shape))
    return bicubic_sample(img, sx, sy)


def warp_field(img, field) -> np.ndarray:
    """Backward-warp by a displacement field: ``out(x, y) = img(x + dx, y + dy)``."""
    img = as_image(img)
    field = as_field(field)
    if field.shape[:2] != img.shape:
        raise DimensionMismatch(f"field {field.shape[:2]} vs image {img.shape}")
    xs, ys = _grid(img.shape)
    return bicubic_sample(img, xs + field[..., 0], ys + field[..., 1])


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ``ceil(3 sigma)``."""
    radius = int(math.ceil(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    with np.errstate(over="ignore"):  # tiny sigma: off-center taps underflow to 0
        k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(arr, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing over the two spatial axes.

    Works on images and, componentwise, on ``(h, w, 2)`` fields.
    ``sigma == 0`` returns an unchanged copy.
    """
    if sigma < 0 or not math.isfinite(sigma):
        raise InvalidSigma(f"sigma must be >= 0, got {sigma}")
    arr = np.array(arr, dtype=np.float64)
    if sigma == 0:
        return arr
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(arr, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def downsample2(img) -> np.ndarray:
    """Smooth with sigma 1 and keep every second pixel; output is ``floor(dims / 2)``."""
    img = as_image(img)
    h, w = img.shape
    if h < 2 or w < 2:
        raise TooSmall(f"cannot downsample a {w}x{h} image")
    smooth = gaussian_smooth(img, 1.0)
    return smooth[0:2 * (h // 2):2, 0:2 * (w // 2):2]


def upsample_field2(field, target_w: int, target_h: int) -> np.ndarray:
    """Bilinearly resample a field onto a grid twice as fine and double its vectors.

    Target pixel ``X`` reads the coarse field at ``X / 2``, matching the
    decimation used by :func:`downsample2`.
    """
    field = as_field(field)
    h, w = field.shape[:2]
    if not (2 * w <= target_w <= 2 * w + 1 and 2 * h <= target_h <= 2 * h + 1):
        raise BadTargetDims(
            f"target {target_w}x{target_h} outside [{2 * w}, {2 * w + 1}] x [{2 * h}, {2 * h + 1}]")
    xs, ys = _grid((target_h, target_w))
    return 2.0 * bilinear_sample(field, xs / 2.0, ys / 2.0)


def pyramid(img, levels: int) -> list[np.ndarray]:
    """Images from coarsest to finest; ``levels`` counts the full resolution."""
    out = [as_image(img)]
    for _ in range(levels - 1):
        out.append(downsample2(out[-1]))
    return out[::-1]
