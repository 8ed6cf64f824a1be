"""Synthetic visible/IR face phantom pairs with exact ground truth.

The fixed image is a visible-light-like rendering of a procedural face.
The moving image renders the same face through a known similarity
transform and free-form displacement, with an IR-like palette, a
nonlinear intensity remap and mild noise. Both are rendered analytically,
so no resampling error enters the ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadOptions
from .imaging import SimilarityParams, bilinear_sample, image_center, similarity_forward, similarity_inverse, zero_field

# name, (cx, cy, ax, ay) on a 256 grid, visible intensity, IR intensity
_LAYERS = (
    ("hair", (128, 72, 76, 54), 0.18, 0.42),
    ("neck", (128, 226, 36, 40), 0.60, 0.52),
    ("face", (128, 136, 68, 88), 0.74, 0.66),
    ("brow_l", (98, 99, 17, 4), 0.25, 0.48),
    ("brow_r", (158, 99, 17, 4), 0.25, 0.48),
    ("eye_l", (98, 116, 15, 7), 0.95, 0.42),
    ("eye_r", (158, 116, 15, 7), 0.95, 0.42),
    ("iris_l", (98, 116, 5, 5), 0.30, 0.22),
    ("iris_r", (158, 116, 5, 5), 0.30, 0.22),
    ("canthus_l", (112, 117, 3, 3), 0.50, 1.00),
    ("canthus_r", (144, 117, 3, 3), 0.50, 1.00),
    ("nose", (128, 146, 7, 17), 0.58, 0.48),
    ("mouth", (128, 181, 22, 5), 0.40, 0.92),
)
_BACKGROUND = (0.45, 0.25)

# inner canthi, outer canthi, mouth corners, nose tip, chin
_LANDMARKS = np.array([
    (113.0, 116.0), (143.0, 116.0), (83.0, 116.0), (173.0, 116.0),
    (106.0, 181.0), (150.0, 181.0), (128.0, 162.0), (128.0, 223.0),
    (128.0, 146.0), (98.0, 99.0), (158.0, 99.0), (128.0, 48.0),
])

_EDGE_WIDTH = 0.8


@dataclass(frozen=True)
class SynthOptions:
    """Magnitudes of the generated misalignment and modality gap.

    Translations, rotation and scale deviation are maxima of seeded uniform
    draws; ``deform`` is the maximum free-form displacement.
    """

    translation: float = 0.0   # px, <= 15
    rotation: float = 0.0      # degrees, <= 15
    scale: float = 0.0         # max |s - 1|, <= 0.15
    deform: float = 0.0        # px, <= 10
    gap: float = 0.0           # modality gap strength in [0, 1]
    noise: float = 0.0         # noise sigma, <= 0.02
    n_landmarks: int = 8
    size: int = 256

    def __post_init__(self):
        checks = [
            (0 <= self.translation <= 15, "translation must lie in [0, 15] px"),
            (0 <= self.rotation <= 15, "rotation must lie in [0, 15] degrees"),
            (0 <= self.scale <= 0.15, "scale deviation must lie in [0, 0.15]"),
            (0 <= self.deform <= 10, "deform must lie in [0, 10] px"),
            (0 <= self.gap <= 1, "gap must lie in [0, 1]"),
            (0 <= self.noise <= 0.02, "noise must lie in [0, 0.02]"),
            (1 <= self.n_landmarks <= len(_LANDMARKS), f"n_landmarks must lie in [1, {len(_LANDMARKS)}]"),
            (64 <= self.size <= 2048, "size must lie in [64, 2048]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise BadOptions(msg)


@dataclass
class SynthPair:
    fixed: np.ndarray
    moving: np.ndarray
    truth_params: SimilarityParams
    truth_field: np.ndarray
    landmarks_fixed: np.ndarray
    landmarks_moving: np.ndarray
    seed: int
    options: SynthOptions = SynthOptions()


def _soft_ellipse(x, y, cx, cy, ax, ay):
    dx = x - cx
    dy = y - cy
    f = (dx / ax) ** 2 + (dy / ay) ** 2 - 1.0
    gx = 2.0 * dx / ax ** 2
    gy = 2.0 * dy / ay ** 2
    g = np.hypot(gx, gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(g > 0, f / np.maximum(g, 1e-300), -np.inf)
    return 0.5 - 0.5 * np.tanh(d / _EDGE_WIDTH)


def render_phantom(x, y, size: int = 256, gap: float = 0.0) -> np.ndarray:
    """Evaluate the face phantom at arbitrary coordinates.

    ``gap`` blends each region's intensity from the visible palette (0)
    toward the IR palette (1).
    """
    k = size / 256.0
    bg_vis, bg_ir = _BACKGROUND
    out = np.full(np.shape(x), bg_vis + gap * (bg_ir - bg_vis))
    for _, (cx, cy, ax, ay), vis, ir in _LAYERS:
        m = _soft_ellipse(x, y, cx * k, cy * k, ax * k, ay * k)
        out = out * (1.0 - m) + (vis + gap * (ir - vis)) * m
    return out


def _thermal_shading(x, y, size):
    # warm center, cooler periphery
    k = size / 256.0
    r2 = ((x - 128 * k) / (70 * k)) ** 2 + ((y - 130 * k) / (90 * k)) ** 2
    return np.exp(-r2)


def _make_texture(seed, count, wavelengths, amplitude):
    rng = np.random.default_rng(seed)
    waves = [(rng.uniform(*wavelengths), rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi))
             for _ in range(count)]
    norm = amplitude / math.sqrt(count / 2.0)

    def texture(x, y, size):
        k = size / 256.0
        out = np.zeros(np.shape(x))
        for lam, angle, phase in waves:
            proj = (x * math.cos(angle) + y * math.sin(angle)) / (lam * k)
            out += np.cos(2 * math.pi * proj + phase)
        return norm * out

    return texture


# object-attached thermal pattern, identical for every seed; broad enough
# to stay below the edge detector's thresholds
_thermal_texture = _make_texture(1002, 12, (40.0, 120.0), 0.06)


def phantom_landmarks(n: int = 8, size: int = 256) -> np.ndarray:
    return _LANDMARKS[:n] * (size / 256.0)


def _draw_field(rng, size, deform):
    """Smooth free-form field: Gaussian bumps plus one long-wave sinusoid."""
    k = size / 256.0
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    field = np.zeros((size, size, 2))
    for _ in range(4):
        cx = (128 + rng.uniform(-50, 50)) * k
        cy = (135 + rng.uniform(-60, 60)) * k
        sigma = rng.uniform(28, 40) * k
        angle = rng.uniform(0, 2 * math.pi)
        amp = rng.uniform(0.5, 1.0)
        bump = amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma ** 2))
        field[..., 0] += bump * math.cos(angle)
        field[..., 1] += bump * math.sin(angle)
    wavelength = rng.uniform(160, 256) * k
    wave_dir = rng.uniform(0, 2 * math.pi)
    vec_dir = rng.uniform(0, 2 * math.pi)
    phase = rng.uniform(0, 2 * math.pi)
    proj = (xs * math.cos(wave_dir) + ys * math.sin(wave_dir)) * 2 * math.pi / wavelength
    wave = 0.5 * np.sin(proj + phase)
    field[..., 0] += wave * math.cos(vec_dir)
    field[..., 1] += wave * math.sin(vec_dir)
    peak = np.max(np.hypot(field[..., 0], field[..., 1]))
    return field * (deform / peak) if deform > 0 else np.zeros_like(field)


def invert_field(field, iterations: int = 60) -> np.ndarray:
    """Backward field ``u`` with ``u(x) = -D(x + u(x))``, ``D`` the bilinear field.

    Fixed-point iteration; converges for fields with Jacobian norm below 1.
    """
    h, w = field.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    u = -np.asarray(field, dtype=np.float64)
    for _ in range(iterations):
        u = -bilinear_sample(field, xs + u[..., 0], ys + u[..., 1])
    return u


def generate_pair(seed: int, opts: SynthOptions = SynthOptions()) -> SynthPair:
    """Render a phantom pair with known transform chain.

    A fixed-image point ``p`` appears in the moving image at
    ``q + D(q)`` with ``q = T(p)``, where ``T`` is ``truth_params`` and ``D``
    the bilinearly interpolated ``truth_field``.
    """
    rng = np.random.default_rng(seed)
    size = opts.size
    u = rng.uniform(-1.0, 1.0, size=4)
    truth = SimilarityParams(
        tx=opts.translation * u[0],
        ty=opts.translation * u[1],
        theta=math.radians(opts.rotation * u[2]),
        scale=1.0 + opts.scale * u[3],
    )
    field = _draw_field(rng, size, opts.deform)
    noise = rng.standard_normal((size, size))

    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    center = image_center((size, size))
    fixed = render_phantom(xs, ys, size, 0.0)

    if opts.deform > 0:
        back = invert_field(field)
        qx, qy = xs + back[..., 0], ys + back[..., 1]
    else:
        qx, qy = xs, ys
    px, py = similarity_inverse(truth, qx, qy, center)
    moving = render_phantom(px, py, size, opts.gap)
    if opts.gap > 0:
        moving = moving + opts.gap * _thermal_texture(px, py, size)
    if opts.gap > 0:
        moving = moving + 0.08 * opts.gap * _thermal_shading(px, py, size)
        moving = np.clip(moving, 0.0, 1.0) ** (1.0 - 0.3 * opts.gap)
    if opts.noise > 0:
        moving = moving + opts.noise * noise
    moving = np.clip(moving, 0.0, 1.0)

    lm_fixed = phantom_landmarks(opts.n_landmarks, size)
    lx, ly = similarity_forward(truth, lm_fixed[:, 0], lm_fixed[:, 1], center)
    if opts.deform > 0:
        disp = bilinear_sample(field, lx, ly)
        lx, ly = lx + disp[:, 0], ly + disp[:, 1]
    lm_moving = np.column_stack([lx, ly])

    return SynthPair(fixed, moving, truth, field if opts.deform > 0 else zero_field(size, size),
                     lm_fixed, lm_moving, seed, opts)
